"""Frozen pass thresholds for the experiment suite.

Every implicit-constant claim is converted into a regression test by a
one-time calibration run (tools/calibrate_frozen.py): the constant is
fixed at twice the observed maximum and committed here.  Experiments
assert against these values and never tune at runtime.
"""

# equicontinuity transport: additive budget on sup_t ||q(t)||_K^2 and the
# summed beta2 transfer bound (both per calibration run, x2 safety)
EQUICONTINUITY_BUDGET = 1.0e-6
BETA2_TRANSFER_BOUND = 1.0e-6

# summed |a - exp(-tr)| over the dyadic ladder, on mass-capped ensembles
DET_VS_EXPTR_BOUND = 1.0

# H^s growth: sup_t beta_s2(kappa) <= C1 sup_0 beta_s2(kappa) + C2 kappa^{2s} sup M^2
HS_GROWTH_C1 = 2.0
HS_GROWTH_C2 = 1.0

# ||q||_{H1}^2 <= C (H2 + M^3) on calibrated ensembles
H1_COERCIVITY_C = 10.0

# two-sided band for ||Lambda_N||_HS^2 / [log(4+N^2/kappa^2)/(kappa+N) ||q_N||^2]
HS_RATIO_LOW = 0.05
HS_RATIO_HIGH = 2.0

# one-sided constants for the operator-norm estimates
OP_RATIO_HIGH = 2.0
OPSUM_RATIO_HIGH = 4.0

# resolvent-sandwich estimates
EST1_HIGH = 2.0
EST2_HIGH = 2.0
EST3_HIGH = 2.0

# comparability of ||q||_K^2 with the dyadic-count comparator
KNORM_COMPARE_LOW = 0.05
KNORM_COMPARE_HIGH = 20.0

# ||q_{> kappa}||_{H^s}^2 <= C beta_s2(kappa; q)
HS_HIGH_C = 20.0
