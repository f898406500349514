import math

import numpy as np
import pytest

from dnlslab.lattice import (
    chain_sum_closed,
    coth_half,
    em_tail,
    hs_weight_sums,
    lattice_sum_em,
    pair_sum_closed,
    pair_sum_em,
    pair_sum_windowed,
)


def brute_chain(shifts, signs, kappa, period, kmax=400000):
    h = 2 * math.pi / period
    zeta = np.arange(-kmax, kmax + 1) * h
    val = np.ones(zeta.size, dtype=complex)
    for a, s in zip(shifts, signs):
        val /= kappa - s * 1j * (zeta + a)
    return np.sum(val)


class TestEulerMaclaurin:
    def test_symmetric_resolvent_pair_matches_coth(self):
        # sum_eta (kappa^2+eta^2)^{-1} = (L/(2 kappa)) coth(kappa L / 2)
        for kappa, L in [(2.0, 1.0), (7.0, 1.0), (3.0, 4.0), (1.0, 64.0)]:
            got = lattice_sum_em(lambda e: 1.0 / (kappa**2 + e**2), 2 * math.pi / L, 60 * kappa + 3000 * math.pi / L)
            want = L / (2 * kappa) * coth_half(kappa, L)
            assert abs(got - want) < 1e-12 * abs(want)

    def test_em_tail_hurwitz_zeta_oracle(self):
        from scipy.special import zeta

        h = 1.0
        x0 = 50.0

        def g(x):
            return 1.0 / x**3

        want = float(zeta(3, x0 + 1.0))  # sum_{k>=1} (x0+k)^{-3}
        got = em_tail(g, x0, h)
        assert abs(got - want) < 1e-14


class TestPairSums:
    def test_closed_vs_em(self):
        for kappa, L in [(2.0, 1.0), (16.0, 1.0), (4.0, 64.0)]:
            h = 2 * math.pi / L
            m = np.array([0.0, h, -3 * h, 10 * h])
            closed = pair_sum_closed(m, kappa, L)
            indep = pair_sum_em(m, kappa, L)
            assert np.max(np.abs(closed - indep)) < 1e-10 * np.max(np.abs(closed))

    def test_windowed_converges_to_closed(self):
        kappa, L = 2.0, 1.0
        h = 2 * math.pi / L
        m = np.array([0.0, 2 * h])
        full = pair_sum_closed(m, kappa, L)
        errs = []
        for kmax in (200, 400, 800):
            window = np.arange(-kmax, kmax + 1) * h
            errs.append(np.max(np.abs(pair_sum_windowed(m, window, kappa) - full)))
        # harmonic-rate window convergence: halves with each doubling
        assert errs[1] < 0.6 * errs[0] and errs[2] < 0.6 * errs[1]


class TestChainSums:
    def test_pair_consistency(self):
        kappa, L = 3.0, 1.0
        h = 2 * math.pi / L
        for k in (0, 1, -5):
            got = chain_sum_closed([k * h, 0.0], [+1, -1], kappa, L)
            want = complex(pair_sum_closed(np.array([k * h]), kappa, L)[0])
            assert abs(got - want) < 1e-12 * abs(want)

    def test_double_pole_closed_form(self):
        # sum 1/(kappa - i zeta)^2 = (L^2/4) csch^2(kappa L / 2)
        for kappa, L in [(2.0, 1.0), (5.0, 2.0)]:
            got = chain_sum_closed([0.0, 0.0], [+1, +1], kappa, L)
            want = (L / 2.0) ** 2 / math.sinh(kappa * L / 2.0) ** 2
            assert abs(got - want) < 1e-12 * abs(want) + 1e-15

    @pytest.mark.parametrize(
        "shifts_k,signs",
        [
            ((2, 0, 0), (+1, -1, +1)),
            ((0, 0, 0), (+1, -1, +1)),       # degenerate outer pair
            ((1, -2, 3), (+1, -1, +1)),
            ((4, 1, 0, -2), (+1, -1, +1, -1)),
            ((0, 0, 0, 0), (+1, -1, +1, -1)),  # double poles both sides
        ],
    )
    def test_against_em_oracle(self, shifts_k, signs):
        kappa, L = 2.5, 1.0
        h = 2 * math.pi / L
        shifts = [k * h for k in shifts_k]
        got = chain_sum_closed(shifts, signs, kappa, L)

        def g(zeta):
            val = np.ones_like(zeta, dtype=complex)
            for a, s in zip(shifts, signs):
                val = val / (kappa - s * 1j * (zeta + a))
            return val

        want = lattice_sum_em(g, h, 3000.0 * h)
        assert abs(got - want) < 1e-11 * max(abs(want), 1e-6)

    def test_against_brute_force(self):
        kappa, L = 2.0, 1.0
        h = 2 * math.pi / L
        got = chain_sum_closed([2 * h, h, 0.0], [+1, -1, +1], kappa, L)
        want = brute_chain([2 * h, h, 0.0], [+1, -1, +1], kappa, L)
        assert abs(got - want) < 1e-9 * abs(want)


class TestHsWeights:
    def test_zero_offset_partial_fraction_value(self):
        # S(0) at kappa=2, L=1: sum (4+eta^2)^{-1} = coth(1)/4
        got = hs_weight_sums(np.array([0.0]), 2.0, 1.0)[0]
        want = coth_half(2.0, 1.0) / 4.0
        assert abs(got - want) < 1e-11 * want
        assert abs(want - 0.3282588213748328) < 1e-12

    def test_symmetry_and_monotonicity(self):
        xi = np.array([0.0, 2 * math.pi, 4 * math.pi, -4 * math.pi])
        s = hs_weight_sums(xi, 3.0, 1.0)
        assert abs(s[2] - s[3]) < 1e-14
        assert s[0] > s[1] > s[2]
