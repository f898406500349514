import json
import math

import numpy as np
import pytest

from dnlslab.errors import InputError
from dnlslab.experiments import (
    Ensemble,
    build_ensemble,
    certify,
    equicontinuity_report,
    h1_coercivity_check,
    hs_growth_report,
    inequality_suite,
    scaling_covariance_report,
    write_report,
)
from dnlslab.profiles import gaussian
from dnlslab.spectral import FieldState, Grid

FOUR_PI = 4 * math.pi


class TestEnsembles:
    def test_gaussian_single(self):
        ens = build_ensemble("gaussian", 1, seed=3, mass_cap=1.0, grid=Grid(128, 1.0))
        assert len(ens.members) == 1
        assert 0.0 < ens.members[0].mass() < 1.0

    def test_determinism(self):
        a = build_ensemble("random-band", 3, seed=9, mass_cap=2.0, grid=Grid(128, 1.0))
        b = build_ensemble("random-band", 3, seed=9, mass_cap=2.0, grid=Grid(128, 1.0))
        for m1, m2 in zip(a.members, b.members):
            assert np.array_equal(m1.coefficients, m2.coefficients)

    def test_soliton_rescale_equal_masses(self):
        ens = build_ensemble("soliton-rescale", 3, seed=0, mass_cap=2.0, grid=Grid(1024, 64.0))
        masses = [m.mass() for m in ens.members]
        for m in masses[1:]:
            assert abs(m - masses[0]) < 1e-10

    def test_cap_violation_rejected(self):
        grid = Grid(128, 1.0)
        q = gaussian(grid, 0.15, 2.0)
        with pytest.raises(InputError):
            Ensemble(members=[q], mass_cap=1.0)

    def test_unresolvable_dilation_rejected(self):
        with pytest.raises(InputError):
            build_ensemble("soliton-rescale", 8, seed=0, mass_cap=2.0, grid=Grid(256, 64.0))

    def test_certificate(self):
        ens = build_ensemble("gaussian", 4, seed=1, mass_cap=0.8 * FOUR_PI, grid=Grid(256, 4.0))
        eps, kappa0, kset = certify(ens)
        assert eps > 0 and kappa0 >= 1
        assert list(kset)[0] == kappa0


class TestEquicontinuity:
    def test_zero_ensemble_trivial_pass(self):
        grid = Grid(128, 1.0)
        ens = Ensemble(members=[FieldState.zero(grid)], mass_cap=1.0)
        rep = equicontinuity_report(ens, flow="dnls", t_final=0.01, dt=1e-3, monitor_stride=5)
        assert rep.passed and not rep.exploratory

    def test_gaussian_ensemble_passes(self):
        ens = build_ensemble("gaussian", 3, seed=2, mass_cap=0.5 * FOUR_PI, grid=Grid(256, 4.0))
        rep = equicontinuity_report(ens, flow="dnls", t_final=0.05, dt=2e-4, monitor_stride=100)
        assert not rep.inconclusive
        assert rep.passed
        assert rep.summaries["supt_knorm_sq"] <= rep.summaries["sup0_knorm_sq"] + rep.summaries["budget"]

    def test_exploratory_above_threshold(self):
        ens = build_ensemble("gaussian", 1, seed=4, mass_cap=1.5 * FOUR_PI, grid=Grid(512, 8.0))
        rep = equicontinuity_report(ens, flow="dnls", t_final=0.01, dt=1e-4, monitor_stride=50)
        assert rep.exploratory


class TestHsGrowthAndCoercivity:
    def test_hs_growth_small_ensemble(self):
        ens = build_ensemble("gaussian", 2, seed=5, mass_cap=0.5 * FOUR_PI, grid=Grid(256, 4.0))
        rep = hs_growth_report(ens, s=1.0 / 6.0, t_final=0.05, dt=2e-4)
        assert not rep.inconclusive
        assert rep.summaries["ladder_monotone"]
        assert rep.passed

    def test_h1_coercivity(self):
        ens = build_ensemble("gaussian", 4, seed=6, mass_cap=0.8 * FOUR_PI, grid=Grid(256, 4.0))
        rep = h1_coercivity_check(ens)
        assert rep.passed

    def test_zero_member_trivial(self):
        grid = Grid(128, 1.0)
        ens = Ensemble(members=[FieldState.zero(grid)], mass_cap=1.0)
        rep = h1_coercivity_check(ens)
        assert rep.passed


class TestInequalitySuite:
    def test_suite_passes(self):
        rep = inequality_suite(seed=0)
        assert rep.passed
        assert rep.summaries["det2ish_worst"] <= 1.0
        assert rep.summaries["unwrap_worst"] <= rep.summaries["unwrap_bound"]

    def test_deterministic(self):
        a = inequality_suite(seed=3)
        b = inequality_suite(seed=3)
        assert a.summaries["det2ish_worst"] == b.summaries["det2ish_worst"]


class TestScalingCovariance:
    def test_lambda_one_trivial(self):
        grid = Grid(1024, 64.0)
        base = gaussian(grid, 1.0, 1.0)
        rep = scaling_covariance_report(base, lambdas=(1,), kappas=(8.0,), t=0.005, dt=2e-4)
        assert rep.passed

    def test_leakage_inconclusive(self):
        grid = Grid(128, 1.0)
        base = gaussian(grid, 0.02, 1.0)  # occupies most of the small grid
        rep = scaling_covariance_report(base, lambdas=(2,), kappas=(8.0,))
        assert rep.inconclusive


class TestReportOutput:
    def test_write_report(self, tmp_path):
        grid = Grid(128, 1.0)
        ens = Ensemble(members=[FieldState.zero(grid)], mass_cap=1.0)
        rep = h1_coercivity_check(ens)
        path = write_report(rep, tmp_path)
        payload = json.loads((tmp_path / "report.json").read_text())
        assert payload["name"] == "h1_coercivity"
        assert payload["passed"] is True
        csvs = list(tmp_path.glob("*.csv"))
        dats = list(tmp_path.glob("*.dat"))
        assert csvs and dats
