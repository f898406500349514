import math

import numpy as np
import pytest

from conftest import random_band_field
from dnlslab.errors import GuardError
from dnlslab.gradients import (
    f_cubic,
    f_linear_symbol,
    f_vector_field,
    gamma_field,
    grad_alpha,
    identity_residuals,
    pairing,
)
from dnlslab.operators import alpha_series, window_frequencies
from dnlslab.spectral import FieldState, Grid, apply_multiplier, sobolev_norm


def fd_derivative(q, kappa, window, h, eps=1e-5):
    """Central finite difference of alpha_series along the direction h,
    Richardson-extrapolated over two step sizes."""

    def alpha_at(t):
        f = FieldState(q.grid, q.coefficients + t * h.coefficients)
        res = alpha_series(f, kappa, window)
        assert res.converged
        return res.value

    def central(e):
        return (alpha_at(e) - alpha_at(-e)) / (2 * e)

    d1, d2 = central(eps), central(eps / 2)
    return (4 * d2 - d1) / 3


class TestGradAlpha:
    def test_zero_field(self):
        grid = Grid(64, 1.0)
        b = grad_alpha(FieldState.zero(grid), 4.0)
        assert b.resolvent_ok
        assert b.dq.l2_norm() == 0.0 and b.dqbar.l2_norm() == 0.0
        assert b.gamma.l2_norm() == 0.0

    def test_guard_refusal(self):
        grid = Grid(128, 1.0)
        q = random_band_field(grid, 30, seed=1, mass=60.0)
        b = grad_alpha(q, 1.0)
        assert not b.resolvent_ok
        with pytest.raises(GuardError):
            gamma_field(q, 1.0)

    def test_linearization_single_mode(self):
        # dqbar at small eps*mode: i*kappa*coth/(2*kappa - i*xi0) * eps
        grid = Grid(128, 1.0)
        kappa = 8.0
        eps = 1e-4
        k0 = 3
        c = np.zeros(grid.modes + 1, dtype=complex)
        c[grid.modes // 2 + k0] = eps
        q = FieldState(grid, c)
        b = grad_alpha(q, kappa)
        xi0 = 2 * math.pi * k0
        from dnlslab.lattice import coth_half

        want = 1j * kappa * coth_half(kappa, 1.0) / (2 * kappa - 1j * xi0) * eps
        got = b.dqbar.coefficients[grid.modes // 2 + k0]
        assert abs(got - want) < 1e-8 * abs(want)
        # dq carries conj(qhat(-m)) / (2 kappa + i m): support at -k0
        want2 = 1j * kappa * coth_half(kappa, 1.0) / (2 * kappa - 1j * xi0) * np.conj(eps)
        got2 = b.dq.coefficients[grid.modes // 2 - k0]
        assert abs(got2 - want2) < 1e-8 * abs(want2)

    @pytest.mark.parametrize("kappa", [8.0, 32.0])
    def test_finite_difference_agreement(self, kappa):
        grid = Grid(256, 1.0)
        q = random_band_field(grid, 20, seed=2, mass=0.8)
        window = window_frequencies(q, kappa)
        b = grad_alpha(q, kappa, window, with_gamma=False)
        assert b.resolvent_ok
        rng = np.random.default_rng(5)
        for trial in range(8):
            hc = np.zeros(grid.modes + 1, dtype=complex)
            band = rng.integers(1, 25)
            ks = rng.integers(-band, band + 1, size=6)
            hc[grid.modes // 2 + ks] = rng.standard_normal(6) + 1j * rng.standard_normal(6)
            h = FieldState(grid, hc)
            fd = fd_derivative(q, kappa, window, h)
            pr = pairing(b, h)
            assert abs(fd - pr) <= 1e-6 * max(1.0, h.l2_norm())


class TestGamma:
    def test_phase_gauge(self):
        grid = Grid(128, 1.0)
        q = random_band_field(grid, 12, seed=3, mass=0.5)
        g1 = gamma_field(q, 8.0)
        g2 = gamma_field(FieldState(grid, q.coefficients * np.exp(0.9j)), 8.0)
        assert (g1 - g2).l2_norm() < 1e-12 * max(g1.l2_norm(), 1e-300)

    def test_gamma_h1_finite(self):
        grid = Grid(128, 1.0)
        q = random_band_field(grid, 12, seed=4, mass=0.5)
        g = gamma_field(q, 8.0)
        assert np.isfinite(sobolev_norm(g, 1.0))


class TestIdentities:
    def test_zero_field(self):
        grid = Grid(64, 1.0)
        r1, r2, r3 = identity_residuals(FieldState.zero(grid), 4.0)
        assert r1 == 0.0 and r2 == 0.0 and r3 == 0.0

    def test_residuals_small(self):
        grid = Grid(1024, 1.0)
        q = random_band_field(grid, 40, seed=5, mass=1.0)
        kappa = 16.0
        r1, r2, r3 = identity_residuals(q, kappa)
        bound = 1e-7 * (1.0 + q.l2_norm() ** 3)
        assert r1 < bound and r2 < bound and r3 < bound

    def test_residuals_quarter_on_grid_doubling(self):
        kappa = 128.0  # window grid-capped at both resolutions
        res = {}
        for n in (1024, 2048):
            grid = Grid(n, 1.0)
            q = random_band_field(grid, 40, seed=6, mass=1.0)
            res[n] = identity_residuals(q, kappa)
        for a, b in zip(res[2048], res[1024]):
            assert a <= 0.25 * b + 1e-14

    def test_gamma_mean_derivative_vanishes(self):
        # integral of gamma' over the torus
        from dnlslab.spectral import derivative, integral

        grid = Grid(256, 1.0)
        q = random_band_field(grid, 20, seed=7, mass=0.8)
        g = gamma_field(q, 16.0)
        assert abs(integral(derivative(g))) < 1e-13


class TestFVectorField:
    def test_zero(self):
        grid = Grid(64, 1.0)
        assert f_vector_field(FieldState.zero(grid), 8.0).l2_norm() == 0.0

    def test_linear_part_symbol(self):
        grid = Grid(256, 1.0)
        kappa = 16.0
        k0 = 5
        xi0 = 2 * math.pi * k0
        for eps in (1e-4, 1e-5):
            c = np.zeros(grid.modes + 1, dtype=complex)
            c[grid.modes // 2 + k0] = eps
            q = FieldState(grid, c)
            F = f_vector_field(q, kappa)
            got = F.coefficients[grid.modes // 2 + k0] / eps
            want = f_linear_symbol(kappa)(xi0)
            assert abs(got - want) < 1e-8 + 10 * eps**2

    def test_cubic_extraction_matches_closed_form(self):
        grid = Grid(256, 1.0)
        kappa = 8.0
        q = random_band_field(grid, 15, seed=8, mass=1.0)
        f3 = f_cubic(q, kappa)
        lin = apply_multiplier(q, f_linear_symbol(kappa))

        def f_at(eps):
            qe = FieldState(grid, eps * q.coefficients)
            return f_vector_field(qe, kappa)

        outs = []
        for eps in (0.02, 0.01):
            F = f_at(eps)
            cub = (F.coefficients - eps * lin.coefficients) / eps**3
            outs.append(cub)
        extrap = (4 * outs[1] - outs[0]) / 3  # kill the eps^2 (quintic) term
        err = np.linalg.norm(extrap - f3.coefficients)
        assert err < 1e-6 * max(1.0, np.linalg.norm(f3.coefficients))

    def test_cubic_decays_with_kappa(self):
        grid = Grid(256, 1.0)
        q = random_band_field(grid, 15, seed=9, mass=1.0)
        norms = [sobolev_norm(f_cubic(q, k), -3.0) for k in (8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0)]
        assert all(a > b for a, b in zip(norms, norms[1:]))
