import math

import numpy as np
import pytest

from conftest import gaussian_field, random_band_field
from dnlslab.errors import InputError, SingularSymbolError
from dnlslab.spectral import (
    FieldState,
    Grid,
    apply_multiplier,
    derivative,
    frequency_restrict,
    half_resolvent_symbol,
    inner,
    integral,
    littlewood_paley,
    make_field,
    occupied_radius,
    product,
    read_snapshot,
    sobolev_norm,
    write_snapshot,
)


def naive_dft(grid: Grid, samples: np.ndarray) -> np.ndarray:
    """O(N^2) trapezoid quadrature of the forward transform at each
    canonical frequency, with the split-Nyquist convention."""
    L, n = grid.period, grid.modes
    x = grid.points
    out = np.empty(n + 1, dtype=complex)
    for i, xi in enumerate(grid.frequencies):
        out[i] = np.sum(samples * np.exp(-1j * xi * x)) * (np.sqrt(L) / n)
    out[0] *= 0.5
    out[n] *= 0.5
    return out


class TestTransform:
    @pytest.mark.parametrize("n", [32, 128, 512, 4096])
    def test_round_trip(self, n):
        grid = Grid(n, 1.0)
        q = random_band_field(grid, n // 3, seed=n)
        back = grid.to_coefficients(grid.to_samples(q.coefficients))
        err = np.max(np.abs(back - q.coefficients)) / np.max(np.abs(q.coefficients))
        assert err < 1e-13

    def test_zero_field(self, grid64):
        q = make_field(grid64, lambda x: np.zeros_like(x, dtype=complex))
        assert q.l2_norm() == 0.0

    def test_pure_mode(self):
        grid = Grid(64, 1.0)
        q = make_field(grid, lambda x: np.exp(2j * np.pi * x))
        c = q.coefficients.copy()
        idx = np.argmin(np.abs(grid.frequencies - 2 * np.pi))
        assert abs(c[idx] - 1.0) < 1e-13
        c[idx] = 0.0
        assert np.max(np.abs(c)) < 1e-13

    def test_gaussian_matches_naive_dft(self):
        grid = Grid(64, 1.0)
        q = make_field(grid, lambda x: np.exp(-40.0 * (x - 0.5) ** 2))
        want = naive_dft(grid, q.samples)
        assert np.max(np.abs(q.coefficients - want)) < 1e-12

    def test_plancherel(self):
        for L in (1.0, 64.0):
            grid = Grid(256, L)
            q = random_band_field(grid, 60, seed=7)
            phys = np.sum(np.abs(q.samples) ** 2) * (L / grid.modes)
            assert abs(phys - q.mass()) < 1e-12 * q.mass()

    def test_non_finite_sampler_rejected(self, grid64):
        with pytest.raises(InputError):
            make_field(grid64, lambda x: np.where(x > 0.5, np.inf, 1.0))


class TestMultipliers:
    def test_identity(self, grid64):
        q = random_band_field(grid64, 20, seed=1)
        out = apply_multiplier(q, lambda xi: np.ones_like(xi, dtype=complex))
        assert np.allclose(out.coefficients, q.coefficients, rtol=0, atol=0)

    def test_branch_value_at_zero(self, grid64):
        q = FieldState.zero(grid64).coefficients.copy()
        q[grid64.modes // 2] = 1.0
        f = FieldState(grid64, q)
        out = apply_multiplier(f, half_resolvent_symbol(4.0, -1))
        assert abs(out.coefficients[grid64.modes // 2] - 0.5) < 1e-15

    def test_branch_conjugation(self, grid64):
        xi = grid64.frequencies
        for kappa in [2.0**j for j in range(0, 11)]:
            minus = half_resolvent_symbol(kappa, -1)(xi)
            plus = half_resolvent_symbol(kappa, +1)(xi)
            assert np.max(np.abs(np.conj(minus) - plus)) == 0.0

    def test_product_of_conjugate_branches(self, grid64):
        xi = grid64.frequencies
        kappa = 3.0
        prod = half_resolvent_symbol(kappa, +1)(xi) * half_resolvent_symbol(kappa, -1)(xi)
        assert np.max(np.abs(prod - 1.0 / np.sqrt(kappa**2 + xi**2))) < 1e-15

    def test_composition(self, grid64):
        q = random_band_field(grid64, 20, seed=2)
        m1 = lambda xi: 1.0 / (2.0 + 1j * xi)
        m2 = lambda xi: (1j * xi) ** 2
        a = apply_multiplier(apply_multiplier(q, m1), m2)
        b = apply_multiplier(q, lambda xi: m1(xi) * m2(xi))
        # float multiplication is not associative; agreement is to the ulp
        assert np.allclose(a.coefficients, b.coefficients, rtol=1e-14, atol=0)

    def test_singular_symbol_rejected(self, grid64):
        with pytest.raises(SingularSymbolError):
            apply_multiplier(random_band_field(grid64, 5, seed=3), lambda xi: 1.0 / xi)


class TestLittlewoodPaley:
    def test_zero_field(self, grid64):
        pieces = littlewood_paley(FieldState.zero(grid64))
        assert all(p.l2_norm() == 0.0 for _, p in pieces)

    def test_resolution_of_identity(self, grid256):
        q = random_band_field(grid256, 100, seed=5)
        total = sum((p.coefficients for _, p in littlewood_paley(q)), np.zeros(257, complex))
        assert np.max(np.abs(total - q.coefficients)) < 1e-13

    def test_single_mode_two_bands(self):
        grid = Grid(256, 1.0)
        c = np.zeros(257, dtype=complex)
        idx = np.argmin(np.abs(grid.frequencies - 2 * np.pi * 10))  # |xi| ~ 62.8
        c[idx] = 1.0
        q = FieldState(grid, c)
        live = [(n, p) for n, p in littlewood_paley(q) if p.l2_norm() > 1e-14]
        assert len(live) <= 2
        ns = [n for n, _ in live]
        assert ns == sorted(ns) and (len(ns) == 1 or ns[1] == 2 * ns[0])
        total = sum((p.coefficients for _, p in live), np.zeros(257, complex))
        assert np.max(np.abs(total - q.coefficients)) < 1e-14

    def test_square_function_comparable(self, grid256):
        q = random_band_field(grid256, 120, seed=6)
        sq = sum(p.mass() for _, p in littlewood_paley(q))
        # pointwise sum of the window squares lies in [1/2, 1]
        assert q.mass() * 0.499 <= sq <= 1.001 * q.mass()


class TestNormsAndRestriction:
    def test_sobolev_s0_is_l2(self, grid64):
        q = random_band_field(grid64, 20, seed=8)
        assert abs(sobolev_norm(q, 0.0) - q.l2_norm()) < 1e-14

    def test_sobolev_single_mode(self):
        grid = Grid(64, 1.0)
        c = np.zeros(65, dtype=complex)
        c[np.argmin(np.abs(grid.frequencies - 2 * np.pi))] = 1.0
        assert abs(sobolev_norm(FieldState(grid, c), 1.0) - math.sqrt(1 + 4 * math.pi**2)) < 1e-14

    def test_sobolev_direct_sum_oracle(self, grid256):
        q = random_band_field(grid256, 100, seed=9)
        xi = grid256.frequencies
        want = math.sqrt(sum((1 + x**2) ** (1 / 6.0) * abs(c) ** 2 for x, c in zip(xi, q.coefficients)))
        assert abs(sobolev_norm(q, 1 / 6.0) - want) < 1e-12 * want

    def test_restrict_above_everything(self, grid64):
        q = random_band_field(grid64, 20, seed=10)
        out = frequency_restrict(q, 10 * grid64.max_frequency, "above")
        assert out.l2_norm() == 0.0

    def test_restrict_complementary(self, grid64):
        q = random_band_field(grid64, 20, seed=11)
        cut = 7 * grid64.spacing
        hi = frequency_restrict(q, cut, "above")
        lo = frequency_restrict(q, cut, "below")
        assert np.array_equal(hi.coefficients + lo.coefficients, q.coefficients)
        assert abs(hi.mass() + lo.mass() - q.mass()) < 1e-12 * q.mass()


class TestProducts:
    def test_cubic_product_exact(self):
        grid = Grid(64, 1.0)
        q = random_band_field(grid, 10, seed=12)
        cubic = product(q, q.conjugate(), q)
        # brute-force triple convolution over coefficients
        n = grid.modes
        ks = np.arange(-n // 2, n // 2 + 1)
        c = {k: v for k, v in zip(ks, q.coefficients)}
        cb = {k: np.conj(c.get(-k, 0.0)) for k in ks}
        want = np.zeros(n + 1, dtype=complex)
        span = [k for k in ks if abs(c.get(k, 0.0)) > 0 or True]
        for i, k in enumerate(ks):
            acc = 0.0j
            for k1 in range(-10, 11):
                for k2 in range(-20, 21):
                    k3 = k - k1 - k2
                    if abs(k3) <= 10:
                        acc += c.get(k1, 0.0) * cb.get(k2, 0.0) * c.get(k3, 0.0)
            want[i] = acc / grid.period  # convolution weight 1/sqrt(L) per product
        assert np.max(np.abs(cubic.coefficients - want)) < 1e-12 * np.max(np.abs(want))

    def test_integral_inner(self):
        grid = Grid(128, 2.0)
        q = gaussian_field(grid, 0.2, 1.5)
        got = integral(FieldState(grid, np.abs(q.coefficients) ** 2 * 0 + q.coefficients))
        # integral of q equals sqrt(L) qhat(0)
        direct = np.sum(q.samples) * grid.period / grid.modes
        assert abs(got - direct) < 1e-12
        assert abs(inner(q, q) - q.mass()) < 1e-12

    def test_phase_invariant_mass(self, grid64):
        q = random_band_field(grid64, 15, seed=13)
        rot = FieldState(grid64, q.coefficients * np.exp(0.7j))
        assert abs(rot.mass() - q.mass()) < 1e-14


class TestSnapshot:
    def test_round_trip(self, tmp_path):
        grid = Grid(128, 64.0)
        q = gaussian_field(grid, 3.0, 2.0)
        p = tmp_path / "field.dnls"
        write_snapshot(p, q)
        back = read_snapshot(p)
        assert back.grid == q.grid
        assert np.array_equal(back.coefficients, q.coefficients)

    def test_occupied_radius(self, grid64):
        q = random_band_field(grid64, 5, seed=14)
        assert occupied_radius(q) <= 5 * grid64.spacing + 1e-9
