"""Functional derivatives of the trace series and the flow vector field.

The gradient of alpha(kappa; q) with respect to the field is assembled
from the sectioned resolvent R = (1 - i kappa Lambda Gamma)^{-1}: one
linear solve replaces the whole power series, exactly on the section.
Coefficients are read off by summing kernel off-diagonals (the sum of
entries K(xi+m, xi) is the coefficient at frequency m).

Raw section gradients inherit the harmonic window-truncation of the
section traces, so the linear and cubic terms are replaced by their exact
full-lattice closed forms: the linear term through the pair sums, the
cubic term through the transported-paraproduct formulas plus the
degenerate-chain csch^2 correction of :func:`dnlslab.operators.trace_quartic`.
What remains sectioned are the quintic and higher chains, whose window
tails sit several orders below every tolerance used in the tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import GuardError
from .lattice import chain_sum_closed, coth_half, csch2_half, pair_sum_windowed, tanh_half
from .operators import (
    build_gamma,
    build_lambda,
    op_norm,
    resolvent_pair_sum,
    window_frequencies,
)
from .spectral import (
    FieldState,
    Grid,
    apply_multiplier,
    derivative,
    product,
    resolvent2_symbol,
)

_FINE_CACHE = {}


def _triple_product_coeffs(grid, a, b, c):
    """Alias-free coefficient array of the pointwise product of three
    coefficient arrays on the given grid (padded transform, no FieldState
    plumbing; used on the hot flow path)."""
    key = (grid.modes, grid.period)
    fine = _FINE_CACHE.get(key)
    if fine is None:
        fine = Grid(2 * grid.modes, grid.period)
        _FINE_CACHE[key] = fine
    n, m = grid.modes, fine.modes
    lo = m // 2 - n // 2
    out = None
    prod = None
    for arr in (a, b, c):
        cf = np.zeros(m + 1, dtype=complex)
        cf[lo : lo + n + 1] = arr
        s = fine.to_samples(cf)
        prod = s if prod is None else prod * s
    return fine.to_coefficients(prod)[lo : lo + n + 1]


@dataclass
class GradientBundle:
    kappa: float
    dq: FieldState          # delta alpha / delta q
    dqbar: FieldState       # delta alpha / delta qbar
    gamma: FieldState
    resolvent_ok: bool
    guard: float
    window: np.ndarray


def _offdiag_sums(mat: np.ndarray) -> np.ndarray:
    """out[s + (w-1)] = sum_i mat[i+s, i] for s in -(w-1)..(w-1)."""
    w = mat.shape[0]
    idx = (np.arange(w)[:, None] - np.arange(w)[None, :]).ravel() + (w - 1)
    re = np.bincount(idx, weights=mat.real.ravel(), minlength=2 * w - 1)
    im = np.bincount(idx, weights=mat.imag.ravel(), minlength=2 * w - 1)
    return re + 1j * im


def dqbar_field_part(sums: np.ndarray, grid, window: np.ndarray) -> np.ndarray:
    """Place off-diagonal sums (per lattice offset) into grid coefficients."""
    w = (sums.size + 1) // 2
    n = grid.modes
    coeffs = np.zeros(n + 1, dtype=complex)
    k = min(w - 1, n // 2)
    coeffs[n // 2 - k : n // 2 + k + 1] = sums[w - 1 - k : w + k]
    return coeffs


def _sums_to_field(sums: np.ndarray, grid, window: np.ndarray) -> FieldState:
    return FieldState(grid, dqbar_field_part(sums, grid, window))


def _chain3_values(a: np.ndarray, b: float, kappa: float, period: float) -> np.ndarray:
    """sum_z 1/((kappa - i z)(kappa + i(z - a))(kappa - i(z - b))) for lattice
    shifts; vectorized over a, scalar b, with the degenerate b=0 handled
    through the general machinery."""
    a = np.asarray(a, dtype=float)
    coth = coth_half(kappa, period)
    if b == 0.0:
        out = np.empty(a.shape, dtype=complex)
        for i, av in enumerate(a):
            out[i] = chain_sum_closed([0.0, -av, 0.0], [+1, -1, +1], kappa, period)
        return out
    c1 = 1.0 / (b * (a + 2j * kappa))
    c2 = 1.0 / ((a + 2j * kappa) * (a - b + 2j * kappa))
    c3 = 1.0 / (b * (b - a - 2j * kappa))
    return 0.5 * period * coth * (c1 - c2 + c3)


def _gamma_cubic_closed(q: FieldState, kappa: float) -> FieldState:
    """Exact full-lattice quadratic-in-q term of gamma."""
    grid = q.grid
    n = grid.modes
    h = grid.spacing
    kc = q.coefficients / math.sqrt(grid.period)
    live = np.abs(kc) > 1e-16 * max(np.max(np.abs(kc)), 1e-300)
    ks = np.arange(-(n // 2), n // 2 + 1)[live]
    kcl = kc[live]
    kg = {int(-k): np.conj(v) for k, v in zip(ks, kcl)}  # kg(m) = conj(kc(-m))
    coeffs = np.zeros(n + 1, dtype=complex)
    offsets = sorted({int(k1) + m2 for k1 in ks for m2 in kg})
    for m in offsets:
        if abs(m) > n // 2:
            continue
        m2 = np.array([m - int(k1) for k1 in ks])
        wgt = np.array([kg.get(int(v), 0.0) for v in m2])
        sel = wgt != 0.0
        if not np.any(sel):
            continue
        a = ks[sel] * h
        w = kcl[sel] * wgt[sel]
        # part one: chains (kappa-d)^{-1} q (kappa+d)^{-1} qbar (kappa-d)^{-1}
        c3a = _chain3_values(a, m * h, kappa, grid.period)
        # part two: sign-mirrored chain, the conjugate at reflected shifts
        c3b = np.conj(_chain3_values(m * h - a, m * h, kappa, grid.period))
        coeffs[n // 2 + m] = 1j * kappa / math.sqrt(grid.period) * np.sum(w * (c3a + c3b))
    return FieldState(grid, coeffs)


def grad_alpha(
    q: FieldState,
    kappa: float,
    window: np.ndarray = None,
    with_gamma: bool = True,
    check_guard: bool = True,
) -> GradientBundle:
    """Gradient fields of the trace series at fixed kappa.

    Returns a not-ok bundle when the guard sqrt(kappa)||Lambda||_op < 1/2
    fails; ``check_guard=False`` skips that spectral-norm computation for
    callers that enforce the guard once per time step.  Postcondition
    (tested): directional finite differences of alpha_series match the
    pairing of (dq, dqbar) against the direction.
    """
    if window is None:
        window = window_frequencies(q, kappa)
    grid = q.grid
    lam = build_lambda(q, kappa, window)
    guard = math.sqrt(kappa) * op_norm(lam) if check_guard else 0.0
    if guard >= 0.5:
        return GradientBundle(kappa, None, None, None, False, guard, window)
    gam = build_gamma(q, kappa, window)
    a_mat = 1j * kappa * (lam.entries @ gam.entries)
    w = a_mat.shape[0]
    lu = lu_factor(np.eye(w) - a_mat, check_finite=False)
    r_lam = lu_solve(lu, lam.entries, check_finite=False)          # R Lambda
    gam_r = lu_solve(lu, gam.entries.T, trans=1, check_finite=False).T  # Gamma R
    a_lam = a_mat @ lam.entries
    gam_a = gam.entries @ a_mat

    dmh = 1.0 / np.sqrt(kappa - 1j * window)  # half-power weights
    dph = 1.0 / np.sqrt(kappa + 1j * window)
    pref = 1j * kappa / math.sqrt(grid.period)
    coth = coth_half(kappa, grid.period)
    csch2 = csch2_half(kappa, grid.period)
    psum = resolvent_pair_sum(q, kappa)

    def weighted(mat):
        return dmh[:, None] * mat * dph[None, :]

    # delta alpha / delta qbar: extraction minus its linear+cubic section
    # terms, plus the exact closed forms of those orders
    dqbar_sec = pref * (
        _offdiag_sums(weighted(r_lam))
        - _offdiag_sums(weighted(lam.entries))
        - _offdiag_sums(weighted(a_lam))
    )
    xi = grid.frequencies
    r2m_v = 1.0 / (2.0 * kappa - 1j * xi)
    r2p_v = 1.0 / (2.0 * kappa + 1j * xi)
    qc = q.coefficients
    qbc = np.conj(qc[::-1])
    lin_m = r2m_v * qc
    cub_m = r2m_v * _triple_product_coeffs(grid, qc, lin_m, r2p_v * qbc)
    dqbar = FieldState(
        grid,
        dqbar_field_part(dqbar_sec, grid, window)
        + 1j * kappa * coth * lin_m
        - 2.0 * kappa**2 * coth * cub_m
        - 0.5 * kappa**2 * csch2 * psum * lin_m,
    )

    def weighted2(mat):
        return dph[:, None] * mat * dmh[None, :]

    dq_sec = pref * (
        _offdiag_sums(weighted2(gam_r))
        - _offdiag_sums(weighted2(gam.entries))
        - _offdiag_sums(weighted2(gam_a))
    )
    lin_p = r2p_v * qbc
    cub_p_raw = r2p_v * _triple_product_coeffs(grid, qc, r2p_v * qc, r2m_v * qbc)
    cub_p = np.conj(cub_p_raw[::-1])
    dq = FieldState(
        grid,
        dqbar_field_part(dq_sec, grid, window)
        + 1j * kappa * coth * lin_p
        - 2.0 * kappa**2 * coth * cub_p
        - 0.5 * kappa**2 * csch2 * psum * lin_p,
    )

    gamma = None
    if with_gamma:
        r_minus = 1j * kappa * (r_lam @ gam.entries)  # R - 1 = i kappa R Lambda Gamma
        p1 = dmh[:, None] * r_minus * dmh[None, :]
        p1_l1 = dmh[:, None] * a_mat * dmh[None, :]
        grl = gam_r @ lam.entries
        p2 = 1j * kappa * (dph[:, None] * grl * dph[None, :])
        p2_l1 = 1j * kappa * (dph[:, None] * (gam.entries @ lam.entries) * dph[None, :])
        gam_sec = (_offdiag_sums(p1) - _offdiag_sums(p1_l1) + _offdiag_sums(p2) - _offdiag_sums(p2_l1)) / math.sqrt(grid.period)
        gamma = _sums_to_field(gam_sec, grid, window)
        gamma = gamma + _gamma_cubic_closed(q, kappa)

    return GradientBundle(kappa, dq, dqbar, gamma, True, guard, window)


def gamma_field(q: FieldState, kappa: float, window: np.ndarray = None) -> FieldState:
    bundle = grad_alpha(q, kappa, window, with_gamma=True)
    if not bundle.resolvent_ok:
        raise GuardError("resolvent guard failed", kappa=kappa, guard_value=bundle.guard)
    return bundle.gamma


def pairing(bundle: GradientBundle, direction: FieldState) -> complex:
    """Real directional derivative D alpha(q)[h] from the gradient fields.

    d alpha = integral (dq * h + dqbar * conj(h)) dx; the result is the
    real-linear derivative of Re+Im alpha along h as a real perturbation.
    """
    h = direction.coefficients
    dq = bundle.dq.coefficients
    dqb = bundle.dqbar.coefficients
    return complex(np.sum(dq[::-1] * h) + np.sum(dqb * np.conj(h)))


def identity_residuals(q: FieldState, kappa: float, window: np.ndarray = None):
    """L2 norms of the three differential identities linking the gradient
    fields and gamma; zero in exact arithmetic on the full lattice."""
    bundle = grad_alpha(q, kappa, window, with_gamma=True)
    if not bundle.resolvent_ok:
        raise GuardError("resolvent guard failed", kappa=kappa, guard_value=bundle.guard)
    # on the lattice the additive constant of the identities is coth(kappa L/2),
    # which degenerates to the familiar 1 in the large-box regime
    one = FieldState(q.grid, coth_half(kappa, q.grid.period) * _one_coeffs(q.grid))
    gp1 = bundle.gamma + one
    r1 = (
        derivative(bundle.dqbar)
        - 2.0 * kappa * bundle.dqbar
        + 1j * kappa * product(q, gp1)
    ).l2_norm()
    r2 = (
        derivative(bundle.dq)
        + 2.0 * kappa * bundle.dq
        - 1j * kappa * product(q.conjugate(), gp1)
    ).l2_norm()
    r3 = (
        derivative(bundle.gamma)
        - 2.0 * product(q.conjugate(), bundle.dqbar)
        + 2.0 * product(q, bundle.dq)
    ).l2_norm()
    return r1, r2, r3


def _one_coeffs(grid):
    c = np.zeros(grid.modes + 1, dtype=complex)
    c[grid.modes // 2] = math.sqrt(grid.period)
    return c


def f_vector_field(
    q: FieldState, kappa: float, window: np.ndarray = None, bundle: GradientBundle = None
) -> FieldState:
    """F = i q' - |q|^2 q - 2 kappa (dA/dqbar + conj(dA/dq)) with the
    geometry-normalized series A = tanh(kappa L/2) alpha."""
    if bundle is None:
        bundle = grad_alpha(q, kappa, window, with_gamma=False)
    if not bundle.resolvent_ok:
        raise GuardError("resolvent guard failed", kappa=kappa, guard_value=bundle.guard)
    t = tanh_half(kappa, q.grid.period)
    v = FieldState(
        q.grid,
        t * (bundle.dqbar.coefficients + bundle.dq.conjugate().coefficients),
    )
    cubic = product(q, q.conjugate(), q)
    return FieldState(
        q.grid,
        derivative(q).coefficients * 1j - cubic.coefficients - 2.0 * kappa * v.coefficients,
    )


def f_linear_symbol(kappa: float):
    """Multiplier of the linear part of F: -i (i xi)^3 / (4 kappa^2 + xi^2),
    i.e. -xi^3 / (4 kappa^2 + xi^2)."""
    return lambda xi: -(xi**3) / (4.0 * kappa**2 + xi**2) + 0j


def f_cubic(q: FieldState, kappa: float) -> FieldState:
    """Closed form of the cubic part of F.

    Six transported-paraproduct terms (exact on the line) plus the
    lattice degenerate-chain correction, which carries the tanh*csch^2
    factor and disappears on large boxes.
    """
    r2m = resolvent2_symbol(kappa, -1)
    r2p = resolvent2_symbol(kappa, +1)
    qb = q.conjugate()
    vm, vp = apply_multiplier(q, r2m), apply_multiplier(q, r2p)
    um, up = apply_multiplier(qb, r2m), apply_multiplier(qb, r2p)
    t1 = apply_multiplier(
        product(q, vm, up), lambda xi: 2.0 * kappa**2 * 1j * xi * r2m(xi)
    )
    t2 = apply_multiplier(
        product(q, vp, um), lambda xi: -2.0 * kappa**2 * 1j * xi * r2p(xi)
    )
    dd = lambda xi: -(xi**2) / (4.0 * kappa**2 + xi**2)  # d^2 (4k^2 - d^2)^{-1}
    t3 = product(q, q, apply_multiplier(qb, dd))
    t4 = product(q, qb, apply_multiplier(q, dd))
    dvm = apply_multiplier(q, lambda xi: 1j * xi * r2m(xi))
    dvp = apply_multiplier(q, lambda xi: 1j * xi * r2p(xi))
    dum = apply_multiplier(qb, lambda xi: 1j * xi * r2m(xi))
    dup = apply_multiplier(qb, lambda xi: 1j * xi * r2p(xi))
    t5 = -0.5 * product(q, dvm, dup)
    t6 = -0.5 * product(q, dvp, dum)
    total = t1 + t2 + t3 + t4 + t5 + t6
    # lattice correction from repeated-pole chains
    tc = tanh_half(kappa, q.grid.period) * csch2_half(kappa, q.grid.period)
    if tc != 0.0:
        psum = resolvent_pair_sum(q, kappa)
        corr = kappa**3 * tc * (psum * vm.coefficients + np.conj(psum) * vp.coefficients)
        total = FieldState(q.grid, total.coefficients + corr)
    return total
