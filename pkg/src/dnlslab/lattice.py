"""Resolvent sums over the dual lattice of a periodic grid.

Everything here evaluates sums of the form

    sum over zeta in (2*pi/L)*Z  of  prod_j 1/(kappa - s_j*i*(zeta + a_j))

which are the diagonal sums behind operator traces and functional
gradients.  Two independent routes are provided:

* closed forms obtained from the partial-fraction expansion of the
  cotangent (``chain_sum_closed``, ``pair_sum_closed``), exact for
  lattice shifts ``a_j``;
* a generic direct-summation route with Euler-Maclaurin tail completion
  (``lattice_sum_em``), which never touches the cotangent identity and
  therefore serves as an independent cross-check.

All sums converge absolutely for chains of length >= 2; single
resolvents appear only in principal-value combinations.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np


def coth_half(kappa: float, period: float) -> float:
    """coth(kappa*L/2) = (1+e^{-kappa L})/(1-e^{-kappa L}), stable for all kappa>0."""
    x = kappa * period
    if x > 40.0:
        return 1.0
    e = math.exp(-x)
    return (1.0 + e) / (1.0 - e)


def tanh_half(kappa: float, period: float) -> float:
    """tanh(kappa*L/2); the reciprocal of :func:`coth_half`."""
    return math.tanh(0.5 * kappa * period)


def csch2_half(kappa: float, period: float) -> float:
    """csch(kappa*L/2)^2 = 4 e^{-kappa L}/(1-e^{-kappa L})^2, stable for all kappa>0.

    Carries the degenerate-chain (repeated-pole) contributions of quartic
    lattice sums; exponentially negligible once kappa*L is large, which is
    why the large-box formulas carry no such term.
    """
    x = kappa * period
    if x > 700.0:
        return 0.0
    e = math.exp(-x)
    return 4.0 * e / (1.0 - e) ** 2


def _cot(z: complex) -> complex:
    """cot(z) stable for large |Im z| (reduces to the half-plane Im z >= 0)."""
    if z.imag < 0.0:
        return -_cot(-z)
    w = np.exp(2j * z)  # |w| <= 1 here
    return 1j * (w + 1.0) / (w - 1.0)


@lru_cache(maxsize=16)
def _cot_derivative_polys(order: int):
    """Coefficient lists of d^k/du^k cot(u) as polynomials in c = cot(u)."""
    polys = [[0.0, 1.0]]  # cot itself: c
    for _ in range(order):
        prev = polys[-1]
        # d/du P(c) = P'(c) * (-1 - c^2)
        dp = [prev[i] * i for i in range(1, len(prev))]
        nxt = [0.0] * (len(dp) + 2)
        for i, a in enumerate(dp):
            nxt[i] -= a
            nxt[i + 2] -= a
        polys.append(nxt)
    return [tuple(p) for p in polys]


def _pv_power_sum(p: complex, r: int, period: float) -> complex:
    """P.V. sum over the lattice of 1/(zeta - p)^r.

    For r = 1 this is the symmetric principal value -(L/2) cot(L p / 2);
    higher r follow by differentiation in p.
    """
    L = period
    c = _cot(0.5 * L * p)
    if r == 1:
        return -0.5 * L * c
    # V_r(p) = V_1^{(r-1)}(p) / (r-1)!;  d/dp acts as (L/2) d/du on cot(u)
    poly = _cot_derivative_polys(r - 1)[r - 1]
    dcot = sum(a * c**i for i, a in enumerate(poly))
    return -0.5 * L * (0.5 * L) ** (r - 1) * dcot / math.factorial(r - 1)


def chain_sum_closed(shifts, signs, kappa: float, period: float) -> complex:
    """Exact lattice sum of prod_j 1/(kappa - s_j*i*(zeta + a_j)).

    ``shifts`` must lie on the dual lattice (2*pi/period)*Z.  Chains of
    length one are returned as the symmetric principal value.  Repeated
    poles (same sign and shift) are handled through the derivative
    expansion of the cotangent.
    """
    shifts = [float(a) for a in shifts]
    signs = [int(s) for s in signs]
    if len(shifts) != len(signs) or not shifts:
        raise ValueError("shifts and signs must be equal-length, non-empty")
    h = 2.0 * math.pi / period
    poles = {}
    for a, s in zip(shifts, signs):
        key = (s, round(a / h))
        poles[key] = poles.get(key, 0) + 1
    prefactor = 1.0 + 0.0j
    for s in signs:
        prefactor *= s * 1j
    plist = [(-k * h - 1j * s * kappa, m) for (s, k), m in poles.items()]
    total = 0.0j
    for g, (pg, mg) in enumerate(plist):
        others = [(pk, mk) for j, (pk, mk) in enumerate(plist) if j != g]
        # derivatives of prod_k (zeta - p_k)^{-m_k} at zeta = p_g via the
        # logarithmic-derivative recursion
        nder = mg - 1
        gval = [np.prod([(pg - pk) ** (-mk) for pk, mk in others]) if others else 1.0 + 0.0j]
        if others:
            u = [
                -sum(mk * (-1.0) ** i * math.factorial(i) / (pg - pk) ** (i + 1) for pk, mk in others)
                for i in range(nder)
            ]
        else:
            u = [0.0j] * nder
        for n in range(nder):
            gval.append(sum(math.comb(n, i) * u[i] * gval[n - i] for i in range(n + 1)))
        for r in range(1, mg + 1):
            c_gr = gval[mg - r] / math.factorial(mg - r)
            total += c_gr * _pv_power_sum(pg, r, period)
    return complex(prefactor * total)


def pair_sum_closed(m, kappa: float, period: float):
    """Closed form of sum_eta 1/((kappa - i(eta+m)) (kappa + i eta)).

    Equals period * coth(kappa*period/2) / (2*kappa - i*m); ``m`` may be
    an array of lattice frequencies.
    """
    m = np.asarray(m, dtype=float)
    return period * coth_half(kappa, period) / (2.0 * kappa - 1j * m)


def pair_sum_windowed(m, window, kappa: float):
    """Windowed pair sums T_W(m) = sum_{eta, eta+m in W} of the pair resolvent.

    ``window`` is the ascending array of retained lattice frequencies and
    ``m`` an array of lattice offsets.  Vectorized over both.
    """
    m = np.atleast_1d(np.asarray(m, dtype=float))
    eta = np.asarray(window, dtype=float)
    lo, hi = eta[0], eta[-1]
    shifted = eta[None, :] + m[:, None]
    mask = (shifted >= lo - 1e-9) & (shifted <= hi + 1e-9)
    vals = 1.0 / ((kappa - 1j * shifted) * (kappa + 1j * eta[None, :]))
    return np.sum(np.where(mask, vals, 0.0), axis=1)


@lru_cache(maxsize=8)
def _leggauss(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def _gl_integral(g, a: float, b: float, n: int = 64):
    x, w = _leggauss(n)
    xm = 0.5 * (b + a) + 0.5 * (b - a) * x
    return 0.5 * (b - a) * np.sum(w * g(xm))


def _integral_to_infinity(g, a: float, n: int = 64):
    """integral_a^infty g, for g decaying at least like x^-2."""
    b = 8.0 * a
    head = _gl_integral(g, a, b, n)
    # map x = b/t, t in (0,1]
    x, w = _leggauss(n)
    t = 0.5 * (x + 1.0)
    tail = 0.5 * np.sum(w * g(b / t) * b / t**2)
    return head + tail


def em_tail(g, x0: float, h: float, n: int = 64):
    """sum_{k>=1} g(x0 + k*h) by Euler-Maclaurin with endpoint corrections.

    Requires x0 >> h so the correction series is asymptotic; g must be a
    vectorized callable decaying at least like x^-2.
    """
    integral = _integral_to_infinity(g, x0, n)
    d = 0.25 * h
    pts = g(np.array([x0 - 2 * d, x0 - d, x0, x0 + d, x0 + 2 * d]))
    g0 = pts[2]
    g1 = (-pts[4] + 8 * pts[3] - 8 * pts[1] + pts[0]) / (12 * d)
    g3 = (pts[4] - 2 * pts[3] + 2 * pts[1] - pts[0]) / (2 * d**3)
    return integral / h - 0.5 * g0 - (h / 12.0) * g1 + (h**3 / 720.0) * g3


def lattice_sum_em(g, h: float, inner_radius: float, n: int = 64):
    """Full-lattice sum of g by direct summation plus Euler-Maclaurin tails.

    ``inner_radius`` sets the directly summed block; it is snapped to the
    lattice.  g must be vectorized and decay at least like x^-2.
    """
    kmax = max(int(math.ceil(inner_radius / h)), 32)
    ks = np.arange(-kmax, kmax + 1)
    direct = np.sum(g(ks * h))
    right = em_tail(g, kmax * h, h, n)
    left = em_tail(lambda x: g(-x), kmax * h, h, n)
    return direct + right + left


def pair_sum_em(m, kappa: float, period: float, n: int = 64):
    """Independent evaluation of the pair sums of :func:`pair_sum_closed`.

    Direct lattice summation with Euler-Maclaurin completion; used as the
    matrix-route tail and as the oracle for the cotangent closed form.
    """
    m = np.atleast_1d(np.asarray(m, dtype=float))
    h = 2.0 * math.pi / period
    out = np.empty(m.shape, dtype=complex)
    radius = 2.0 * kappa + 2.0 * np.max(np.abs(m)) + 60.0 * h
    for i, mi in enumerate(m):
        def g(eta, mi=mi):
            return 1.0 / ((kappa - 1j * (eta + mi)) * (kappa + 1j * eta))

        out[i] = lattice_sum_em(g, h, radius, n)
    return out


def hs_weight_sums(xi, kappa: float, period: float, n: int = 64):
    """S(xi) = sum_eta (kappa^2+eta^2)^{-1/2} (kappa^2+(eta+xi)^2)^{-1/2}.

    Direct block plus Euler-Maclaurin tails; absolute tail error is far
    below 1e-12 of the value for the radii used here.  Vectorized over xi.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    h = 2.0 * math.pi / period
    radius = 2.0 * kappa + 1.5 * np.max(np.abs(xi)) + 60.0 * h
    kmax = max(int(math.ceil(radius / h)), 32)
    eta = (np.arange(-kmax, kmax + 1) * h)[None, :]
    x = xi[:, None]
    direct = np.sum(
        1.0 / (np.sqrt(kappa**2 + eta**2) * np.sqrt(kappa**2 + (eta + x) ** 2)), axis=1
    )
    out = direct.astype(float)
    for i, xv in enumerate(xi):
        def g(e, xv=xv):
            return 1.0 / (np.sqrt(kappa**2 + e**2) * np.sqrt(kappa**2 + (e + xv) ** 2))

        out[i] += (em_tail(g, kmax * h, h, n) + em_tail(lambda e: g(-e), kmax * h, h, n)).real
    return out
