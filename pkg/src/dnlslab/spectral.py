"""Periodic grid, discrete transform, Fourier multipliers, dyadic analysis.

Conventions (documented once, used everywhere):

* period L, samples x_j = j L / N for j = 0..N-1, N a power of two;
* retained frequencies xi = 2*pi*k/L for k = -N/2..N/2 in ascending
  order (N+1 of them, symmetric about 0);
* forward transform  qhat(xi) = L^{-1/2} * integral_0^L e^{-i xi x} q(x) dx
  evaluated by the trapezoid rule, so Plancherel reads
  ||q||_{L^2}^2 = sum |qhat(xi)|^2 exactly for band-limited data;
* the aliased Nyquist value is split evenly between k = -N/2 and
  k = +N/2, which keeps the frequency set symmetric and the round trip
  exact.  Resolved fields carry no Nyquist mass, so the split never
  matters in practice.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, SingularSymbolError

_SNAPSHOT_MAGIC = b"DNLS"
_SNAPSHOT_VERSION = 1


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with a symmetric retained-frequency set."""

    modes: int
    period: float = 1.0

    def __post_init__(self):
        n = self.modes
        if n < 4 or (n & (n - 1)) != 0:
            raise InputError(f"modes must be a power of two >= 4, got {n}")
        if not (self.period > 0.0 and np.isfinite(self.period)):
            raise InputError(f"period must be positive and finite, got {self.period}")

    @property
    def points(self) -> np.ndarray:
        x = np.arange(self.modes) * (self.period / self.modes)
        x.flags.writeable = False
        return x

    @property
    def frequencies(self) -> np.ndarray:
        n = self.modes
        k = np.arange(-n // 2, n // 2 + 1)
        xi = k * (2.0 * np.pi / self.period)
        xi.flags.writeable = False
        return xi

    @property
    def spacing(self) -> float:
        """Dual-lattice spacing 2*pi/period."""
        return 2.0 * np.pi / self.period

    @property
    def max_frequency(self) -> float:
        return (self.modes // 2) * self.spacing

    def to_coefficients(self, samples: np.ndarray) -> np.ndarray:
        n = self.modes
        f = np.fft.fftshift(np.fft.fft(samples)) * (np.sqrt(self.period) / n)
        out = np.empty(n + 1, dtype=complex)
        out[:n] = f
        out[n] = 0.5 * f[0]  # split the aliased Nyquist pair
        out[0] = 0.5 * f[0]
        return out

    def to_samples(self, coefficients: np.ndarray) -> np.ndarray:
        n = self.modes
        f = np.array(coefficients[:n], dtype=complex)
        f[0] = coefficients[0] + coefficients[n]
        return np.fft.ifft(np.fft.ifftshift(f)) * (n / np.sqrt(self.period))


@dataclass(frozen=True)
class FieldState:
    """Complex field on a Grid with consistent dual representations."""

    grid: Grid
    coefficients: np.ndarray
    samples: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=complex)
        if c.shape != (self.grid.modes + 1,):
            raise InputError(
                f"coefficient array must have length modes+1={self.grid.modes + 1}"
            )
        if not np.all(np.isfinite(c.view(float))):
            raise InputError("non-finite coefficients")
        s = self.samples
        if s is None:
            s = self.grid.to_samples(c)
        else:
            s = np.asarray(s, dtype=complex)
        c.flags.writeable = False
        s.flags.writeable = False
        object.__setattr__(self, "coefficients", c)
        object.__setattr__(self, "samples", s)

    @classmethod
    def from_samples(cls, grid: Grid, samples) -> "FieldState":
        s = np.asarray(samples, dtype=complex)
        if s.shape != (grid.modes,):
            raise InputError(f"sample array must have length modes={grid.modes}")
        if not np.all(np.isfinite(s.view(float))):
            raise InputError("non-finite samples")
        return cls(grid, grid.to_coefficients(s), s)

    @classmethod
    def zero(cls, grid: Grid) -> "FieldState":
        return cls(grid, np.zeros(grid.modes + 1, dtype=complex))

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.coefficients) ** 2)))

    def mass(self) -> float:
        return float(np.sum(np.abs(self.coefficients) ** 2))

    def __add__(self, other: "FieldState") -> "FieldState":
        return FieldState(self.grid, self.coefficients + other.coefficients)

    def __sub__(self, other: "FieldState") -> "FieldState":
        return FieldState(self.grid, self.coefficients - other.coefficients)

    def __mul__(self, scalar) -> "FieldState":
        return FieldState(self.grid, self.coefficients * scalar)

    __rmul__ = __mul__

    def conjugate(self) -> "FieldState":
        """Pointwise complex conjugate; coefficients reverse and conjugate."""
        return FieldState(self.grid, np.conj(self.coefficients[::-1]))


def make_field(grid: Grid, sampler) -> FieldState:
    """Sample a function x -> complex on the grid points."""
    x = grid.points
    try:
        vals = np.asarray(sampler(x), dtype=complex)
        if vals.shape != x.shape:
            raise TypeError
    except TypeError:
        vals = np.array([sampler(xi) for xi in x], dtype=complex)
    if not np.all(np.isfinite(vals.view(float))):
        raise InputError("sampler produced non-finite values")
    return FieldState.from_samples(grid, vals)


def apply_multiplier(q: FieldState, symbol) -> FieldState:
    """Apply a Fourier multiplier given as callable xi -> complex or array."""
    xi = q.grid.frequencies
    vals = symbol(xi) if callable(symbol) else np.asarray(symbol)
    vals = np.asarray(vals, dtype=complex)
    if vals.shape != xi.shape:
        raise SingularSymbolError("symbol array does not match the frequency set")
    if not np.all(np.isfinite(vals.view(float))):
        raise SingularSymbolError("symbol is singular or non-finite at a grid frequency")
    return FieldState(q.grid, vals * q.coefficients)


def half_resolvent_symbol(kappa: float, sign: int):
    """(kappa + sign*i*xi)^{-1/2} on the branch fixed by sqrt(kappa)>0 and continuity.

    For kappa > 0 the argument stays in the right half plane, so the
    principal square root realizes exactly that branch.
    """
    return lambda xi: 1.0 / np.sqrt(kappa + sign * 1j * xi)


def resolvent2_symbol(kappa: float, sign: int):
    """(2*kappa + sign*i*xi)^{-1}."""
    return lambda xi: 1.0 / (2.0 * kappa + sign * 1j * xi)


def derivative(q: FieldState, order: int = 1) -> FieldState:
    return apply_multiplier(q, lambda xi: (1j * xi) ** order)


def sobolev_norm(q: FieldState, s: float) -> float:
    xi = q.grid.frequencies
    w = (1.0 + xi**2) ** s
    return float(np.sqrt(np.sum(w * np.abs(q.coefficients) ** 2)))


def frequency_restrict(q: FieldState, cutoff: float, side: str) -> FieldState:
    """Zero modes |xi| <= cutoff (side='above', the high-pass q_{>cutoff})
    or modes |xi| > cutoff (side='below')."""
    if cutoff <= 0:
        raise InputError("cutoff must be positive")
    if side not in ("above", "below"):
        raise InputError("side must be 'above' or 'below'")
    xi = np.abs(q.grid.frequencies)
    keep = xi > cutoff if side == "above" else xi <= cutoff
    return FieldState(q.grid, np.where(keep, q.coefficients, 0.0))


# -- Littlewood-Paley ---------------------------------------------------------

def _smooth_step(t):
    """C-infinity step: 0 for t<=0, 1 for t>=1."""
    t = np.clip(t, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(t > 0.0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
        b = np.where(t < 1.0, np.exp(-1.0 / np.maximum(1.0 - t, 1e-300)), 0.0)
    return a / (a + b)


def lp_bump(r):
    """Even bump psi with psi == 1 on [-1,1] and support in [-2,2]."""
    return _smooth_step(2.0 - np.abs(np.asarray(r, dtype=float)))


def littlewood_paley(q: FieldState):
    """Dyadic decomposition [(1, q_1), (2, q_2), ...] with sum q_N = q exactly.

    The block at N=1 is psi(xi) qhat; the block at dyadic N >= 2 is
    (psi(xi/N) - psi(2 xi/N)) qhat, supported in N/2 < |xi| <= 2N.  Levels
    stop once psi(xi/N) == 1 on the whole grid, so the telescoping sum
    restores q identically.
    """
    xi = q.grid.frequencies
    top = 1
    while top < q.grid.max_frequency:
        top *= 2
    pieces = []
    prev = lp_bump(xi)
    pieces.append((1, FieldState(q.grid, prev * q.coefficients)))
    n = 2
    while n <= top:
        cur = lp_bump(xi / n)
        pieces.append((n, FieldState(q.grid, (cur - prev) * q.coefficients)))
        prev = cur
        n *= 2
    return pieces


# -- integrals and products ---------------------------------------------------

def integral(q: FieldState) -> complex:
    """integral_0^L q dx = sqrt(L) * qhat(0)."""
    n = q.grid.modes
    return complex(np.sqrt(q.grid.period) * q.coefficients[n // 2])


def inner(f: FieldState, g: FieldState) -> complex:
    """L^2 pairing integral conj(f) g dx."""
    return complex(np.sum(np.conj(f.coefficients) * g.coefficients))


def upsample(q: FieldState, factor: int = 2) -> FieldState:
    """Spectral interpolation onto a grid with `factor` times the modes."""
    fine = Grid(q.grid.modes * factor, q.grid.period)
    n, m = q.grid.modes, fine.modes
    c = np.zeros(m + 1, dtype=complex)
    c[m // 2 - n // 2 : m // 2 + n // 2 + 1] = q.coefficients
    return FieldState(fine, c)


def restrict_to(q: FieldState, grid: Grid) -> FieldState:
    """Drop coefficients outside the coarser grid's retained set."""
    n, m = grid.modes, q.grid.modes
    c = q.coefficients[m // 2 - n // 2 : m // 2 + n // 2 + 1].copy()
    return FieldState(grid, c)


def product(*fields: FieldState) -> FieldState:
    """Pointwise product computed alias-free on a refined grid.

    All inputs share a grid; they are interpolated onto a grid fine
    enough that the product bandwidth fits, multiplied pointwise and
    restricted back, so the retained coefficients are exact.
    """
    grid = fields[0].grid
    factor = 2 if len(fields) <= 3 else 4
    fine = [upsample(f, factor) for f in fields]
    vals = fine[0].samples.copy()
    for f in fine[1:]:
        vals = vals * f.samples
    return restrict_to(FieldState.from_samples(fine[0].grid, vals), grid)


def dealias_mask(grid: Grid) -> np.ndarray:
    """Two-thirds-rule guard band: True on retained modes."""
    k = np.arange(-grid.modes // 2, grid.modes // 2 + 1)
    return np.abs(k) <= grid.modes // 3


def apply_dealias(q: FieldState) -> FieldState:
    return FieldState(q.grid, np.where(dealias_mask(q.grid), q.coefficients, 0.0))


def dilate(q: FieldState, factor: int) -> FieldState:
    """Mass-preserving dilation sqrt(f) * q(x0 + f*(x - x0)) about the grid center.

    ``factor`` must be a positive integer so dilated sample points land on
    grid points; the preimage is clipped to the fundamental window instead
    of wrapping, so data supported well inside the box keeps its mass.
    """
    if int(factor) != factor or factor < 1:
        raise InputError("dilation factor must be a positive integer")
    factor = int(factor)
    n = q.grid.modes
    j = np.arange(n)
    rel = j - n // 2
    src = factor * rel + n // 2
    vals = np.zeros(n, dtype=complex)
    keep = np.abs(rel) <= n // (2 * factor)
    vals[keep] = math.sqrt(factor) * q.samples[src[keep] % n]
    return FieldState.from_samples(q.grid, vals)


def occupied_radius(q: FieldState, rel_tol: float = 1e-14) -> float:
    """Largest |xi| whose coefficient exceeds rel_tol * max|qhat|."""
    a = np.abs(q.coefficients)
    top = a.max()
    if top == 0.0:
        return 0.0
    xi = q.grid.frequencies
    return float(np.max(np.abs(xi[a > rel_tol * top])))


# -- binary snapshot format ---------------------------------------------------

def write_snapshot(path, q: FieldState) -> None:
    """Header {magic 'DNLS', version u32, modes u32, period f64} then
    modes+1 interleaved (re, im) f64 coefficients, ascending frequency,
    little-endian."""
    header = struct.pack("<4sII d", _SNAPSHOT_MAGIC, _SNAPSHOT_VERSION, q.grid.modes, q.grid.period)
    flat = np.empty(2 * (q.grid.modes + 1), dtype="<f8")
    flat[0::2] = q.coefficients.real
    flat[1::2] = q.coefficients.imag
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(flat.tobytes())


def read_snapshot(path) -> FieldState:
    with open(path, "rb") as fh:
        head = fh.read(struct.calcsize("<4sII d"))
        magic, version, modes, period = struct.unpack("<4sII d", head)
        if magic != _SNAPSHOT_MAGIC:
            raise InputError(f"bad snapshot magic {magic!r}")
        if version != _SNAPSHOT_VERSION:
            raise InputError(f"unsupported snapshot version {version}")
        flat = np.frombuffer(fh.read(), dtype="<f8")
    if flat.size != 2 * (modes + 1):
        raise InputError("snapshot payload size does not match header")
    coeffs = flat[0::2] + 1j * flat[1::2]
    return FieldState(Grid(modes, period), coeffs)


def bilinear_integral(f: FieldState, g: FieldState) -> complex:
    """integral f g dx (no conjugation) = sum_nu fhat(nu) ghat(-nu)."""
    return complex(np.sum(f.coefficients * g.coefficients[::-1]))
