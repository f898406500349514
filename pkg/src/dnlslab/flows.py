"""Time integration of the evolution, its bounded regularization and the
difference flow, with conserved-quantity monitoring.

All three flows use the same integrating-factor RK4 stepper: the exact
linear phase is factored out so the stage evaluations see only the
bounded nonlinear part.  The regularized flow has no stiff linear term
and runs with the trivial integrating factor.
"""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InputError, ResolutionLossError, StepInstabilityError
from .gradients import f_linear_symbol, grad_alpha
from .lattice import tanh_half
from .operators import op_norm_convolution, perturbation_determinant, window_frequencies
from .spectral import FieldState, Grid, bilinear_integral, derivative, product, write_snapshot

_SCHEMES = ("if-rk4",)


@dataclass(frozen=True)
class FlowConfig:
    dt: float
    t_final: float
    scheme: str = "if-rk4"
    dealias: bool = True
    monitor_stride: int = 100
    kappa: float = None
    probes: tuple = ()

    def __post_init__(self):
        if not (self.dt > 0.0 and np.isfinite(self.dt)):
            raise ConfigError("dt must be positive")
        if self.t_final < 0.0:
            raise ConfigError("t_final must be nonnegative")
        if self.scheme not in _SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.monitor_stride < 1:
            raise ConfigError("monitor_stride must be >= 1")


@dataclass
class ConservedReport:
    t: float
    M: float
    H: float
    H2: float
    a_at: dict
    beta2_at: dict

    def __post_init__(self):
        if self.M < 0:
            raise InputError("mass cannot be negative")


@dataclass
class Trajectory:
    times: list
    states: list
    monitors: list
    halted: str = None

    @property
    def final(self) -> FieldState:
        return self.states[-1]


def _occupied_symbol_max(q: FieldState, symbol_vals: np.ndarray, rel_tol: float = 1e-6) -> float:
    a = np.abs(q.coefficients)
    top = a.max()
    if top == 0.0:
        return 0.0
    return float(np.max(np.abs(symbol_vals[a > rel_tol * top])))


def _check_stability(q0: FieldState, cfg: FlowConfig) -> None:
    """Stability guard dt * (advective symbol scale) <= 1.

    The integrating factor integrates every linear phase exactly, so the
    binding constraint is the cubic transport term; its symbol scale is
    max|xi| over occupied modes (those above 1e-6 of the peak
    coefficient) times the peak intensity of the data.
    """
    xi = q0.grid.frequencies
    s = _occupied_symbol_max(q0, np.abs(xi)) * float(np.max(np.abs(q0.samples)) ** 2)
    if cfg.dt * s > 1.0:
        raise ConfigError(
            f"stability guard failed: dt*|advective symbol|={cfg.dt * s:.3g} > 1"
        )


def _check_resolved(q: FieldState, tol: float) -> float:
    xi = np.abs(q.grid.frequencies)
    top = xi > 0.5 * q.grid.max_frequency
    frac = float(np.sum(np.abs(q.coefficients[top]) ** 2) / max(q.mass(), 1e-300))
    if frac > tol:
        raise ResolutionLossError(f"top-octave mass fraction {frac:.3e} exceeds {tol:.1e}")
    return frac


def conserved_report(q: FieldState, kappas=(), t: float = 0.0, windows: dict = None) -> ConservedReport:
    """Mass, energy, second energy and per-kappa determinant probes.

    M = int |q|^2, H = i int conj(q) q' - 1/2 int |q|^4,
    H2 = int |q'|^2 + (3/4) i int |q|^2 (q conj(q)' - conj(q) q') + 1/2 int |q|^6,
    all by spectral differentiation and alias-free products.
    """
    xi = q.grid.frequencies
    c2 = np.abs(q.coefficients) ** 2
    m = float(np.sum(c2))
    dens = product(q, q.conjugate())  # |q|^2
    h = float(-np.sum(xi * c2) - 0.5 * np.sum(np.abs(dens.coefficients) ** 2))
    dq = derivative(q)
    cur = product(q, dq.conjugate()) - product(q.conjugate(), dq)  # q qbar' - qbar q'
    t2 = (0.75j * bilinear_integral(dens, cur)).real
    t3 = 0.5 * bilinear_integral(dens, product(dens, dens)).real
    h2 = float(np.sum(xi**2 * c2) + t2 + t3)
    a_at, b2_at = {}, {}
    for k in kappas:
        w = None if windows is None else windows.get(k)
        a_at[k] = perturbation_determinant(q, k, window=w)
        b2_at[k] = float(np.sum(xi**2 * c2 / (4.0 * k**2 + xi**2)))
    return ConservedReport(t=t, M=m, H=h, H2=h2, a_at=a_at, beta2_at=b2_at)


def _ifrk4_stepper(linear_symbol: np.ndarray, dt: float, nonlinear):
    """Classical integrating-factor RK4 for u' = L u + N(u), diagonal L."""
    e_half = np.exp(0.5 * dt * linear_symbol)
    e_full = np.exp(dt * linear_symbol)

    def step(u):
        k1 = nonlinear(u)
        k2 = nonlinear(e_half * (u + 0.5 * dt * k1))
        k3 = nonlinear(e_half * u + 0.5 * dt * k2)
        k4 = nonlinear(e_full * u + dt * e_half * k3)
        return e_full * u + (dt / 6.0) * (e_full * k1 + 2.0 * e_half * (k2 + k3) + k4)

    return step


def _monitor_windows(q0: FieldState, probes) -> dict:
    return {k: window_frequencies(q0, k) for k in probes}


def _evolve(q0, cfg, linear_symbol, nonlinear, guard=None, resolution_tol=None):
    grid = q0.grid
    _check_stability(q0, cfg)
    steps = int(round(cfg.t_final / cfg.dt))
    windows = _monitor_windows(q0, cfg.probes)
    u = q0.coefficients.copy()
    step = _ifrk4_stepper(linear_symbol, cfg.dt, nonlinear)
    times = [0.0]
    states = [q0]
    monitors = [conserved_report(q0, cfg.probes, 0.0, windows)]
    halted = None
    mask = None
    if cfg.dealias:
        from .spectral import dealias_mask

        mask = dealias_mask(grid)
    for n in range(1, steps + 1):
        if guard is not None:
            ok, diag = guard(u)
            if not ok:
                halted = f"guard lost at t={(n - 1) * cfg.dt:.6g}: {diag}"
                break
        u = step(u)
        if mask is not None:
            u = np.where(mask, u, 0.0)
        if not np.all(np.isfinite(u.view(float))):
            raise StepInstabilityError(f"non-finite state at step {n}")
        if n % cfg.monitor_stride == 0 or n == steps:
            state = FieldState(grid, u)
            if resolution_tol is not None:
                _check_resolved(state, resolution_tol)
            times.append(n * cfg.dt)
            states.append(state)
            monitors.append(conserved_report(state, cfg.probes, n * cfg.dt, windows))
    return Trajectory(times=times, states=states, monitors=monitors, halted=halted)


def _fast_cubic(grid: Grid):
    """Alias-free |q|^2 q on a twice-refined grid, coefficient array in/out."""
    fine = Grid(2 * grid.modes, grid.period)
    n, m = grid.modes, fine.modes
    lo = m // 2 - n // 2

    def cubic(u):
        cf = np.zeros(m + 1, dtype=complex)
        cf[lo : lo + n + 1] = u
        s = fine.to_samples(cf)
        w = (np.abs(s) ** 2) * s
        return fine.to_coefficients(w)[lo : lo + n + 1]

    return cubic


def dnls_evolve(q0: FieldState, cfg: FlowConfig) -> Trajectory:
    """Integrating-factor RK4 for qhat_t = -i xi^2 qhat - i xi (|q|^2 q)^hat."""
    grid = q0.grid
    _check_resolved(q0, 1e-10)
    xi = grid.frequencies
    cubic = _fast_cubic(grid)

    def nl(u):
        return -1j * xi * cubic(u)

    return _evolve(q0, cfg, -1j * xi**2, nl, resolution_tol=1e-6)


def _flow_gradient_combination(q, kappa, window, check_guard=True):
    bundle = grad_alpha(q, kappa, window, with_gamma=False, check_guard=check_guard)
    if not bundle.resolvent_ok:
        return None, bundle.guard
    t = tanh_half(kappa, q.grid.period)
    v = t * (bundle.dqbar.coefficients + bundle.dq.conjugate().coefficients)
    return v, bundle.guard


def hk_evolve(q0: FieldState, cfg: FlowConfig) -> Trajectory:
    """Flow of the regularized Hamiltonian: q_t = 2 kappa (dA/dqbar + conj(dA/dq))'.

    The vector field is bounded, but its linearization saturates at 4 kappa^2
    at high frequency, so that exact phase -4 i kappa^2 xi^2/(4 kappa^2 + xi^2)
    rides the integrating factor and the stages see only the bounded
    nonlinear remainder.  The resolvent guard is re-checked every step; a
    guard loss halts the trajectory with diagnostics instead of raising.
    """
    if cfg.kappa is None:
        raise ConfigError("hk flow requires kappa")
    grid = q0.grid
    kappa = float(cfg.kappa)
    window = window_frequencies(q0, kappa)
    xi = grid.frequencies
    vlin = -2.0 * kappa * xi / (4.0 * kappa**2 + xi**2)

    def nl(u):
        v, _ = _flow_gradient_combination(FieldState(grid, u), kappa, window, check_guard=False)
        if v is None:
            raise StepInstabilityError("guard lost inside a stage")
        return 2.0 * kappa * (1j * xi) * (v - vlin * u)

    def guard(u):
        g = math.sqrt(kappa) * op_norm_convolution(FieldState(grid, u), kappa, window)
        return g < 0.5, f"sqrt(kappa)*||Lambda||_op = {g:.4f}"

    linear = 2.0 * kappa * (1j * xi) * vlin  # = -4 i kappa^2 xi^2/(4 kappa^2 + xi^2)
    return _evolve(q0, cfg, linear, nl, guard=guard)


def diff_evolve(q0: FieldState, cfg: FlowConfig) -> Trajectory:
    """Difference flow: exact linear symbol -i xi^4/(4 kappa^2 + xi^2) plus
    the nonlinear remainder (F - F^[1])' applied spectrally."""
    if cfg.kappa is None:
        raise ConfigError("difference flow requires kappa")
    grid = q0.grid
    kappa = float(cfg.kappa)
    window = window_frequencies(q0, kappa)
    xi = grid.frequencies
    cubic = _fast_cubic(grid)
    vlin = -2.0 * kappa * xi / (4.0 * kappa**2 + xi**2)

    def nl(u):
        v, _ = _flow_gradient_combination(FieldState(grid, u), kappa, window, check_guard=False)
        if v is None:
            raise StepInstabilityError("guard lost inside a stage")
        remainder = -cubic(u) - 2.0 * kappa * (v - vlin * u)
        return 1j * xi * remainder

    def guard(u):
        g = math.sqrt(kappa) * op_norm_convolution(FieldState(grid, u), kappa, window)
        return g < 0.5, f"sqrt(kappa)*||Lambda||_op = {g:.4f}"

    linear = 1j * xi * (-(xi**3) / (4.0 * kappa**2 + xi**2))  # = -i xi^4/(4k^2+xi^2)
    return _evolve(q0, cfg, linear, nl, guard=guard)


def commutator_test(q0: FieldState, t: float, s: float, kappa: float, dt: float) -> float:
    """L2 distance between running the two flows in either order."""
    base = dict(dealias=True, monitor_stride=10**9)
    dnls_t = FlowConfig(dt=dt, t_final=t, **base)
    hk_s = FlowConfig(dt=dt, t_final=s, kappa=kappa, **base)
    a = hk_evolve(dnls_evolve(q0, dnls_t).final, hk_s).final
    b = dnls_evolve(hk_evolve(q0, hk_s).final, dnls_t).final
    return (a - b).l2_norm()


# -- trajectory export ---------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{x:.17g}"


def export_trajectory(traj: Trajectory, outdir) -> None:
    """Directory of field snapshots plus monitors.csv."""
    os.makedirs(outdir, exist_ok=True)
    probes = sorted(traj.monitors[0].a_at) if traj.monitors else []
    header = ["t", "M", "H", "H2"]
    for k in probes:
        tag = f"{k:g}"
        header += [f"re_a_{tag}", f"im_a_{tag}", f"beta2_{tag}"]
    rows = []
    for i, (t, state, rep) in enumerate(zip(traj.times, traj.states, traj.monitors)):
        write_snapshot(os.path.join(outdir, f"state_{i:05d}.dnls"), state)
        row = [_fmt(t), _fmt(rep.M), _fmt(rep.H), _fmt(rep.H2)]
        for k in probes:
            a = rep.a_at[k]
            row += [_fmt(a.real), _fmt(a.imag), _fmt(rep.beta2_at[k])]
        rows.append(",".join(row))
    payload = "\r\n".join([",".join(header)] + rows) + "\r\n"
    _atomic_write(os.path.join(outdir, "monitors.csv"), payload)


def _atomic_write(path, text) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
