"""Command-line front end: configuration, dispatch, data export.

Exit codes: 0 success/pass, 1 error, 2 inconclusive (guard unattainable),
3 failed checks.  One JSON config per run, strict schema, no hidden
defaults beyond what --print-defaults shows.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .errors import ConfigError, DnlsLabError, GuardError
from .flows import FlowConfig, diff_evolve, dnls_evolve, export_trajectory, hk_evolve
from .operators import scan, scan_to_csv
from .profiles import algebraic_soliton, gaussian, plane_wave, random_band
from .spectral import FieldState, Grid, read_snapshot, write_snapshot

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INCONCLUSIVE = 2
EXIT_FAIL = 3


SIMULATE_DEFAULTS = {
    "flow": "dnls",
    "grid": {"modes": 512, "period": 4.0},
    "initial": {"kind": "gaussian", "width": 0.6, "mass": 2.0},
    "dt": 1e-4,
    "t_final": 0.1,
    "monitor_stride": 100,
    "dealias": True,
    "kappa": None,
    "probes": [8.0, 16.0, 32.0],
}

SCAN_DEFAULTS = {
    "snapshot": "field.dnls",
    "kappas": [1.0, 2.0, 4.0, 8.0, 16.0, 32.0],
}

EXPERIMENT_DEFAULTS = {
    "equicontinuity": {
        "grid": {"modes": 512, "period": 4.0},
        "kind": "gaussian",
        "count": 16,
        "seed": 0,
        "mass_cap": 0.8 * 4.0 * math.pi,
        "flow": "dnls",
        "t_final": 0.5,
        "dt": 1e-4,
        "monitor_stride": 500,
    },
    "hs_growth": {
        "grid": {"modes": 512, "period": 4.0},
        "kind": "gaussian",
        "count": 4,
        "seed": 0,
        "mass_cap": 0.8 * 4.0 * math.pi,
        "s": 1.0 / 6.0,
        "t_final": 0.25,
        "dt": 1e-4,
    },
    "h1_coercivity": {
        "grid": {"modes": 512, "period": 4.0},
        "kind": "gaussian",
        "count": 8,
        "seed": 0,
        "mass_cap": 0.8 * 4.0 * math.pi,
    },
    "inequality_suite": {"seed": 0},
    "scaling_covariance": {
        "grid": {"modes": 2048, "period": 64.0},
        "base": {"kind": "gaussian", "width": 1.0, "mass": 1.0},
        "lambdas": [2, 4],
        "kappas": [8.0, 16.0],
        "t": 0.01,
        "dt": 2e-4,
    },
}


def _fail(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return EXIT_ERROR


def _load_config(path, defaults):
    if path is None:
        return dict(defaults)
    with open(path) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(cfg) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    merged = dict(defaults)
    merged.update(cfg)
    return merged


def _build_grid(spec) -> Grid:
    if not isinstance(spec, dict) or set(spec) - {"modes", "period"}:
        raise ConfigError("grid must be {'modes': int, 'period': float}")
    return Grid(int(spec["modes"]), float(spec.get("period", 1.0)))


def _build_initial(grid: Grid, spec) -> FieldState:
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("initial must be an object with a 'kind'")
    kind = spec["kind"]
    extra = set(spec) - {"kind", "width", "mass", "center", "carrier", "speed",
                         "taper", "k", "amplitude_re", "amplitude_im", "band",
                         "seed", "path"}
    if extra:
        raise ConfigError(f"unknown initial keys: {sorted(extra)}")
    if kind == "gaussian":
        return gaussian(grid, float(spec["width"]), float(spec["mass"]),
                        center=spec.get("center"), carrier=float(spec.get("carrier", 0.0)))
    if kind == "soliton":
        return algebraic_soliton(grid, float(spec["speed"]), taper=bool(spec.get("taper", False)))
    if kind == "plane":
        amp = float(spec.get("amplitude_re", 0.5)) + 1j * float(spec.get("amplitude_im", 0.0))
        return plane_wave(grid, int(spec["k"]), amp)
    if kind == "random-band":
        return random_band(grid, int(spec["band"]), float(spec["mass"]), int(spec.get("seed", 0)))
    if kind == "file":
        return read_snapshot(spec["path"])
    raise ConfigError(f"unknown initial kind {kind!r}")


def cmd_simulate(args) -> int:
    cfg = _load_config(args.config, SIMULATE_DEFAULTS)
    grid = _build_grid(cfg["grid"])
    q0 = _build_initial(grid, cfg["initial"])
    flow = cfg["flow"]
    fc = FlowConfig(
        dt=float(cfg["dt"]),
        t_final=float(cfg["t_final"]),
        dealias=bool(cfg["dealias"]),
        monitor_stride=int(cfg["monitor_stride"]),
        kappa=None if cfg["kappa"] is None else float(cfg["kappa"]),
        probes=tuple(float(k) for k in cfg["probes"]),
    )
    runner = {"dnls": dnls_evolve, "hk": hk_evolve, "diff": diff_evolve}.get(flow)
    if runner is None:
        raise ConfigError(f"unknown flow {flow!r}")
    traj = runner(q0, fc)
    export_trajectory(traj, args.out)
    if traj.halted:
        print(f"halted: {traj.halted}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    print(f"wrote {len(traj.states)} snapshots to {args.out}")
    return EXIT_OK


def cmd_scan(args) -> int:
    cfg = _load_config(args.config, SCAN_DEFAULTS)
    if not os.path.exists(cfg["snapshot"]):
        return _fail(f"snapshot not found: {cfg['snapshot']}")
    q = read_snapshot(cfg["snapshot"])
    rows = scan(q, [float(k) for k in cfg["kappas"]], threads=args.threads)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "scan.csv")
    scan_to_csv(rows, path)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    from . import experiments as ex

    name = args.name
    if name not in EXPERIMENT_DEFAULTS:
        print(f"error: unknown experiment {name!r}; registered: "
              f"{sorted(EXPERIMENT_DEFAULTS)}", file=sys.stderr)
        return EXIT_ERROR
    cfg = _load_config(args.config, EXPERIMENT_DEFAULTS[name])
    if args.seed is not None and "seed" in cfg:
        cfg["seed"] = args.seed
    if name == "inequality_suite":
        report = ex.inequality_suite(seed=int(cfg["seed"]))
    elif name == "scaling_covariance":
        grid = _build_grid(cfg["grid"])
        base = _build_initial(grid, cfg["base"])
        report = ex.scaling_covariance_report(
            base, lambdas=tuple(cfg["lambdas"]), kappas=tuple(cfg["kappas"]),
            t=float(cfg["t"]), dt=float(cfg["dt"]))
    else:
        grid = _build_grid(cfg["grid"])
        ens = ex.build_ensemble(cfg["kind"], int(cfg["count"]), int(cfg["seed"]),
                                float(cfg["mass_cap"]), grid=grid)
        if name == "equicontinuity":
            report = ex.equicontinuity_report(
                ens, flow=cfg["flow"], t_final=float(cfg["t_final"]),
                dt=float(cfg["dt"]), monitor_stride=int(cfg["monitor_stride"]))
        elif name == "hs_growth":
            report = ex.hs_growth_report(ens, s=float(cfg["s"]),
                                         t_final=float(cfg["t_final"]), dt=float(cfg["dt"]))
        elif name == "h1_coercivity":
            report = ex.h1_coercivity_check(ens)
    path = ex.write_report(report, args.out)
    print(f"wrote {path}")
    if report.inconclusive:
        return EXIT_INCONCLUSIVE
    if report.exploratory:
        print("exploratory run (mass cap above threshold): not pass/fail")
        return EXIT_OK
    return EXIT_OK if report.passed else EXIT_FAIL


def _selftest_checks(inject=None):
    """Fast invariant battery; yields (name, passed)."""
    import time

    from .gradients import grad_alpha, pairing
    from .lattice import coth_half, pair_sum_em
    from .operators import (alpha_series, perturbation_determinant,
                            trace_quadratic, trace_quartic)
    from .lattice import chain_sum_closed

    grid = Grid(128, 1.0)
    rng = np.random.default_rng(7)
    c = np.zeros(129, dtype=complex)
    ks = np.arange(-10, 11)
    c[64 + ks] = (rng.standard_normal(21) + 1j * rng.standard_normal(21)) * np.exp(-((ks / 5.0) ** 2))
    c *= math.sqrt(0.5 / np.sum(np.abs(c) ** 2))
    q = FieldState(grid, c)

    # transform round trip
    back = grid.to_coefficients(grid.to_samples(q.coefficients))
    yield "transform-round-trip", bool(np.max(np.abs(back - q.coefficients)) < 1e-13)

    # Plancherel
    phys = np.sum(np.abs(q.samples) ** 2) / grid.modes
    yield "plancherel", bool(abs(phys - q.mass()) < 1e-12)

    # branch consistency: conj((k - i xi)^{-1/2}) == (k + i xi)^{-1/2}
    xi = grid.frequencies
    ok = True
    for kappa in [2.0**j for j in range(0, 11)]:
        minus = 1.0 / np.sqrt(kappa - 1j * xi)
        if inject == "branch":
            minus = 1.0 / np.sqrt(kappa + 1j * xi)
        plus = 1.0 / np.sqrt(kappa + 1j * xi)
        ok = ok and bool(np.max(np.abs(np.conj(minus) - plus)) == 0.0)
    yield "branch-consistency", ok

    # quadratic trace: closed cotangent form vs direct lattice summation
    t_closed = trace_quadratic(q, 4.0)
    live = np.abs(q.coefficients) > 0
    t_direct = 1j * 4.0 * np.sum(
        np.abs(q.coefficients[live]) ** 2 * pair_sum_em(xi[live], 4.0, 1.0))
    yield "trace-closed-form", bool(abs(t_closed - t_direct) < 1e-9 * abs(t_closed))

    # quartic trace: paraproduct vs explicit chain sums on a tiny field
    c2 = np.zeros(129, dtype=complex)
    c2[64] = 0.4
    c2[65] = 0.3 - 0.2j
    tiny = FieldState(grid, c2)
    h = grid.spacing
    total = 0.0j
    ks2 = [0, 1]
    kc = c2
    for m1 in ks2:
        for mm2 in ks2:
            for m3 in ks2:
                m2 = -mm2
                m4 = -(m1 + m2 + m3)
                if abs(m4) > 1 or abs(kc[64 - m4]) == 0:
                    continue
                w = kc[64 + m1] * np.conj(kc[64 - m2]) * kc[64 + m3] * np.conj(kc[64 - m4])
                total += w * chain_sum_closed(
                    [0.0, -m1 * h, -(m1 + m2) * h, -(m1 + m2 + m3) * h],
                    [+1, -1, +1, -1], 4.0, 1.0)
    yield "quartic-paraproduct", bool(abs(trace_quartic(tiny, 4.0) - total) < 1e-12 * abs(total))

    # determinant vs series
    res = alpha_series(q, 8.0)
    a = perturbation_determinant(q, 8.0)
    yield "determinant-vs-series", bool(res.converged and abs(np.exp(-res.value) - a) < 1e-9 * abs(a))

    # gradient vs finite differences
    from .operators import window_frequencies

    window = window_frequencies(q, 8.0)
    b = grad_alpha(q, 8.0, window, with_gamma=False)
    hdir = FieldState(grid, np.roll(c, 3) * 0.5)
    eps = 1e-5

    def alpha_at(t):
        f = FieldState(grid, q.coefficients + t * hdir.coefficients)
        return alpha_series(f, 8.0, window).value

    fd = (alpha_at(eps) - alpha_at(-eps)) / (2 * eps)
    yield "gradient-finite-difference", bool(abs(fd - pairing(b, hdir)) < 1e-6)


def cmd_selftest(args) -> int:
    failures = []
    for name, ok in _selftest_checks(inject=args.inject_fault):
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
        if not ok:
            failures.append(name)
    if failures:
        print(f"failed checks: {', '.join(failures)}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _print_defaults(command, name=None) -> int:
    if command == "simulate":
        print(json.dumps(SIMULATE_DEFAULTS, indent=2, sort_keys=True))
    elif command == "scan":
        print(json.dumps(SCAN_DEFAULTS, indent=2, sort_keys=True))
    elif command == "experiment":
        if name:
            if name not in EXPERIMENT_DEFAULTS:
                return _fail(f"unknown experiment {name!r}")
            print(json.dumps(EXPERIMENT_DEFAULTS[name], indent=2, sort_keys=True))
        else:
            print(json.dumps(EXPERIMENT_DEFAULTS, indent=2, sort_keys=True))
    else:
        print("{}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="dnls-lab",
        description="Pseudo-spectral laboratory for derivative-NLS conservation diagnostics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", metavar="PATH", help="JSON run configuration")
        p.add_argument("--out", metavar="DIR", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
        p.add_argument("--print-defaults", action="store_true",
                       help="print the default config JSON and exit")

    p_sim = sub.add_parser("simulate", help="integrate a flow and export the trajectory")
    common(p_sim)
    p_scan = sub.add_parser("scan", help="per-kappa spectral scan of a snapshot")
    common(p_scan)
    p_exp = sub.add_parser("experiment", help="run a registered experiment")
    p_exp.add_argument("name", nargs="?", help=f"one of {sorted(EXPERIMENT_DEFAULTS)}")
    common(p_exp)
    p_self = sub.add_parser("selftest", help="fast invariant battery")
    common(p_self)
    p_self.add_argument("--inject-fault", default=None, help=argparse.SUPPRESS)

    args = parser.parse_args(argv)
    try:
        try:
            from threadpoolctl import threadpool_limits

            threadpool_limits(max(1, args.threads))
        except ImportError:
            pass
        if args.print_defaults:
            return _print_defaults(args.command, getattr(args, "name", None))
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "scan":
            return cmd_scan(args)
        if args.command == "experiment":
            if args.name is None:
                return _fail(f"experiment name required; registered: {sorted(EXPERIMENT_DEFAULTS)}")
            return cmd_experiment(args)
        if args.command == "selftest":
            return cmd_selftest(args)
        return _fail(f"unknown command {args.command!r}")
    except GuardError as exc:
        print(f"inconclusive: {exc}", file=sys.stderr)
        return EXIT_INCONCLUSIVE
    except (DnlsLabError, OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        return _fail(f"{type(exc).__name__}: {exc}")


if __name__ == "__main__":
    sys.exit(main())
