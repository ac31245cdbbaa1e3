"""Command-line orchestration: subcommand dispatch, config, CSV/JSON artifacts.

Configuration comes from an optional JSON file (--config) overridden by
command-line flags; every run writes a manifest with the resolved
configuration, package version, seeds, and a SHA-256 per output file.  All
floating-point output uses 12 significant digits with '.' as the decimal
separator, so repeated runs with one configuration produce byte-identical
CSV bodies.  The default output directory honors the KPZTAIL_OUT
environment variable.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, bridge, rearrange, selftest, spectral
from .grids import (
    Potential,
    SpaceGrid,
    TimeGrid,
    format_value,
    l2_norm_space,
    samples_to_csv,
)
from .testing import random_smooth_potential, rng_from_seed
from .variational import RateOptions, minimizer_distance, rate_phi


def _default_out() -> str:
    return os.environ.get("KPZTAIL_OUT", "out")


def _write_artifacts(out_dir: Path, subcommand: str, config: dict, files: dict,
                     passed: bool | None = None) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    hashes = {}
    for name, body in files.items():
        data = body.encode() if isinstance(body, str) else body
        (out_dir / name).parent.mkdir(parents=True, exist_ok=True)
        (out_dir / name).write_bytes(data)
        hashes[name] = hashlib.sha256(data).hexdigest()
    manifest = {
        "subcommand": subcommand,
        "config": config,
        "version": __version__,
        "outputs": hashes,
        "generated_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    if passed is not None:
        manifest["passed"] = passed
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


def _json_body(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _args_config(args) -> dict:
    return {k: v for k, v in vars(args).items()
            if k != "fn" and isinstance(v, (int, float, str, bool, list, tuple, type(None)))}


def _standard_grid(dx: float, half_width: float) -> SpaceGrid:
    n = int(round(2 * half_width / dx)) + 1
    if n % 2 == 0:
        n += 1
    return SpaceGrid(half_width, n)


def _named_potential(name: str, grid: SpaceGrid, amplitude: float, width: float,
                     center: float) -> Potential:
    x = grid.x
    if name == "sech2":
        return Potential(grid, amplitude / np.cosh((x - center) / width) ** 2)
    if name == "rstar":
        return spectral.r_star(grid)
    if name == "gaussian":
        return Potential(grid, amplitude * np.exp(-((x - center) / width) ** 2))
    raise ValueError(f"unknown potential {name!r}")


# --- subcommand handlers -------------------------------------------------------

def _cmd_spectral(args) -> int:
    grid = _standard_grid(args.dx, args.half_width)
    phi = _named_potential(args.phi, grid, args.amplitude, args.width, args.center)
    gs = spectral.ground_state(phi)
    bound = spectral.potbd_bound(phi)
    report = {
        "potential": args.phi,
        "F": gs.value,
        "bound": bound,
        "defect": 1.0 - gs.value / bound if bound > 0 else None,
        "gns_ratio": spectral.gns_ratio(phi),
    }
    _write_artifacts(Path(args.out), "spectral", _args_config(args), {
        "spectral.json": _json_body(report),
    })
    print(f"F = {report['F']:.10g}, bound = {bound:.10g}")
    return 0


def _cmd_rearrange_check(args) -> int:
    rng = rng_from_seed(args.seed)
    grid = _standard_grid(args.dx, args.half_width)
    worst_norm = 0.0
    worst_hl = -np.inf
    for _ in range(args.trials):
        f = random_smooth_potential(rng, grid, nonneg=True)
        g = random_smooth_potential(rng, grid, nonneg=True)
        fs = rearrange.sym_decr_rearrange(f)
        worst_norm = max(worst_norm, abs(l2_norm_space(fs) - l2_norm_space(f)))
        lhs, rhs = rearrange.hardy_littlewood_check(f, g)
        worst_hl = max(worst_hl, lhs - rhs)
    report = {
        "trials": args.trials,
        "worst_norm_change": worst_norm,
        "worst_hl_excess": worst_hl,
        "norm_ok": worst_norm <= 1e-10,
        "hl_ok": worst_hl <= 1e-9,
    }
    passed = report["norm_ok"] and report["hl_ok"]
    _write_artifacts(Path(args.out), "rearrange-check", _args_config(args),
                     {"rearrange_check.json": _json_body(report)}, passed)
    print(f"rearrange-check: {'PASS' if passed else 'FAIL'} "
          f"(norm drift {worst_norm:.3g}, HL excess {worst_hl:.3g})")
    return 0 if passed else 1


def _rate_report_files(report, stride_cap: int = 201) -> dict:
    rho = report.minimizer
    t_stride = max(1, (rho.tgrid.n_steps + 1) // stride_cap)
    x_stride = max(1, rho.sgrid.n_points // stride_cap)
    descriptor = {
        "half_width": rho.sgrid.half_width,
        "n_points": rho.sgrid.n_points,
        "t_start": rho.tgrid.t_start,
        "t_end": rho.tgrid.t_end,
        "n_steps": rho.tgrid.n_steps,
        "csv_t_stride": t_stride,
        "csv_x_stride": x_stride,
    }
    return {
        "rate_report.json": _json_body({
            "lambda": report.lam,
            "phi_hat": report.phi_hat,
            "phi_hat_over_lam32": report.scaled_ratio,
            "constraint_residual": report.constraint_residual,
            "iterations": report.iterations,
            "upper_certificate": report.upper_certificate,
            "converged": report.converged,
        }),
        "minimizer.csv": samples_to_csv(rho.tgrid, rho.sgrid, rho.values,
                                        t_stride=t_stride, x_stride=x_stride),
        "minimizer_grid.json": _json_body(descriptor),
    }


def _cmd_rate(args) -> int:
    opts = RateOptions(n_points=args.n_points, dt=args.dt,
                       delta_warmup=args.warmup,
                       max_iterations=args.max_iterations)
    if args.zeta is not None:
        opts = RateOptions(n_points=args.n_points, dt=args.dt,
                           delta_warmup=args.warmup,
                           max_iterations=args.max_iterations,
                           zeta_candidates=(args.zeta,))
    report = rate_phi(args.lam, opts)
    _write_artifacts(Path(args.out), "rate", _args_config(args), _rate_report_files(report),
                     report.converged)
    print(f"lambda={args.lam}: phi_hat={report.phi_hat:.6g} "
          f"ratio={report.scaled_ratio:.4f} converged={report.converged}")
    return 0 if report.converged else 1


def _cmd_tail_law(args) -> int:
    lams = sorted(args.lambdas)
    if any(not 4 <= v <= 16 for v in lams):
        print("error: --lambdas entries must lie in [4, 16]", file=sys.stderr)
        return 2
    opts = RateOptions(n_points=args.n_points, dt=args.dt,
                       max_iterations=args.max_iterations)
    rows = []
    ratios = []
    all_converged = True
    for lam in lams:
        rep = rate_phi(lam, opts)
        all_converged &= rep.converged
        dist = minimizer_distance(rep) if rep.converged else float("nan")
        ratios.append(rep.scaled_ratio)
        rows.append((lam, rep.phi_hat, rep.scaled_ratio,
                     rep.upper_certificate / lam**1.5, dist, int(rep.converged)))
    trend_ok = all(b <= a * 1.05 for a, b in zip(ratios, ratios[1:])) if len(ratios) > 1 else True
    bracket_ok = all(1.0 <= r[2] <= r[3] + 1e-9 for r in rows)
    table = "\n".join(
        ["lambda,phi_hat,ratio,certificate_ratio,minimizer_distance,converged"]
        + [",".join(format_value(float(v)) for v in row) for row in rows]) + "\n"
    summary = {
        "lambdas": lams,
        "ratios": ratios,
        "trend_nonincreasing_5pct": trend_ok,
        "bracketed_by_1_and_certificate": bracket_ok,
        "all_converged": all_converged,
    }
    passed = all_converged and trend_ok and bracket_ok
    _write_artifacts(Path(args.out), "tail-law", _args_config(args),
                     {"tail_law.csv": table, "tail_law.json": _json_body(summary)}, passed)
    for row in rows:
        print(f"lambda={row[0]:g}: ratio={row[2]:.4f} certificate={row[3]:.4f} "
              f"distance={row[4]:.4f} converged={bool(row[5])}")
    print(f"tail-law: {'PASS' if passed else 'FAIL'}")
    return 0 if passed else 1


def _cmd_limit_shape(args) -> int:
    opts = bridge.ShapeOptions(dx=args.dx, dt=args.dt, delta_warmup=args.warmup,
                               mc_paths=args.paths, mc_seed=args.seed)
    prof = bridge.shape_profile(args.lam, args.delta, backend=args.backend, opts=opts)
    summary = {
        "lambda": args.lam,
        "delta": args.delta,
        "backend": args.backend,
        "sup_error": prof.sup_error,
    }
    _write_artifacts(Path(args.out), "limit-shape", _args_config(args), {
        "shape_profile.csv": prof.to_csv(),
        "shape_summary.json": _json_body(summary),
    })
    print(f"limit-shape lambda={args.lam}: sup|h - h*| = {prof.sup_error:.4f}")
    return 0


def _cmd_hitting_time(args) -> int:
    horizon = args.lam * args.t
    s_vals = np.linspace(horizon / 400, horizon * (1 - 1e-6), 400)
    dens = bridge.hitting_density(s_vals, args.t, args.x, args.lam)
    table = "\n".join(["s,density"] + [
        f"{format_value(s)},{format_value(d)}" for s, d in zip(s_vals, dens)]) + "\n"
    cfg = bridge.BridgeConfig(n_paths=args.paths, n_time_steps=args.steps, seed=args.seed)
    hits = bridge.first_hitting_times(args.lam * args.x, horizon, cfg)
    edges = np.linspace(0.0, horizon, args.bins + 1)
    counts, _ = np.histogram(hits, bins=edges)
    hist = "\n".join(["bin_lo,bin_hi,count"] + [
        f"{format_value(edges[b])},{format_value(edges[b+1])},{counts[b]}"
        for b in range(args.bins)]) + "\n"
    _write_artifacts(Path(args.out), "hitting-time", _args_config(args), {
        "hitting_density.csv": table,
        "hitting_histogram.csv": hist,
    })
    print(f"hitting-time: {args.paths} paths over [0, {horizon:g}], "
          f"{args.bins} bins written")
    return 0


def _cmd_fk(args) -> int:
    grid = _standard_grid(args.dx, args.half_width)
    phi = _named_potential(args.phi, grid, args.amplitude, args.width, args.center)
    cfg = bridge.BridgeConfig(n_paths=args.paths, seed=args.seed)
    mean, se = bridge.fk_estimate(phi, args.duration, args.start, args.end, cfg)
    report = {
        "phi": args.phi,
        "duration": args.duration,
        "from": args.start,
        "to": args.end,
        "n_paths": args.paths,
        "mean": mean,
        "std_error": se,
    }
    _write_artifacts(Path(args.out), "fk", _args_config(args), {"fk_estimate.json": _json_body(report)})
    print(f"fk: mean = {mean:.8g} +- {se:.3g}")
    return 0


def _cmd_figure1(args) -> int:
    ts = (0.5, 1.0, 1.5)
    xs = 0.01 * (np.arange(601) - 300)  # exact zero at the center node
    header = "x," + ",".join(f"h_star_t{format_value(t)}" for t in ts)
    lines = [header]
    for x in xs:
        vals = [bridge.h_star(t, float(x)) for t in ts]
        lines.append(",".join([format_value(float(x))] + [format_value(v) for v in vals]))
    _write_artifacts(Path(args.out), "figure1", _args_config(args),
                     {"figure1.csv": "\n".join(lines) + "\n"})
    print(f"figure1: wrote {len(xs)} rows; h*(1, 0) = {bridge.h_star(1.0, 0.0)}")
    return 0


def _cmd_selftest(args) -> int:
    profile = selftest.QUICK if args.quick else selftest.FULL
    criteria = args.criteria or sorted(selftest.CHECKS.keys())
    results = selftest.run_selftest(criteria, profile)
    files = {}
    for res in results:
        for name, body in res.artifacts.items():
            files[f"criterion_{res.criterion}/{name}"] = body
    summary = {
        "profile": profile.name,
        "criteria": criteria,
        "results": [
            {"criterion": r.criterion, "name": r.name, "passed": r.passed, "detail": r.detail}
            for r in results
        ],
        "all_passed": all(r.passed for r in results),
    }
    files["selftest_summary.json"] = _json_body(summary)
    _write_artifacts(Path(args.out), "selftest", _args_config(args), files, summary["all_passed"])
    for r in results:
        print(f"criterion {r.criterion} ({r.name}): {'PASS' if r.passed else 'FAIL'} - {r.detail}")
    return 0 if summary["all_passed"] else 1


# --- parser ----------------------------------------------------------------------

def _add_common(p, seed_default=12345):
    p.add_argument("--out", default=None, help="output directory (default $KPZTAIL_OUT or ./out)")
    p.add_argument("--config", default=None, help="JSON file with defaults; flags win")
    p.add_argument("--seed", type=int, default=seed_default)


def _add_grid_flags(p, dx=0.01, half_width=20.0):
    p.add_argument("--dx", type=float, default=dx)
    p.add_argument("--half-width", dest="half_width", type=float, default=half_width)


def _add_potential_flags(p):
    p.add_argument("--phi", default="sech2", choices=("sech2", "rstar", "gaussian"))
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--width", type=float, default=1.0)
    p.add_argument("--center", type=float, default=0.0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kpztail",
                                 description="Desk-scale weak-noise KPZ upper-tail experiments")
    sub = ap.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("spectral", help="ground-state functional report for one potential")
    _add_common(p)
    _add_grid_flags(p)
    _add_potential_flags(p)
    p.set_defaults(fn=_cmd_spectral)

    p = sub.add_parser("rearrange-check", help="randomized rearrangement suite")
    _add_common(p)
    _add_grid_flags(p, dx=0.05, half_width=10.0)
    p.add_argument("--trials", type=int, default=100)
    p.set_defaults(fn=_cmd_rearrange_check)

    p = sub.add_parser("rate", help="rate-function optimization at one tail depth")
    _add_common(p)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--zeta", type=float, default=None)
    p.add_argument("--n-points", dest="n_points", type=int, default=801)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--warmup", type=float, default=1e-3,
                   help="delta warm-up time of the forward solver")
    p.add_argument("--max-iterations", dest="max_iterations", type=int, default=2000)
    p.set_defaults(fn=_cmd_rate)

    p = sub.add_parser("tail-law", help="scaled rate values across tail depths")
    _add_common(p)
    p.add_argument("--lambdas", type=lambda s: [float(v) for v in s.split(",") if v],
                   default=None, help="comma-separated depths, e.g. 4,8,16")
    p.add_argument("--n-points", dest="n_points", type=int, default=801)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--max-iterations", dest="max_iterations", type=int, default=2000)
    p.set_defaults(fn=_cmd_tail_law)

    p = sub.add_parser("limit-shape", help="tilted-height field vs the limit shape")
    _add_common(p)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--backend", choices=("pde", "mc"), default="pde")
    p.add_argument("--dx", type=float, default=0.05)
    p.add_argument("--dt", type=float, default=0.01)
    p.add_argument("--warmup", type=float, default=1e-3,
                   help="delta warm-up time of the forward solver")
    p.add_argument("--paths", type=int, default=50_000)
    p.set_defaults(fn=_cmd_limit_shape)

    p = sub.add_parser("hitting-time", help="first-hitting density table and MC histogram")
    _add_common(p)
    p.add_argument("--t", type=float, required=True)
    p.add_argument("--x", type=float, required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--paths", type=int, default=100_000)
    p.add_argument("--bins", type=int, default=200)
    p.add_argument("--steps", type=int, default=2000)
    p.set_defaults(fn=_cmd_hitting_time)

    p = sub.add_parser("fk", help="Monte Carlo Feynman-Kac estimate")
    _add_common(p)
    _add_grid_flags(p)
    _add_potential_flags(p)
    p.add_argument("--duration", type=float, required=True)
    p.add_argument("--from", dest="start", type=float, default=0.0)
    p.add_argument("--to", dest="end", type=float, default=0.0)
    p.add_argument("--paths", type=int, default=100_000)
    p.set_defaults(fn=_cmd_fk)

    p = sub.add_parser("figure1", help="limit-shape sections at t = 0.5, 1, 1.5")
    _add_common(p)
    p.set_defaults(fn=_cmd_figure1)

    p = sub.add_parser("selftest", help="run the acceptance suite")
    _add_common(p)
    p.add_argument("--quick", action="store_true", help="reduced trial counts and grids")
    p.add_argument("--criteria", type=lambda s: [int(v) for v in s.split(",") if v],
                   default=None, help="comma-separated criterion numbers (default: all)")
    p.set_defaults(fn=_cmd_selftest)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.config:
        loaded = json.loads(Path(args.config).read_text())
        for key, value in loaded.items():
            if not hasattr(args, key):
                ap.error(f"unknown config field {key!r}")
            cli_tokens = argv if argv is not None else sys.argv[1:]
            flag = "--" + key.replace("_", "-")
            if not any(tok == flag or tok.startswith(flag + "=") for tok in cli_tokens):
                setattr(args, key, value)
    if getattr(args, "subcommand", None) == "tail-law" and not args.lambdas:
        ap.error("--lambdas must be a non-empty list for tail-law")
    if args.out is None:
        args.out = _default_out()
    try:
        return args.fn(args)
    except (ValueError, bridge.ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
