"""Command-line driver.

Exit codes: 0 success, 1 usage or configuration error (including a CFL
violation), 2 numerical failure, 3 verification failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import experiments as ex
from .config import ConfigError, RunConfig, load_config, parse_config
from .diagnostics import absorbing_radius, attractor_dim_bound, decay_rate
from .diffusion import AssemblyTooLarge, assemble
from .galerkin import EigenSolverError, compute_basis, export_basis, weyl_growth_check
from .mms import format_table, spatial_convergence, temporal_convergence
from .presets import PRESETS
from .profiles import ProfileError
from .snapshot import SnapshotError
from .stepper import CFLError, NumericalError, Scheme

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_VERIFY = 0, 1, 2, 3

SPATIAL_MIN, BE_MIN, CN_MIN = 1.9, 0.9, 1.9


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit with status 2
        raise UsageError(message)


def _config(ref: str) -> RunConfig:
    p = Path(ref)
    if p.exists():
        return load_config(p)
    if ref in PRESETS:
        return parse_config(PRESETS[ref])
    raise ConfigError([f"no config file or preset named {ref!r} (presets: {', '.join(PRESETS)})"])


def cmd_run(args) -> int:
    cfg = _config(args.config)
    if args.no_cfl_check:
        from dataclasses import replace

        cfg = replace(cfg, enforce_cfl=False)
    out = Path(args.out or cfg.directory)
    out.mkdir(parents=True, exist_ok=True)
    text = Path(args.config).read_text(encoding="utf-8") if Path(args.config).exists() else PRESETS[args.config]
    (out / "config.ini").write_text(text, encoding="utf-8")
    res = ex.run_simulation(cfg, out_dir=out)
    last = res.reports[-1] if res.reports else None
    print(f"finished {res.state.step_index} steps, t = {res.state.t:.6g}")
    if last:
        print(f"|T|^2 = {last.l2_sq:.6e}  ||T||^2 = {last.v2_sq:.6e}")
    print(f"output in {out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _config(args.config)
    checks = ex.verify_suite(cfg)
    print(ex.format_checks(checks))
    ok = all(c.passed for c in checks)
    print("all checks passed" if ok else "verification FAILED")
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_eig(args) -> int:
    cfg = _config(args.config)
    if args.modes < 1:
        raise UsageError("--modes must be >= 1")
    op = assemble(cfg.grid, cfg.params)
    basis = compute_basis(op, args.modes)
    print(f"{'k':>4} {'lambda_k':>14} {'residual':>10}")
    for k, (lam, r) in enumerate(zip(basis.eigenvalues, basis.residuals), start=1):
        print(f"{k:>4} {lam:14.8e} {r:10.2e}")
    if basis.m >= 10 and basis.eigenvalues[0] > 0:
        print(f"growth constant min_k (lambda_k/lambda_1)/k = {weyl_growth_check(basis):.4e}")
    else:
        print("growth constant not reported (needs >= 10 modes and lambda_1 > 0)")
    if args.export:
        print(f"basis written to {export_basis(basis, args.export)}")
    return EXIT_OK


def cmd_mms(args) -> int:
    cfg = _config(args.config)
    if not cfg.grid.periodic:
        raise ConfigError(["[domain].lateral_mode: mms requires periodic_test"])
    if args.levels < 2:
        raise UsageError("--levels must be >= 2")
    params = cfg.params
    rows = spatial_convergence(cfg.grid.nx, args.levels, params)
    print(format_table("spatial (Crank-Nicolson, dt ~ dx)", rows))
    be = temporal_convergence(Scheme.BACKWARD_EULER_AB2, n=cfg.grid.nx, params=params)
    cn = temporal_convergence(Scheme.CRANK_NICOLSON_AB2, n=cfg.grid.nx, params=params)
    print(format_table("temporal, backward Euler", be))
    print(format_table("temporal, Crank-Nicolson", cn))
    ok = (min(r.order for r in rows[1:]) >= SPATIAL_MIN and be[-1].order >= BE_MIN
          and cn[-1].order >= CN_MIN)
    print("observed orders meet the targets" if ok else "observed orders BELOW target")
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_compare(args) -> int:
    cfg = _config(args.config)
    res = ex.compare_runs(cfg)
    out = Path(args.out or cfg.directory)
    out.mkdir(parents=True, exist_ok=True)
    ex.write_compare_csv(res, out / "compare.csv")
    peak1 = np.nanmax(res.monitor_hyper) / res.monitor_hyper[0]
    finite = res.monitor_plain[np.isfinite(res.monitor_plain)]
    peak0 = (finite.max() / res.monitor_plain[0]) if finite.size else math.inf
    print(f"lambda = {cfg.params.lam:g}: peak monitor / initial = {peak1:.3g}"
          + (f"  (stopped: {res.hyper_failure})" if res.hyper_failure else ""))
    print(f"lambda = 0: peak monitor / initial = {peak0:.3g}"
          + (f"  (stopped: {res.plain_failure})" if res.plain_failure else ""))
    print(f"monitor series written to {out / 'compare.csv'}")
    ok = res.hyper_bounded and res.plain_unstable
    print("hyper-diffusion keeps the wall layer bounded; lambda = 0 does not" if ok
          else "expected contrast NOT observed")
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_diag(args) -> int:
    run_dir = Path(args.directory)
    cfg_path = run_dir / "config.ini"
    csv_path = run_dir / "diagnostics.csv"
    if not cfg_path.exists() or not csv_path.exists():
        raise ConfigError([f"{run_dir} does not contain config.ini and diagnostics.csv from a run"])
    cfg = load_config(cfg_path)
    data = np.genfromtxt(csv_path, delimiter=",", names=True)
    data = np.atleast_1d(data)
    forcing = ex.build_forcing(cfg)
    ball = absorbing_radius(cfg.params, forcing.Tstar, forcing.Q, args.C0, args.C2, cfg.grid)
    lam1 = float(compute_basis(assemble(cfg.grid, cfg.params), 1).eigenvalues[0])
    print(f"R_tilde_a = {ball.R_tilde_a:.6e}")
    print(f"R_a       = {ball.R_a:.6e}")
    print(f"lambda_1  = {lam1:.6e}")
    if lam1 > 0:
        dim = attractor_dim_bound(ball.R_a, lam1, args.C, ball.tstar_h1_sq, ball.q_sq)
        print(f"dimension bound (C = {args.C:g}) = {dim:.6e}")
    final = float(data["l2_sq"][-1])
    print(f"final |T|^2 = {final:.6e}  ({'inside' if final <= ball.R_tilde_a else 'outside'} R_tilde_a)")
    if len(data) >= 10 and np.all(data["l2_sq"] > 0):
        fit = decay_rate(np.column_stack([data["t"], data["l2_sq"]]))
        print(f"fitted rate of log|T|^2 = {fit.rate:.6e}" + ("" if fit.monotone else "  (non-monotone)"))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pghd", description="Planetary-geostrophic hyper-diffusion simulator")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    r = sub.add_parser("run", help="time integration with snapshots and diagnostics.csv")
    r.add_argument("config")
    r.add_argument("--out")
    r.add_argument("--no-cfl-check", action="store_true", help="integrate even if dt violates CFL")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("verify", help="structural invariant suite")
    v.add_argument("config")
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("eig", help="lowest eigenpairs and growth report")
    e.add_argument("config")
    e.add_argument("--modes", type=int, default=10)
    e.add_argument("--export", help="directory for per-mode snapshots and manifest")
    e.set_defaults(func=cmd_eig)

    m = sub.add_parser("mms", help="manufactured-solution convergence table")
    m.add_argument("config")
    m.add_argument("--levels", type=int, default=3)
    m.set_defaults(func=cmd_mms)

    c = sub.add_parser("compare", help="lambda > 0 versus lambda = 0 wall monitor")
    c.add_argument("config")
    c.add_argument("--out")
    c.set_defaults(func=cmd_compare)

    d = sub.add_parser("diag", help="absorbing-ball and dimension bounds for a finished run")
    d.add_argument("directory")
    d.add_argument("--C0", type=float, required=True)
    d.add_argument("--C2", type=float, default=1.0)
    d.add_argument("--C", type=float, default=1.0)
    d.set_defaults(func=cmd_diag)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            raise UsageError("a subcommand is required")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        for msg in exc.errors:
            print(f"config error: {msg}", file=sys.stderr)
        return EXIT_USAGE
    except CFLError as exc:
        print(f"CFL violation: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ProfileError, SnapshotError, AssemblyTooLarge, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalError, EigenSolverError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
