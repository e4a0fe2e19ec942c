"""
Command-line surface: ``python manage.py solve|symmetric|mms|verify``.

Exit codes: 0 success, 1 usage, I/O or solver error (divergence, failed
sparse solve), 2 iteration limit reached, 3 failed verification.
"""
from __future__ import annotations

import argparse
import json
import logging
import logging.config
import math
from pathlib import Path
from typing import Dict, List, Optional

from pydantic import BaseModel, ValidationError

from vvs_backend import settings

from .errors import ClosureError, DivergenceError, FluxViolationError, LinearSolveError, NewtonError
from .manufactured import convergence_study, eps_study, level_sizes
from .reconstruct import momentum_residual, run_case, write_state_csv
from .schemas import SymmetricReport, load_case
from .symmetric import (
    PiecewiseProfile,
    concentric_constants,
    concentric_profile,
    concentric_viscosity,
    couette_constants,
    couette_profile,
    couette_viscosity,
    radial_bvp,
    radial_example,
    symmetric_stream_residual,
)
from .verification import run_verification

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NOT_CONVERGED = 2
EXIT_VERIFICATION_FAILED = 3


def _write_json(model: BaseModel, path: Path) -> Path:
    path.write_text(model.json(indent=2) + "\n", encoding="utf-8")
    return path


def _out_dir(args: argparse.Namespace, fallback: Path) -> Path:
    out = Path(args.out_dir) if args.out_dir else fallback
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------
def cmd_solve(args: argparse.Namespace) -> int:
    config = Path(args.config)
    spec = load_case(config)
    out = _out_dir(args, config.parent)
    matrix_path = out / f"{spec.name}_oseen.mtx" if settings.WRITE_MATRIX else None

    result = run_case(spec, matrix_path)
    r_l2, r_max = momentum_residual(result.u, result.rho, result.mu, result.Pi, spec.force)
    csv_path = write_state_csv(result, out / f"{spec.name}_state.csv")
    report_path = _write_json(result.report, out / f"{spec.name}_report.json")

    print(f"{spec.name}: {result.report.iterations} iterations, converged={result.report.converged}")
    print(f"  pressure compatibility {result.compat:.6e}, momentum residual L2 {r_l2:.6e} max {r_max:.6e}")
    print(f"  wrote {csv_path} and {report_path}")
    return EXIT_OK if result.report.converged else EXIT_NOT_CONVERGED


# ---------------------------------------------------------------------------
# symmetric
# ---------------------------------------------------------------------------
def _tag(params: Dict[str, float]) -> str:
    return "_".join(f"{k}{v:g}" for k, v in params.items())


def _symmetric_couette(args) -> tuple:
    params = {"am": args.a_minus, "ap": args.a_plus, "c1": args.c1}
    C, C2 = couette_constants(args.a_minus, args.a_plus, args.c1)
    profile = couette_profile(C, args.c1, C2)
    residual = symmetric_stream_residual("couette", profile, couette_viscosity(), C=C)
    return params, {"C": C, "C1": args.c1, "C2": C2}, profile, residual


def _symmetric_concentric(args) -> tuple:
    params = {"gm": args.g_minus, "gp": args.g_plus, "c1": args.c1}
    C, C2 = concentric_constants(args.g_minus, args.g_plus, args.c1)
    profile = concentric_profile(C, args.c1, C2)
    residual = symmetric_stream_residual("concentric", profile, concentric_viscosity(), C=C)
    return params, {"C": C, "C1": args.c1, "C2": C2}, profile, residual


def _symmetric_radial(args) -> tuple:
    if args.example:
        h, rho, mu = radial_example()
        profile = radial_bvp(rho, mu, 0.0, h.value(0.0), h.value(math.pi / 2.0), args.n_theta)
        theta = [0.0, math.pi / 8.0, 3.0 * math.pi / 8.0, math.pi / 2.0]
        error = max(abs(profile.value(t) - h.value(t)) for t in theta)
        residual = symmetric_stream_residual("radial", h, mu, rho, C=0.0)
        return {"example": 1.0, "n": float(args.n_theta)}, {"C": 0.0, "max_error": error}, profile, residual
    rho = PiecewiseProfile.constant("theta", args.rho, 0.0, args.theta_right)
    mu = PiecewiseProfile.constant("theta", args.mu, 0.0, args.theta_right)
    profile = radial_bvp(rho, mu, args.C, args.h_left, args.h_right, args.n_theta)
    residual = symmetric_stream_residual("radial", profile, mu, rho, C=args.C)
    params = {"hl": args.h_left, "hr": args.h_right, "C": args.C, "rho": args.rho, "mu": args.mu}
    return params, {"C": args.C}, profile, residual


def cmd_symmetric(args: argparse.Namespace) -> int:
    builder = {
        "couette": _symmetric_couette,
        "concentric": _symmetric_concentric,
        "radial": _symmetric_radial,
    }[args.family]
    params, constants, profile, residual = builder(args)
    out = _out_dir(args, Path.cwd())
    stem = f"{args.family}_{_tag(params)}"
    csv_path = out / f"{stem}.csv"
    profile.to_frame(args.samples).to_csv(
        csv_path, index=False, float_format=settings.CSV_FLOAT_FORMAT, lineterminator="\n"
    )
    report = SymmetricReport(family=args.family, constants=constants, residual=residual, profile_csv=csv_path.name)
    _write_json(report, out / f"{stem}_report.json")
    for key, value in constants.items():
        print(f"{key} = {value:.17g}")
    print(f"residual = {residual:.3e}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# mms
# ---------------------------------------------------------------------------
def cmd_mms(args: argparse.Namespace) -> int:
    out = _out_dir(args, Path.cwd())
    if args.eps_study:
        rows = eps_study(args.coarsest)
        payload = [row.dict() for row in rows]
        (out / "mms_eps_study.json").write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        for row in rows:
            print(f"eps={row.eps:.4e}  change={row.change:.3e}  error={row.error:.3e}")
        return EXIT_OK

    if args.levels < 2:
        logging.error(f"mms needs at least two levels, got {args.levels}")
        return EXIT_USAGE
    study = convergence_study(level_sizes(args.levels, args.coarsest), not args.constant_mu)
    _write_json(study, out / f"mms_{study.case}.json")
    for level in study.levels:
        print(f"n={level.n:4d}  h={level.h:.4e}  error={level.error:.6e}  iterations={level.iterations}")
    print("observed orders: " + ", ".join(f"{p:.3f}" for p in study.orders))
    if not all(level.converged for level in study.levels):
        return EXIT_NOT_CONVERGED
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------
def cmd_verify(args: argparse.Namespace) -> int:
    out = Path(args.out_dir) if args.out_dir else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        marker = out / ".write_check"
        marker.write_text("", encoding="utf-8")
        marker.unlink()
    summary = run_verification(args.only)
    for r in summary.results:
        print(f"[{'PASS' if r.passed else 'FAIL'}] {r.criterion}. {r.name} ({r.wall_ms:.0f} ms): {r.detail}")
    if out is not None:
        _write_json(summary, out / "verification.json")
    return EXIT_OK if summary.passed else EXIT_VERIFICATION_FAILED


# ---------------------------------------------------------------------------
# Parser and entry point
# ---------------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", default=None, help="Directory for output files")
    common.add_argument("--quiet", action="store_true", help="Only log warnings and errors")

    parser = argparse.ArgumentParser(
        prog="manage.py", description="Variable-viscosity stream-function solver"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", parents=[common], help="Solve a JSON case file")
    solve.add_argument("config", help="Path to the case JSON")
    solve.set_defaults(handler=cmd_solve)

    sym = sub.add_parser("symmetric", parents=[common], help="Closed-form symmetric profiles")
    sym.add_argument("family", choices=["couette", "concentric", "radial"])
    sym.add_argument("--a-minus", type=float, default=1.0, help="Couette: u1(-1)")
    sym.add_argument("--a-plus", type=float, default=2.0, help="Couette: u1(1)")
    sym.add_argument("--g-minus", type=float, default=1.0, help="Concentric: g(1/2)")
    sym.add_argument("--g-plus", type=float, default=2.0, help="Concentric: g(2)")
    sym.add_argument("--c1", type=float, default=0.0, help="Free flux constant C1")
    sym.add_argument("--example", action="store_true", help="Radial: use the built-in example")
    sym.add_argument("--h-left", type=float, default=0.0)
    sym.add_argument("--h-right", type=float, default=1.0)
    sym.add_argument("--theta-right", type=float, default=math.pi / 4.0)
    sym.add_argument("--rho", type=float, default=0.0, help="Radial: constant density")
    sym.add_argument("--mu", type=float, default=1.0, help="Radial: constant viscosity")
    sym.add_argument("--C", type=float, default=0.0, help="Radial: family constant")
    sym.add_argument("--n-theta", type=int, default=512)
    sym.add_argument("--samples", type=int, default=201, help="Rows in the profile CSV")
    sym.set_defaults(handler=cmd_symmetric)

    mms = sub.add_parser("mms", parents=[common], help="Manufactured-solution convergence study")
    mms.add_argument("--levels", type=int, default=3)
    mms.add_argument("--coarsest", type=int, default=17, help="Nodes per axis on the coarsest grid")
    mms.add_argument("--constant-mu", action="store_true", help="Use constant viscosity")
    mms.add_argument("--eps-study", action="store_true", help="Vary the mollifier radius instead")
    mms.set_defaults(handler=cmd_mms)

    verify = sub.add_parser("verify", parents=[common], help="Run the acceptance suite")
    verify.add_argument("--only", type=int, nargs="*", default=None, help="Criterion numbers to run")
    verify.set_defaults(handler=cmd_verify)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    logging.config.dictConfig(settings.LOGGING)
    if args.quiet:
        logging.getLogger().setLevel(logging.WARNING)

    try:
        return args.handler(args)
    except (ValidationError, json.JSONDecodeError, FluxViolationError, ClosureError, NewtonError) as exc:
        logging.error(f"{args.command} failed: {exc}")
        return EXIT_USAGE
    except (DivergenceError, LinearSolveError) as exc:
        # exit 2 only means the iteration limit was reached
        logging.error(f"{args.command} aborted: {exc}")
        return EXIT_USAGE
    except (ValueError, OSError):
        logging.exception(f"{args.command} failed")
        return EXIT_USAGE
