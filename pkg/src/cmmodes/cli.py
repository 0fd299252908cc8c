"""Command-line interface.

Exit codes: 0 success, 2 parse/config error, 3 solver error, 4 non-convergence.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import CmmError, ParseError, ValidationError
from .harness import RunSpec, compare, run
from .solver import SolveConfig

EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_NO_CONVERGENCE = 4


def _add_common(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--mesh", help="path to an OFF or OBJ mesh")
    src.add_argument("--generate", help="generator spec, e.g. lshape:m=8 or sphere:level=2")
    p.add_argument("--mu", type=float, default=0.02, help="compression parameter (>= 0)")
    p.add_argument("--k", type=int, default=10, help="number of modes")
    p.add_argument("--variant", choices=["admm", "fast_admm"], default="fast_admm")
    p.add_argument("--init", choices=["random", "eigen"], default="random")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mass", choices=["lumped", "unlumped"], default="lumped")
    p.add_argument("--rho0", type=float, default=None,
                   help="initial penalty; default scales off the K-th eigenvalue")
    p.add_argument("--eps-abs", type=float, default=1e-8)
    p.add_argument("--eps-rel", type=float, default=1e-6)
    p.add_argument("--eta", type=float, default=0.999)
    p.add_argument("--max-iter", type=int, default=20000)
    p.add_argument("--restart-rule", choices=["paper", "goldstein"], default="paper")
    p.add_argument("--order", choices=["compressed", "dirichlet"], default="compressed")
    p.add_argument("--flip", choices=["extremum", "integral", "none"], default="extremum")
    p.add_argument("--out", default="out", help="output directory")


def _spec_from_args(args) -> RunSpec:
    cfg = SolveConfig(
        mu=args.mu,
        k=args.k,
        rho0=args.rho0,
        eps_abs=args.eps_abs,
        eps_rel=args.eps_rel,
        eta=args.eta,
        max_iter=args.max_iter,
        init=args.init,
        seed=args.seed,
        variant=args.variant,
        restart_rule=args.restart_rule,
    )
    try:
        cfg.validate()
    except ValueError as exc:
        raise SystemExit(_config_error(str(exc)))
    return RunSpec(
        mesh_path=args.mesh,
        generate=args.generate,
        mass=args.mass,
        order_by=args.order,
        flip=args.flip,
        config=cfg,
    )


def _config_error(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return EXIT_CONFIG


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="cmmodes",
                                     description="Compressed manifold modes via accelerated ADMM")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="single solve")
    _add_common(p_run)
    p_run.add_argument("--ply-mode", type=int, default=None,
                       help="write modes.ply colored by this mode index (0-based)")

    p_cmp = sub.add_parser("compare", help="paired fast vs vanilla runs over seeds")
    _add_common(p_cmp)
    p_cmp.add_argument("--seeds", required=True,
                       help="comma-separated seed list, e.g. 1,2,3")

    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else 0

    try:
        spec = _spec_from_args(args)
    except SystemExit as exc:
        return exc.code

    try:
        if args.command == "run":
            modes, trace, report = run(spec, args.out, ply_mode=args.ply_mode)
            print(f"iterations: {report.iterations}  converged: {report.converged}")
            print(f"compressed eigenvalues: {report.eigenvalues}")
            if not report.converged:
                return EXIT_NO_CONVERGENCE
            return 0
        # compare
        try:
            seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
        except ValueError:
            return _config_error(f"bad --seeds value {args.seeds!r}")
        try:
            report = compare(spec, seeds)
        except ValueError as exc:
            return _config_error(str(exc))
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "comparison.json", "w") as fh:
            json.dump(report.to_dict(), fh, indent=2)
        print(f"median iteration reduction: {report.median_iter_reduction:.1f}%")
        print(f"mean iteration reduction:   {report.mean_iter_reduction:.1f}%")
        return 0
    except (ParseError, ValidationError, FileNotFoundError) as exc:
        return _config_error(str(exc))
    except (CmmError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
