"""Command line entry point ``mot``.

Exit codes: 0 success, 1 negative verdict, 2 input or validation error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from contextlib import nullcontext
from pathlib import Path

from .admm import run
from .calib import extract_sigma2, summarize
from .config import build_densities, parse_config
from .density import check_convex_order, density_from_calls, normalize
from .exceptions import NumericalError, ValidationError
from .io import read_chain, read_density, write_density, write_residuals, write_rho, write_surface
from .lattice import Lattice

log = logging.getLogger("motcal")

EXIT_OK, EXIT_VERDICT, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3


def _thread_limit():
    n = os.environ.get("MOT_THREADS")
    if not n:
        return nullcontext()
    try:
        count = int(n)
    except ValueError:
        log.warning("ignoring non-integer MOT_THREADS=%r", n)
        return nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=max(count, 1))


def cmd_calibrate(args) -> int:
    started = time.perf_counter()
    try:
        cfg = parse_config(args.config)
        densities = build_densities(cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    out_dir = Path(args.out) if args.out else (cfg.resolve(cfg.output_dir) if cfg.output_dir else None)
    if out_dir is None:
        print("error: no output directory (use --out or output.directory)", file=sys.stderr)
        return EXIT_INPUT

    every = max(1, cfg.solver.max_iter // 20)

    def progress(rec):
        if rec.iteration == 1 or rec.iteration % every == 0:
            log.info("iter %5d  residual %.3e  primal gap %.3e", *rec)

    try:
        state, report = run(cfg.solver, densities, cfg.cost, cfg.lattice, callback=progress)
        surface = extract_sigma2(state, cfg.mask_fraction)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    out_dir.mkdir(parents=True, exist_ok=True)
    write_surface(out_dir / "surface.csv", cfg.lattice, state.rho, state.m, surface)
    write_rho(out_dir / "rho.csv", cfg.lattice, state.rho)
    write_residuals(out_dir / "residuals.csv", report)
    summary = {
        "iterations_used": report.iterations_used,
        "final_residual": report.final_residual,
        "converged": report.converged,
        "primal_gap": report.primal_gap,
        **summarize(surface),
        "wall_time_seconds": time.perf_counter() - started,
    }
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    log.info("wrote results to %s", out_dir)
    return EXIT_OK


def _lattice_from_args(args) -> Lattice:
    return Lattice(args.nt, args.nx, args.xlo, args.xhi)


def cmd_density(args) -> int:
    try:
        lattice = _lattice_from_args(args)
        strikes, prices = read_chain(args.chain)
        rho = density_from_calls(strikes, prices, lattice)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    write_density(args.out, lattice.x, rho)
    return EXIT_OK


def cmd_check_order(args) -> int:
    try:
        x0, r0 = read_density(args.rho0)
        x1, r1 = read_density(args.rho1)
        if x0.shape != x1.shape or (x0 != x1).any():
            raise ValidationError("density files are on different grids")
        lattice = Lattice(3, x0.size, float(x0[0]), float(x0[-1]))
        if abs(lattice.x - x0).max() > 1e-9 * lattice.length:
            raise ValidationError("density grid must be uniform")
        verdict = check_convex_order(normalize(r0, lattice), normalize(r1, lattice), lattice)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if verdict.holds:
        print("convex order holds")
        return EXIT_OK
    where = f" (first violating strike: {verdict.strike:.17g})" if verdict.strike is not None else ""
    print(f"convex order fails: {verdict.reason}{where}")
    return EXIT_VERDICT


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mot", description="Martingale optimal transport local-volatility calibration")
    p.add_argument("-q", "--quiet", action="store_true", help="only print warnings and errors")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("calibrate", help="run the ADMM calibration from a JSON config")
    c.add_argument("--config", required=True, help="JSON run configuration")
    c.add_argument("--out", help="output directory (overrides output.directory)")
    c.set_defaults(func=cmd_calibrate)

    d = sub.add_parser("density", help="recover a density from a call-price chain")
    d.add_argument("--chain", required=True, help="CSV with header strike,price")
    d.add_argument("--nt", type=int, default=3, help="time nodes of the lattice (unused by the output; default 3)")
    d.add_argument("--nx", type=int, required=True, help="space nodes of the output grid")
    d.add_argument("--xlo", type=float, required=True, help="left end of the output grid")
    d.add_argument("--xhi", type=float, required=True, help="right end of the output grid")
    d.add_argument("--out", required=True, help="output CSV with header x,rho")
    d.set_defaults(func=cmd_density)

    k = sub.add_parser("check-order", help="test two densities for convex order")
    k.add_argument("--rho0", required=True, help="earlier marginal, CSV with header x,rho")
    k.add_argument("--rho1", required=True, help="later marginal on the same grid")
    k.set_defaults(func=cmd_check_order)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    with _thread_limit():
        return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
