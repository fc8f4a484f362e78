"""Command-line entry point: ``fpdcontrol <subcommand> --config PATH [--out PATH] [--seed N]``.

Exit codes: 0 success, 1 validation or usage error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import csvio, experiments
from .config import load_config
from .gaussian import NumericalError, ValidationError

log = logging.getLogger("fpdcontrol")

DEFAULT_OUT = {
    "synthesize": "policy.csv",
    "simulate": "stats.csv",
    "mismatch": "mismatch.csv",
    "region-convergence": "region.csv",
    "region-safety": "region.csv",
    "learn": "learn.csv",
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fpdcontrol", description="KL-optimal control for linear-Gaussian systems.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "synthesize": "finite-horizon policy gains and covariances per step",
        "simulate": "Monte Carlo ensemble under the configured policy",
        "mismatch": "exact-model vs design-model controllers on common noise",
        "region-convergence": "grid scan of the convergence region, optional boundary trace",
        "region-safety": "(M, delta)-safety labels over the parameter slice",
        "learn": "certainty-equivalence control along a learning schedule",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", type=Path, default=None)
        p.add_argument("--seed", type=int, default=None, help="override [ensemble] seed (unsigned)")
        p.add_argument("--workers", type=int, default=1)
        if name == "region-convergence":
            p.add_argument("--boundary-out", type=Path, default=None)
    return parser


def _run(args) -> list[Path]:
    cfg = load_config(args.config)
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ValidationError("--seed must be an unsigned 64-bit integer")
        cfg = cfg.with_seed(args.seed)
    if args.workers < 1:
        raise ValidationError("--workers must be >= 1")
    out = args.out or Path(DEFAULT_OUT[args.command])
    written: list[Path] = []
    cmd = args.command
    if cmd == "synthesize":
        written.append(csvio.write_policy(out, experiments.finite_policy(cfg)))
    elif cmd == "simulate":
        stats = experiments.run_ensemble(cfg, workers=args.workers)
        written.append(csvio.write_stats(out, stats))
        written.append(csvio.write_histogram(csvio.sibling(out, "hist"), stats))
    elif cmd == "mismatch":
        res = experiments.run_mismatch_experiment(cfg, workers=args.workers)
        written.append(csvio.write_mismatch(out, res))
        log.info("gain ratio %.4f, mean |u| ratio %.4f", res.gain_ratio, res.mean_abs_input_ratio)
    elif cmd == "region-convergence":
        grid, curves = experiments.run_region_convergence(cfg, workers=args.workers)
        written.append(csvio.write_region(out, grid))
        base = args.boundary_out or out.with_name("boundary.csv")
        for k, curve in enumerate(curves):
            path = base if k == 0 else csvio.sibling(base, str(k + 1))
            written.append(csvio.write_boundary(path, curve))
            log.info("boundary %d: %d points, %s", k + 1, len(curve), curve.status)
    elif cmd == "region-safety":
        grid = experiments.run_region_safety(cfg, workers=args.workers)
        written.append(csvio.write_region(out, grid, safety=True))
    elif cmd == "learn":
        plan, stats = experiments.run_learning(cfg, workers=args.workers)
        written.append(csvio.write_learning(out, plan, stats))
    return written


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        written = _run(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    for path in written:
        log.info("wrote %s", path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
