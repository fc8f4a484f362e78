"""Run every shipped experiment config through the CLI and collect the CSVs.

    python3 scripts/run_experiments.py [--out results] [--workers 4]
"""

import argparse
import sys
import time
from pathlib import Path

from fpdcontrol.cli import main as cli

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

# (subcommand, config, output stem)
EXPERIMENTS = [
    ("synthesize", "scalar_example.cfg", "policy"),
    ("simulate", "scalar_example.cfg", "ensemble"),
    ("mismatch", "mismatch.cfg", "mismatch"),
    ("region-convergence", "region_convergence.cfg", "region_true_vs_design_b"),
    ("region-convergence", "region_design.cfg", "region_design_pair"),
    ("region-safety", "region_safety.cfg", "safety"),
    ("learn", "learning.cfg", "learning"),
]


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=ROOT / "results")
    ap.add_argument("--workers", type=int, default=4)
    args = ap.parse_args(argv)
    args.out.mkdir(parents=True, exist_ok=True)
    for cmd, cfg, stem in EXPERIMENTS:
        t0 = time.perf_counter()
        extra = []
        if cmd == "region-convergence":
            extra = ["--boundary-out", str(args.out / f"{stem}_boundary.csv")]
        code = cli([cmd, "--config", str(CONFIGS / cfg), "--out", str(args.out / f"{stem}.csv"),
                    "--workers", str(args.workers), *extra])
        print(f"{cmd:20s} {cfg:26s} exit {code}  {time.perf_counter() - t0:6.1f}s")
        if code:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
