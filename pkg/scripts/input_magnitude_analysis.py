"""Compare input magnitudes of the exact-model and design-model controllers.

Prints several candidate "input ratio" summaries for the mismatch config:
the gain ratio (inputs at matched states), the ratio of time-averaged
``E|u_t|``, of ``|E u_t|``, and the stationary prediction
``sqrt(k^2 S + Sigma_u)`` for each loop.

    python3 scripts/input_magnitude_analysis.py [--config configs/mismatch.cfg]
"""

import argparse
from pathlib import Path

import numpy as np

from fpdcontrol.config import load_config
from fpdcontrol.experiments import run_mismatch_experiment
from fpdcontrol.stationary import stationary_state_cov

ROOT = Path(__file__).resolve().parents[1]


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", type=Path, default=ROOT / "configs" / "mismatch.cfg")
    ap.add_argument("--workers", type=int, default=4)
    args = ap.parse_args(argv)
    cfg = load_config(args.config)
    res = run_mismatch_experiment(cfg, workers=args.workers)

    def stationary_sd(design, pol):
        S = stationary_state_cov(cfg.model, design, pol)
        k = pol.gain
        return float(np.sqrt((k @ S @ k.T + pol.input_cov)[0, 0]))

    sd_exact = stationary_sd(cfg.model, res.exact_policy)
    sd_design = stationary_sd(cfg.design, res.design_policy)
    abs_mean = lambda st: float(np.abs(st.input_mean).mean())
    print(f"gain ratio (matched states)       {res.gain_ratio:.4f}")
    print(f"time-averaged E|u| ratio          {res.mean_abs_input_ratio:.4f}")
    print(f"time-averaged |E u| ratio         {abs_mean(res.design) / abs_mean(res.exact):.4f}")
    print(f"stationary sd(u) ratio (Gaussian) {sd_design / sd_exact:.4f}")


if __name__ == "__main__":
    main()
