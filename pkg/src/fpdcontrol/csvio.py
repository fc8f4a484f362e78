"""CSV emitters. Floats are written with 17 significant digits (exact round trip)."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

NA = "NA"


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if np.isnan(x):
        return NA
    return format(x, ".17g")


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def sibling(path, suffix: str) -> Path:
    """``out/stats.csv`` -> ``out/stats_<suffix>.csv``."""
    p = Path(path)
    return p.with_name(f"{p.stem}_{suffix}{p.suffix or '.csv'}")


def stats_header(n: int) -> list[str]:
    return (["t"] + [f"mean_{i + 1}" for i in range(n)]
            + [f"cov_{i + 1}{j + 1}" for i in range(n) for j in range(n)]
            + [f"se_{i + 1}" for i in range(n)])


def write_stats(path, stats) -> Path:
    n = stats.mean.shape[1]

    def rows():
        for t in range(stats.mean.shape[0]):
            se = [NA] * n if stats.se is None else list(stats.se[t])
            yield [t, *stats.mean[t], *stats.cov[t].ravel(), *se]

    return write_csv(path, stats_header(n), rows())


def write_histogram(path, stats) -> Path:
    """One row per bin of each state coordinate at the final step."""

    def rows():
        for i in range(stats.hist_counts.shape[0]):
            edges = stats.hist_edges[i]
            for k, c in enumerate(stats.hist_counts[i]):
                yield [i + 1, edges[k], edges[k + 1], int(c)]

    return write_csv(path, ["coordinate", "bin_left", "bin_right", "count"], rows())


def write_policy(path, steps) -> Path:
    m, n = steps[0].feedback_gain.shape
    header = (["t"] + [f"F_{i + 1}{j + 1}" for i in range(m) for j in range(n)]
              + [f"g_{i + 1}" for i in range(m)]
              + [f"Sigma_u_{i + 1}{j + 1}" for i in range(m) for j in range(m)])
    rows = ([t + 1, *s.feedback_gain.ravel(), *s.affine_offset, *s.input_cov.ravel()]
            for t, s in enumerate(steps))
    return write_csv(path, header, rows)


def write_mismatch(path, result) -> Path:
    """Per-step state and input means/standard errors for both controllers."""
    n = result.exact.mean.shape[1]
    m = result.exact.input_mean.shape[1]
    header = ["t"]
    for tag in ("exact", "design"):
        header += [f"{tag}_x_mean_{i + 1}" for i in range(n)] + [f"{tag}_x_se_{i + 1}" for i in range(n)]
        header += [f"{tag}_u_mean_{i + 1}" for i in range(m)] + [f"{tag}_u_se_{i + 1}" for i in range(m)]
        header += [f"{tag}_u_absmean_{i + 1}" for i in range(m)]

    def block(st, t):
        se = [NA] * n if st.se is None else list(st.se[t])
        if t == 0:
            return [*st.mean[t], *se] + [NA] * (3 * m)
        use = [NA] * m if st.input_se is None else list(st.input_se[t - 1])
        return [*st.mean[t], *se, *st.input_mean[t - 1], *use, *st.mean_abs_input[t - 1]]

    rows = ([t, *block(result.exact, t), *block(result.design, t)] for t in range(result.exact.mean.shape[0]))
    return write_csv(path, header, rows)


def write_region(path, grid, safety: bool = False) -> Path:
    header = ["axis1", "axis2", "indicator", "label"]
    if safety:
        header += ["sup_prob", "max_mean_norm"]

    def rows():
        for i, j, a, b in grid.rows():
            row = [a, b, grid.values[i, j], grid.labels[i, j]]
            if safety:
                row += [grid.extras["sup_prob"][i, j], grid.extras["max_mean_norm"][i, j]]
            yield row

    return write_csv(path, header, rows())


def write_boundary(path, curve) -> Path:
    rows = ([p[0], p[1], r] for p, r in zip(curve.points, curve.residuals))
    return write_csv(path, ["axis1", "axis2", "residual"], rows)


def write_learning(path, plan, stats) -> Path:
    n = stats.mean.shape[1]
    header = ["t", "rho", "synth_fail"] + [f"mean_{i + 1}" for i in range(n)] + [f"se_{i + 1}" for i in range(n)]

    def rows():
        for t in range(stats.mean.shape[0]):
            se = [NA] * n if stats.se is None else list(stats.se[t])
            rho, failed = (NA, 0) if t == 0 else (plan.rho[t - 1], bool(plan.failed[t - 1]))
            yield [t, rho, failed, *stats.mean[t], *se]

    return write_csv(path, header, rows())
