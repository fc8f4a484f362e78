"""Predictor-corrector tracing of a level curve ``f(p) = level`` in a 2-D box.

All geometry runs in unit-box coordinates so that axes with very different
physical scales (say a gain near 1 against an input coefficient near 0.02)
get comparable step lengths. ``step`` is measured in those coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .gaussian import NumericalError, ValidationError
from .regions import ParamSlice2D

MAX_BISECT = 200


class ContinuationError(NumericalError):
    pass


@dataclass(frozen=True)
class BoundaryCurve:
    points: np.ndarray  # (k, 2), physical coordinates, ordered along the curve
    residuals: np.ndarray  # indicator - level at each point
    closed: bool
    status: str  # "closed", "exited", "max_points" or "corrector_failed: ..."
    start_index: int = 0  # row of the bisection root that seeded the trace

    def __len__(self):
        return self.points.shape[0]


class _Box:
    def __init__(self, lower, upper, f, level):
        self.lo = np.asarray(lower, dtype=float)
        self.span = np.asarray(upper, dtype=float) - self.lo
        self.f = f
        self.level = level
        self.evals = 0

    def to_phys(self, s):
        return self.lo + s * self.span

    def to_unit(self, p):
        return (np.asarray(p, dtype=float) - self.lo) / self.span

    def g(self, s) -> float:
        """Signed residual ``f - level`` at unit coordinates ``s``."""
        self.evals += 1
        p = self.to_phys(s)
        return float(self.f(p[0], p[1])) - self.level

    def inside(self, s) -> bool:
        return bool(np.all(s >= -1e-12) and np.all(s <= 1 + 1e-12))

    def gradient(self, s, h=1e-6) -> np.ndarray:
        e0, e1 = np.array([h, 0.0]), np.array([0.0, h])
        return np.array([
            (self.g(s + e0) - self.g(s - e0)) / (2 * h),
            (self.g(s + e1) - self.g(s - e1)) / (2 * h),
        ])


def _bisect(box: _Box, a, b, ga, gb, tol):
    """Root of the residual on segment ``[a, b]`` given opposite signs at the ends."""
    for _ in range(MAX_BISECT):
        mid = 0.5 * (a + b)
        gm = box.g(mid)
        if abs(gm) <= tol:
            return mid, gm
        if np.sign(gm) == np.sign(ga):
            a, ga = mid, gm
        else:
            b, gb = mid, gm
        if np.max(np.abs(b - a)) < 1e-15:
            break
    # steep crossings can stall at machine resolution; keep the better end
    for p, gp in ((a, ga), (b, gb)):
        if abs(gp) <= tol:
            return p, gp
    raise ContinuationError(f"bisection stalled with residual {min(abs(ga), abs(gb)):.3g} > tol")


def _correct(box: _Box, q, normal, reach, tol):
    """Bisect along ``q + s * normal`` for a root, widening the bracket up to ``reach``."""
    gq = box.g(q)
    if abs(gq) <= tol:
        return q, gq
    r = reach / 8
    while r <= reach * (1 + 1e-12):
        for sgn in (1.0, -1.0):
            p = q + sgn * r * normal
            gp = box.g(p)
            if np.sign(gp) != np.sign(gq) or abs(gp) <= tol:
                if abs(gp) <= tol:
                    return p, gp
                return _bisect(box, q, p, gq, gp, tol)
        r *= 2
    raise ContinuationError("no sign change along the normal")


def _tangent(box: _Box, s, prev=None):
    grad = box.gradient(s)
    norm = np.linalg.norm(grad)
    if not np.isfinite(norm) or norm == 0.0:
        raise ContinuationError("vanishing gradient; the level curve is singular here")
    normal = grad / norm
    t = np.array([-normal[1], normal[0]])
    if prev is not None and t @ prev < 0:
        t = -t
    return t, normal


def find_crossing(box: _Box, hint, direction, tol, reach=1.0, probes=200):
    """Scan outward from ``hint`` along +/- ``direction`` (unit coords) for a crossing, then bisect."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    g0 = box.g(hint)
    if abs(g0) <= tol:
        return hint, g0
    ds = reach / probes
    for k in range(1, probes + 1):
        for sgn in (1.0, -1.0):
            prev = hint + sgn * (k - 1) * ds * d
            p = hint + sgn * k * ds * d
            if not box.inside(p):
                continue
            gp = box.g(p)
            gprev = box.g(prev)
            if np.sign(gp) != np.sign(gprev) or abs(gp) <= tol:
                if abs(gp) <= tol:
                    return p, gp
                return _bisect(box, prev, p, gprev, gp, tol)
    raise ContinuationError("no crossing of the level found near the start hint")


def _march(box, s0, t0, step, tol, max_points, start):
    pts, res = [], []
    s, t = s0, t0
    while len(pts) < max_points:
        q = s + step * t
        _, normal = _tangent(box, q, t)
        try:
            s_new, g_new = _correct(box, q, normal, step, tol)
        except ContinuationError as exc:
            return pts, res, f"corrector_failed: {exc}"
        if not box.inside(s_new):
            return pts, res, "exited"
        pts.append(s_new)
        res.append(g_new)
        if len(pts) > 2 and np.linalg.norm(s_new - start) < step:
            return pts, res, "closed"
        t, _ = _tangent(box, s_new, s_new - s)
        s = s_new
    return pts, res, "max_points"


def trace_boundary(
    slc: ParamSlice2D | None,
    indicator: Callable[[float, float], float],
    start_hint,
    step: float = 0.01,
    tol: float = 1e-8,
    level: float = 1.0,
    search_direction=(1.0, 0.0),
    max_points: int = 5000,
    bounds=None,
) -> BoundaryCurve:
    """Trace ``indicator == level`` through ``start_hint`` across the slice.

    The first point is a bisection root found by scanning from the hint
    along ``search_direction``. From there the curve is followed both ways
    until it closes on itself, leaves the box, or ``max_points`` is hit.
    ``bounds`` (``(lower, upper)``) replaces the slice box when ``slc`` is
    ``None``, which lets the tracer run on any scalar field of two variables.
    """
    if step <= 0 or tol <= 0:
        raise ValidationError("step and tol must be positive")
    if slc is not None:
        lower, upper = slc.lower, slc.upper
    elif bounds is not None:
        lower, upper = bounds
    else:
        raise ValidationError("need a slice or explicit bounds")
    box = _Box(lower, upper, indicator, level)
    hint = box.to_unit(start_hint)
    direction = np.asarray(search_direction, dtype=float)
    s0, g0 = find_crossing(box, hint, direction, tol)
    t0, _ = _tangent(box, s0)

    fwd, fres, fstatus = _march(box, s0, t0, step, tol, max_points - 1, s0)
    pts, res = [s0] + fwd, [g0] + fres
    status = fstatus
    start_index = 0
    if fstatus != "closed":
        back, bres, bstatus = _march(box, s0, -t0, step, tol, max_points - len(pts), s0)
        pts = back[::-1] + pts
        start_index = len(back)
        res = bres[::-1] + res
        status = fstatus if fstatus.startswith("corrector") else bstatus
    points = np.array([box.to_phys(s) for s in pts])
    return BoundaryCurve(points, np.array(res), status == "closed", status, start_index)
