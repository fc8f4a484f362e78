"""Convergence regions under model mismatch, evaluated on 2-D parameter slices."""

from __future__ import annotations

import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .gaussian import (
    IdealSpec,
    LinearGaussianModel,
    NumericalError,
    ValidationError,
    as_matrix,
    spectral_radius,
)
from .stationary import DesignModel, StationaryPolicy, stationary_policy

MEMBER, NONMEMBER, SYNTH_FAIL = "member", "nonmember", "synth_fail"

_AXIS_RE = re.compile(r"^(true|design)\.(A|B)(?:\[(\d+),(\d+)\])?$")


class SynthesisFailure(NumericalError):
    """Riccati synthesis failed at a design point."""


_policy_cache: dict[tuple, StationaryPolicy] = {}


def cached_policy(design_A, design_B, ideal: IdealSpec) -> StationaryPolicy:
    """Stationary policy for ``(A~, B~)``; memoized since grids revisit designs."""
    A = as_matrix(design_A, "design A")
    B = as_matrix(design_B, "design B")
    if B.shape[0] != A.shape[0] and B.shape == (1, A.shape[0]):
        B = B.T
    key = (A.tobytes(), A.shape, B.tobytes(), B.shape,
           ideal.state_cov.tobytes(), ideal.input_cov.tobytes())
    pol = _policy_cache.get(key)
    if pol is None:
        design = DesignModel(A, B, np.eye(A.shape[0]))
        try:
            pol = stationary_policy(design, ideal)
        except NumericalError as exc:
            raise SynthesisFailure(str(exc)) from exc
        if len(_policy_cache) > 200_000:
            _policy_cache.clear()
        _policy_cache[key] = pol
    return pol


def _pair(pair):
    if isinstance(pair, LinearGaussianModel):
        return pair.A, pair.B
    A, B = pair
    A = as_matrix(A, "A")
    B = as_matrix(B, "B")
    if B.shape[0] != A.shape[0] and B.shape == (1, A.shape[0]):
        B = B.T
    return A, B


def convergence_indicator(true_pair, design_point, ideal: IdealSpec) -> float:
    """Spectral radius of the true plant under the policy synthesized for the design.

    A value below 1 means the design point lies in the convergence region of
    the true pair. Raises :class:`SynthesisFailure` when the design point
    admits no Riccati solution.
    """
    A, B = _pair(true_pair)
    dA, dB = _pair(design_point)
    if dA.shape != A.shape or dB.shape != B.shape:
        raise ValidationError("true and design pairs have different dimensions")
    pol = cached_policy(dA, dB, ideal)
    return spectral_radius(A + B @ pol.gain)


@dataclass(frozen=True)
class KnowledgeSet:
    """Finite discretization of the set of plausible true pairs."""

    pairs: tuple

    def __post_init__(self):
        pairs = tuple(_pair(p) for p in self.pairs)
        if not pairs:
            raise ValidationError("knowledge set must be non-empty")
        shape = (pairs[0][0].shape, pairs[0][1].shape)
        for A, B in pairs:
            if (A.shape, B.shape) != shape:
                raise ValidationError("knowledge set pairs have inconsistent dimensions")
        object.__setattr__(self, "pairs", pairs)


def robust_indicator(knowledge: KnowledgeSet, design_point, ideal: IdealSpec) -> float:
    """Worst-case convergence indicator over the knowledge set."""
    return max(convergence_indicator(p, design_point, ideal) for p in knowledge.pairs)


@dataclass(frozen=True)
class AxisRef:
    model: str  # "true" or "design"
    matrix: str  # "A" or "B"
    row: int = 0
    col: int = 0

    @classmethod
    def parse(cls, text: str) -> "AxisRef":
        match = _AXIS_RE.match(text.strip().replace(" ", ""))
        if not match:
            raise ValidationError(f"bad axis {text!r}; expected e.g. 'design.B[0,0]'")
        model, mat, i, j = match.groups()
        return cls(model, mat, int(i or 0), int(j or 0))

    def __str__(self):
        return f"{self.model}.{self.matrix}[{self.row},{self.col}]"


@dataclass(frozen=True)
class ParamSlice2D:
    """Two swept matrix entries over boxes; everything else fixed at the base models."""

    axis1: AxisRef
    axis2: AxisRef
    range1: tuple[float, float]
    range2: tuple[float, float]
    true_model: LinearGaussianModel
    design: LinearGaussianModel

    def __post_init__(self):
        for name in ("axis1", "axis2"):
            ax = getattr(self, name)
            if isinstance(ax, str):
                ax = AxisRef.parse(ax)
                object.__setattr__(self, name, ax)
            base = self.true_model if ax.model == "true" else self.design
            mat = getattr(base, ax.matrix)
            if not (0 <= ax.row < mat.shape[0] and 0 <= ax.col < mat.shape[1]):
                raise ValidationError(f"axis {ax} is out of bounds for shape {mat.shape}")
        if self.axis1 == self.axis2:
            raise ValidationError("the two axes must differ")
        for name in ("range1", "range2"):
            lo, hi = (float(v) for v in getattr(self, name))
            if not hi > lo:
                raise ValidationError(f"{name} must satisfy lo < hi, got {(lo, hi)}")
            object.__setattr__(self, name, (lo, hi))
        if self.true_model.A.shape != self.design.A.shape or self.true_model.B.shape != self.design.B.shape:
            raise ValidationError("true and design models have different dimensions")

    @property
    def lower(self) -> np.ndarray:
        return np.array([self.range1[0], self.range2[0]])

    @property
    def upper(self) -> np.ndarray:
        return np.array([self.range1[1], self.range2[1]])

    def contains(self, point) -> bool:
        p = np.asarray(point, dtype=float)
        return bool(np.all(p >= self.lower) and np.all(p <= self.upper))

    def pairs_at(self, v1: float, v2: float):
        """``((A, B), (A~, B~))`` with the two swept entries set."""
        mats = {
            ("true", "A"): self.true_model.A.copy(),
            ("true", "B"): self.true_model.B.copy(),
            ("design", "A"): self.design.A.copy(),
            ("design", "B"): self.design.B.copy(),
        }
        for ax, v in ((self.axis1, v1), (self.axis2, v2)):
            mats[(ax.model, ax.matrix)][ax.row, ax.col] = v
        return ((mats[("true", "A")], mats[("true", "B")]),
                (mats[("design", "A")], mats[("design", "B")]))


def slice_indicator(
    slc: ParamSlice2D, ideal: IdealSpec, knowledge: KnowledgeSet | None = None
) -> Callable[[float, float], float]:
    """Indicator on the slice: single-plant, or worst case over ``knowledge``.

    With a knowledge set, swept ``true.*`` axes are ignored and the pairs
    of the set stand in for the plant.
    """

    def indicator(v1: float, v2: float) -> float:
        true_pair, design_pair = slc.pairs_at(v1, v2)
        if knowledge is not None:
            return robust_indicator(knowledge, design_pair, ideal)
        return convergence_indicator(true_pair, design_pair, ideal)

    return indicator


@dataclass(frozen=True)
class RegionGrid:
    """Indicator values on a tensor grid; ``values[i, j]`` sits at ``(axis1[i], axis2[j])``."""

    axis1: np.ndarray
    axis2: np.ndarray
    values: np.ndarray
    labels: np.ndarray
    extras: dict = field(default_factory=dict)

    def rows(self):
        for i, a in enumerate(self.axis1):
            for j, b in enumerate(self.axis2):
                yield i, j, a, b


def grid_scan(
    slc: ParamSlice2D,
    indicator: Callable[[float, float], float],
    resolution: int | Sequence[int],
    level: float = 1.0,
    workers: int = 1,
) -> RegionGrid:
    """Evaluate ``indicator`` on a ``res1 x res2`` grid and label each node.

    Nodes where synthesis fails get the ``synth_fail`` label and a NaN value.
    """
    res = (resolution, resolution) if np.isscalar(resolution) else tuple(resolution)
    if len(res) != 2 or min(res) < 2:
        raise ValidationError("resolution must be >= 2 per axis")
    ax1 = np.linspace(*slc.range1, int(res[0]))
    ax2 = np.linspace(*slc.range2, int(res[1]))

    def row(i):
        vals = np.empty(ax2.size)
        labs = []
        for j, b in enumerate(ax2):
            try:
                v = float(indicator(ax1[i], b))
            except SynthesisFailure:
                vals[j] = np.nan
                labs.append(SYNTH_FAIL)
                continue
            vals[j] = v
            labs.append(MEMBER if v < level else NONMEMBER)
        return vals, labs

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(row, range(ax1.size)))
    else:
        out = [row(i) for i in range(ax1.size)]
    values = np.stack([o[0] for o in out])
    labels = np.array([o[1] for o in out], dtype=object)
    return RegionGrid(ax1, ax2, values, labels)
