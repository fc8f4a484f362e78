"""Experiment configuration: sectioned ``key = value`` text files.

Matrices are written row-major with ``;`` between rows, e.g. ``A = 1 0; 0 1``
or ``A = 1.27``. Unknown sections or keys are errors. See ``configs/`` for
worked examples and the README for the full schema.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .gaussian import IdealSpec, LinearGaussianModel, ValidationError
from .learning import LearningSchedule
from .regions import AxisRef, KnowledgeSet
from .stationary import DesignModel


class ConfigError(ValidationError):
    pass


SCHEMA: dict[str, set[str]] = {
    "model": {"A", "B", "noise_cov"},
    "design": {"A", "B", "noise_cov"},
    "ideal": {"state_mean", "state_cov", "input_mean", "input_cov"},
    "horizon": {"steps"},
    "ensemble": {"runs", "seed", "x0", "policy", "bins", "hist_range"},
    "region": {"axis1", "axis2", "range1", "range2", "resolution", "trace", "trace_start",
               "trace_step", "trace_tol", "trace_direction", "knowledge"},
    "safety": {"M", "delta", "x0", "t_max", "samples", "resolution"},
    "learning": {"eps1", "eps2", "eps3", "eps4", "perturbation_seed", "runs", "x0"},
}
REQUIRED = {"model", "ideal", "horizon", "ensemble"}


def parse_matrix(text: str, name: str = "matrix") -> np.ndarray:
    rows = [r for r in text.strip().split(";")]
    try:
        data = [[float(v) for v in re.split(r"[\s,]+", r.strip()) if v] for r in rows]
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {text!r} as a matrix") from None
    if not data or any(len(r) == 0 for r in data) or len({len(r) for r in data}) != 1:
        raise ConfigError(f"{name}: ragged or empty matrix {text!r}")
    return np.array(data, dtype=float)


def parse_vector(text: str, name: str = "vector") -> np.ndarray:
    return parse_matrix(text.replace(";", " "), name).ravel()


def parse_points(text: str, name: str) -> list[np.ndarray]:
    pts = [parse_vector(p, name) for p in text.split(";") if p.strip()]
    if not pts or any(p.size != 2 for p in pts):
        raise ConfigError(f"{name}: expected '; '-separated 2-D points")
    return pts


def _interval(text: str, name: str) -> tuple[float, float]:
    v = parse_vector(text, name)
    if v.size != 2 or not v[1] > v[0]:
        raise ConfigError(f"{name}: expected 'lo hi' with lo < hi, got {text!r}")
    return float(v[0]), float(v[1])


def _int(text: str, name: str, minimum: int | None = None) -> int:
    try:
        val = int(text)
    except ValueError:
        raise ConfigError(f"{name}: expected an integer, got {text!r}") from None
    if minimum is not None and val < minimum:
        raise ConfigError(f"{name}: must be >= {minimum}")
    return val


def _float(text: str, name: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{name}: expected a number, got {text!r}") from None


def _bool(text: str, name: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{name}: expected a boolean, got {text!r}")


@dataclass(frozen=True)
class RegionSection:
    axis1: AxisRef
    axis2: AxisRef
    range1: tuple[float, float]
    range2: tuple[float, float]
    resolution: tuple[int, int] = (50, 50)
    trace: bool = False
    trace_start: tuple = ()
    trace_step: float = 0.01
    trace_tol: float = 1e-8
    trace_direction: tuple[float, float] = (1.0, 0.0)
    knowledge: KnowledgeSet | None = None


@dataclass(frozen=True)
class SafetySection:
    M: float
    delta: float
    x0: np.ndarray
    t_max: int
    samples: int = 20_000
    resolution: tuple[int, int] | None = None


@dataclass(frozen=True)
class LearningSection:
    schedule: LearningSchedule
    runs: int
    x0: np.ndarray


@dataclass(frozen=True)
class ExperimentConfig:
    model: LinearGaussianModel
    ideal: IdealSpec
    horizon: int
    runs: int
    seed: int
    x0: np.ndarray
    policy: str = "finite"
    bins: int = 61
    hist_range: tuple[float, float] | None = None
    design: DesignModel | None = None
    region: RegionSection | None = None
    safety: SafetySection | None = None
    learning: LearningSection | None = None
    source: str = field(default="<string>", compare=False)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, seed=int(seed))


def _resolution(text: str, name: str) -> tuple[int, int]:
    v = parse_vector(text, name)
    if v.size == 1:
        v = np.array([v[0], v[0]])
    if v.size != 2 or np.any(v != np.round(v)) or np.any(v < 2):
        raise ConfigError(f"{name}: expected one or two integers >= 2")
    return int(v[0]), int(v[1])


def _knowledge(text: str) -> KnowledgeSet:
    # pairs separated by '|' ... '||': "A1 | B1 || A2 | B2"
    pairs = []
    for chunk in text.split("||"):
        if not chunk.strip():
            continue
        parts = chunk.split("|")
        if len(parts) != 2:
            raise ConfigError("region.knowledge: each pair is 'A | B', pairs separated by '||'")
        pairs.append((parse_matrix(parts[0], "knowledge A"), parse_matrix(parts[1], "knowledge B")))
    return KnowledgeSet(tuple(pairs))


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None, strict=True)
    cp.optionxform = str  # keys are case sensitive (A, B, M)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None

    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"{source}: unknown section [{sec}]")
        unknown = set(cp[sec]) - SCHEMA[sec]
        if unknown:
            raise ConfigError(f"{source}: unknown key(s) in [{sec}]: {', '.join(sorted(unknown))}")
    missing = REQUIRED - set(cp.sections())
    if missing:
        raise ConfigError(f"{source}: missing section(s) {', '.join(sorted(missing))}")

    def need(sec, key):
        if key not in cp[sec]:
            raise ConfigError(f"{source}: [{sec}] requires '{key}'")
        return cp[sec][key]

    model = LinearGaussianModel(parse_matrix(need("model", "A"), "model.A"),
                                parse_matrix(need("model", "B"), "model.B"),
                                parse_matrix(need("model", "noise_cov"), "model.noise_cov"))

    i = cp["ideal"]
    state_cov = parse_matrix(need("ideal", "state_cov"), "ideal.state_cov")
    input_cov = parse_matrix(need("ideal", "input_cov"), "ideal.input_cov")
    ideal = IdealSpec(
        parse_vector(i["state_mean"], "ideal.state_mean") if "state_mean" in i else np.zeros(state_cov.shape[0]),
        state_cov,
        parse_vector(i["input_mean"], "ideal.input_mean") if "input_mean" in i else np.zeros(input_cov.shape[0]),
        input_cov,
    )
    ideal.check_against(model)

    horizon = _int(need("horizon", "steps"), "horizon.steps", 1)

    e = cp["ensemble"]
    runs = _int(need("ensemble", "runs"), "ensemble.runs", 1)
    seed = _int(need("ensemble", "seed"), "ensemble.seed", 0)
    x0 = parse_vector(need("ensemble", "x0"), "ensemble.x0")
    if x0.size != model.n:
        raise ConfigError(f"ensemble.x0 has length {x0.size}, model has n={model.n}")
    policy = e.get("policy", "finite").strip()
    if policy not in ("finite", "stationary"):
        raise ConfigError("ensemble.policy must be 'finite' or 'stationary'")
    bins = _int(e.get("bins", "61"), "ensemble.bins", 1)
    hist_range = _interval(e["hist_range"], "ensemble.hist_range") if "hist_range" in e else None

    design = None
    if cp.has_section("design"):
        d = cp["design"]
        design = DesignModel(
            parse_matrix(d.get("A"), "design.A") if "A" in d else model.A,
            parse_matrix(d.get("B"), "design.B") if "B" in d else model.B,
            parse_matrix(d.get("noise_cov"), "design.noise_cov") if "noise_cov" in d else model.noise_cov,
        )
        if design.A.shape != model.A.shape or design.B.shape != model.B.shape:
            raise ConfigError("design model dimensions differ from the true model")

    region = None
    if cp.has_section("region"):
        r = cp["region"]
        kwargs = {}
        if "resolution" in r:
            kwargs["resolution"] = _resolution(r["resolution"], "region.resolution")
        if "trace" in r:
            kwargs["trace"] = _bool(r["trace"], "region.trace")
        if "trace_start" in r:
            kwargs["trace_start"] = tuple(parse_points(r["trace_start"], "region.trace_start"))
        if "trace_step" in r:
            kwargs["trace_step"] = _float(r["trace_step"], "region.trace_step")
        if "trace_tol" in r:
            kwargs["trace_tol"] = _float(r["trace_tol"], "region.trace_tol")
        if "trace_direction" in r:
            dvec = parse_vector(r["trace_direction"], "region.trace_direction")
            if dvec.size != 2 or not np.any(dvec):
                raise ConfigError("region.trace_direction must be a non-zero 2-vector")
            kwargs["trace_direction"] = (float(dvec[0]), float(dvec[1]))
        if "knowledge" in r:
            kwargs["knowledge"] = _knowledge(r["knowledge"])
        region = RegionSection(
            AxisRef.parse(need("region", "axis1")),
            AxisRef.parse(need("region", "axis2")),
            _interval(need("region", "range1"), "region.range1"),
            _interval(need("region", "range2"), "region.range2"),
            **kwargs,
        )
        if region.trace and not region.trace_start:
            raise ConfigError("region.trace = true needs region.trace_start")

    safety = None
    if cp.has_section("safety"):
        s = cp["safety"]
        sx0 = parse_vector(need("safety", "x0"), "safety.x0")
        if sx0.size != model.n:
            raise ConfigError("safety.x0 does not match the model dimension")
        safety = SafetySection(
            M=_float(need("safety", "M"), "safety.M"),
            delta=_float(need("safety", "delta"), "safety.delta"),
            x0=sx0,
            t_max=_int(need("safety", "t_max"), "safety.t_max", 1),
            samples=_int(s.get("samples", "20000"), "safety.samples", 1),
            resolution=_resolution(s["resolution"], "safety.resolution") if "resolution" in s else None,
        )
        if safety.M <= 0 or safety.delta <= 0:
            raise ConfigError("safety.M and safety.delta must be positive")

    learning = None
    if cp.has_section("learning"):
        lr = cp["learning"]
        sched = LearningSchedule(
            *(_float(lr.get(k, "0"), f"learning.{k}") for k in ("eps1", "eps2", "eps3", "eps4")),
            perturbation_seed=_int(lr.get("perturbation_seed", "0"), "learning.perturbation_seed", 0),
        )
        lx0 = parse_vector(lr["x0"], "learning.x0") if "x0" in lr else x0
        if lx0.size != model.n:
            raise ConfigError("learning.x0 does not match the model dimension")
        learning = LearningSection(sched, _int(lr.get("runs", str(runs)), "learning.runs", 1), lx0)

    return ExperimentConfig(model, ideal, horizon, runs, seed, x0, policy, bins, hist_range,
                            design, region, safety, learning, source)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text(), source=str(path))
