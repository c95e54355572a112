"""Weight-space field mapping.

Walks a simplex grid over an operator's weights, runs one generation per
grid point, scores each outcome, and labels regions as meaningful,
ambiguous or desert. The emitted map is a stable JSON artifact: sorted
keys, floats printed with nine significant digits, so identical requests
produce byte-identical files.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Protocol

import numpy as np

from .backends import get_backend
from .errors import (
    ArityMismatch,
    BackendUnavailable,
    BadResolution,
    BadThresholds,
    IoError,
    LatentDiffError,
    ParseError,
    ValidationError,
)
from .jobs import GenerationJob, GenerationResult, job_with_weights
from .runner import run_generation
from .tensors import Weights

REGIONS = ("desert", "ambiguous", "meaningful")
DEFAULT_THRESHOLDS = (0.25, 0.6)
FIELDMAP_VERSION = 1
AXES = ("concept", "shape")

# Declared for real-runtime workflows; scoring it needs a vision model,
# so requesting it without one is a backend problem, not a typo.
EXTERNAL_SCORER_IDS = ("clip-similarity",)


def q9(value: float) -> float:
    """Quantize to nine significant decimal digits.

    Applied to every float that lands in a field map so that the
    serialized form round-trips to exactly the in-memory value.
    """
    return float(format(float(value), ".9g"))


# -- grid ----------------------------------------------------------------------

def sample_grid(arity: int, resolution: int) -> list[Weights]:
    """All affine weight tuples on the evaluation grid.

    Arity 2 is the classic alpha sweep: `resolution` evenly spaced alpha
    values mapped to (1-alpha, alpha). Higher arity enumerates every
    lattice point of the standard simplex with denominator resolution-1,
    in ascending lexicographic order of the integer compositions. The
    point count follows the stars-and-bars closed form
    C(resolution+arity-2, arity-1).
    """
    if not isinstance(arity, int) or isinstance(arity, bool) or arity < 2:
        raise ArityMismatch(f"grid arity must be an integer >= 2, got {arity!r}")
    if not isinstance(resolution, int) or isinstance(resolution, bool) or resolution < 2:
        raise BadResolution(f"resolution must be an integer >= 2, got {resolution!r}")
    if arity == 2:
        alphas = np.linspace(0.0, 1.0, resolution)
        return [Weights((1.0 - float(a), float(a))) for a in alphas]
    denom = resolution - 1
    points: list[Weights] = []

    def descend(prefix: list[int], remaining: int, slots: int) -> None:
        if slots == 1:
            counts = prefix + [remaining]
            points.append(Weights(tuple(k / denom for k in counts)))
            return
        for k in range(remaining + 1):
            descend(prefix + [k], remaining - k, slots - 1)

    descend([], denom, arity)
    return points


def grid_size(arity: int, resolution: int) -> int:
    """Closed-form count matching sample_grid's enumeration."""
    if arity == 2:
        return resolution
    return math.comb(resolution + arity - 2, arity - 1)


# -- classification ------------------------------------------------------------

def check_thresholds(t_low: float, t_high: float) -> None:
    ok = (
        isinstance(t_low, (int, float))
        and isinstance(t_high, (int, float))
        and math.isfinite(t_low)
        and math.isfinite(t_high)
        and 0.0 <= t_low < t_high <= 1.0
    )
    if not ok:
        raise BadThresholds(
            f"need 0 <= t_low < t_high <= 1, got ({t_low!r}, {t_high!r})"
        )


def classify(score: float, t_low: float, t_high: float) -> str:
    """Three-way split: below t_low is desert, t_high and above is
    meaningful, anything between is ambiguous."""
    check_thresholds(t_low, t_high)
    if not math.isfinite(score):
        raise ValidationError(f"score must be finite, got {score!r}", field="score")
    if score < t_low:
        return "desert"
    if score >= t_high:
        return "meaningful"
    return "ambiguous"


# -- scoring -------------------------------------------------------------------

class Scorer(Protocol):
    scorer_id: str

    def score(self, result: GenerationResult, reference: GenerationResult) -> float: ...


def _channel_means(result: GenerationResult) -> np.ndarray:
    data = result.final_latent.data
    return data.reshape(data.shape[0], -1).mean(axis=1, dtype=np.float64)


class LatentMeanDistance:
    """Mock-friendly scorer: one minus the normalized euclidean distance
    between per-channel latent means of the sample and the reference
    output. Distance d maps to d/(1+d), so the score is 1/(1+d): the
    reference itself scores 1 and drifting far from it approaches 0.
    """

    scorer_id = "latent-mean-distance"

    def score(self, result: GenerationResult, reference: GenerationResult) -> float:
        d = float(np.linalg.norm(_channel_means(result) - _channel_means(reference)))
        return 1.0 / (1.0 + d)


_SCORERS = {"latent-mean-distance": LatentMeanDistance}


def available_scorers() -> tuple[str, ...]:
    return tuple(sorted(_SCORERS)) + EXTERNAL_SCORER_IDS


def get_scorer(scorer_id: str) -> Scorer:
    factory = _SCORERS.get(scorer_id)
    if factory is not None:
        return factory()
    if scorer_id in EXTERNAL_SCORER_IDS:
        raise BackendUnavailable(
            f"scorer {scorer_id!r} needs an external model runtime"
        )
    raise ValidationError(f"unknown scorer {scorer_id!r}", field="scorer")


# -- map structure -------------------------------------------------------------

@dataclass(frozen=True)
class FieldSample:
    coords: Weights
    score: float
    region: str
    failed: bool = False

    def __post_init__(self):
        if self.region not in REGIONS:
            raise ValidationError(f"unknown region {self.region!r}", field="region")


@dataclass(frozen=True)
class FieldMap:
    axis: str
    resolution: int
    scorer_id: str
    thresholds: tuple[float, float]
    samples: tuple[FieldSample, ...]

    def __post_init__(self):
        check_thresholds(*self.thresholds)
        object.__setattr__(self, "samples", tuple(self.samples))
        object.__setattr__(
            self, "thresholds", (float(self.thresholds[0]), float(self.thresholds[1]))
        )

    def region_counts(self) -> dict[str, int]:
        counts = {r: 0 for r in REGIONS}
        for s in self.samples:
            counts[s.region] += 1
        return counts


def reclassify(field_map: FieldMap, t_low: float, t_high: float) -> FieldMap:
    """Relabel every sample under new thresholds without re-running any
    generation; scores are already cached in the map."""
    check_thresholds(t_low, t_high)
    samples = tuple(
        replace(s, region=s.region if s.failed else classify(s.score, t_low, t_high))
        for s in field_map.samples
    )
    return replace(field_map, thresholds=(q9(t_low), q9(t_high)), samples=samples)


# -- building ------------------------------------------------------------------

def build_field_map(
    job_template: GenerationJob,
    axis: str,
    resolution: int,
    scorer: Scorer | str = "latent-mean-distance",
    thresholds: tuple[float, float] = DEFAULT_THRESHOLDS,
    workers: int = 1,
) -> FieldMap:
    """Evaluate the template across the weight grid of one operator.

    The axis names the operator whose weights vary ("concept" or
    "shape"); its arity comes from the template's input count. Grid
    points run independently (optionally across a thread pool) and a
    failed point is recorded as a desert with the failed flag set rather
    than sinking the whole map. Sample order is always grid order.
    """
    if isinstance(scorer, str):
        scorer = get_scorer(scorer)
    check_thresholds(*thresholds)
    if axis not in AXES:
        raise ValidationError(f"axis must be one of {AXES}", field="axis")
    if axis == "concept":
        if job_template.concept_registration is None:
            raise ValidationError("template has no concept operator", field="concept_op")
        arity = job_template.prompt_count
    else:
        if job_template.shape_registration is None:
            raise ValidationError("template has no shape operator", field="shape_op")
        arity = job_template.control_count
    grid = sample_grid(arity, resolution)

    backend = get_backend(job_template.backend_id)
    reference_weights = Weights(tuple(1.0 if i == 0 else 0.0 for i in range(arity)))
    reference = run_generation(backend, job_with_weights(job_template, axis, reference_weights))

    def evaluate(weights: Weights) -> FieldSample:
        try:
            job = job_with_weights(job_template, axis, weights)
            result = run_generation(backend, job)
            score = q9(scorer.score(result, reference))
        except LatentDiffError:
            return FieldSample(_q9_weights(weights), 0.0, "desert", failed=True)
        return FieldSample(
            _q9_weights(weights), score, classify(score, *thresholds)
        )

    if workers <= 1:
        samples = [evaluate(w) for w in grid]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            samples = list(pool.map(evaluate, grid))

    return FieldMap(
        axis=axis,
        resolution=resolution,
        scorer_id=scorer.scorer_id,
        thresholds=(q9(thresholds[0]), q9(thresholds[1])),
        samples=tuple(samples),
    )


def _q9_weights(weights: Weights) -> Weights:
    return Weights(tuple(q9(v) for v in weights.values))


# -- serialization -------------------------------------------------------------

def _emit(value) -> str:
    """Canonical JSON fragment: sorted keys, floats at nine significant
    digits, no whitespace. Deliberately tiny; the schema is flat."""
    if value is None:
        return "null"
    if value is True:
        return "true"
    if value is False:
        return "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format(value, ".9g")
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(_emit(v) for v in value) + "]"
    if isinstance(value, dict):
        parts = (
            json.dumps(k, ensure_ascii=False) + ":" + _emit(value[k])
            for k in sorted(value)
        )
        return "{" + ",".join(parts) + "}"
    raise TypeError(f"cannot serialize {type(value).__name__}")


def fieldmap_to_text(field_map: FieldMap) -> str:
    samples = []
    for s in field_map.samples:
        doc = {
            "coords": list(s.coords.values),
            "score": s.score,
            "region": s.region,
        }
        if s.failed:
            doc["failed"] = True
        samples.append(doc)
    doc = {
        "version": FIELDMAP_VERSION,
        "axis": field_map.axis,
        "resolution": field_map.resolution,
        "scorer_id": field_map.scorer_id,
        "thresholds": list(field_map.thresholds),
        "samples": samples,
    }
    return _emit(doc) + "\n"


def export_field_map(field_map: FieldMap, path: str | Path) -> None:
    try:
        Path(path).write_text(fieldmap_to_text(field_map), encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot write field map to {path}: {exc}") from exc


def fieldmap_from_dict(doc) -> FieldMap:
    if not isinstance(doc, dict):
        raise ParseError("field map must be a JSON object")
    if doc.get("version") != FIELDMAP_VERSION:
        raise ParseError(f"unsupported field map version {doc.get('version')!r}")
    known = {"version", "axis", "resolution", "scorer_id", "thresholds", "samples"}
    unknown = set(doc) - known
    if unknown:
        raise ParseError(f"unknown field map key {sorted(unknown)[0]!r}")
    try:
        t_low, t_high = doc["thresholds"]
        check_thresholds(float(t_low), float(t_high))
        samples = []
        for entry in doc["samples"]:
            extra = set(entry) - {"coords", "score", "region", "failed"}
            if extra:
                raise ParseError(f"unknown sample key {sorted(extra)[0]!r}")
            samples.append(
                FieldSample(
                    coords=Weights(tuple(float(v) for v in entry["coords"])),
                    score=float(entry["score"]),
                    region=entry["region"],
                    failed=bool(entry.get("failed", False)),
                )
            )
        return FieldMap(
            axis=doc["axis"],
            resolution=int(doc["resolution"]),
            scorer_id=doc["scorer_id"],
            thresholds=(float(t_low), float(t_high)),
            samples=tuple(samples),
        )
    except ParseError:
        raise
    except (KeyError, TypeError, ValueError, LatentDiffError) as exc:
        raise ParseError(f"malformed field map: {exc}") from exc


def import_field_map(path: str | Path) -> FieldMap:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read field map {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"invalid JSON in {path}: line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    return fieldmap_from_dict(doc)
