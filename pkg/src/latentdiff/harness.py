"""Batch experiment harness.

Three pipelines built on the same job runner: alpha sweeps comparing the
query-wise and feature-wise merge routes, encyclopedia-style hybrid
pages, and motion-hull traversals over control frames. Every run writes
a manifest that embeds the exact jobs (seed, operators, weights) plus
latent digests, so replay_manifest can regenerate and verify outputs
byte for byte later.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from .backends import get_backend
from .captions import NULL_CAPTIONER_ID, NullCaptioner, get_caption_client
from .errors import (
    ArityMismatch,
    BadResolution,
    CaptionClientUnavailable,
    EmptySchedule,
    LatentDiffError,
    ParseError,
    SchemaError,
    ValidationError,
)
from .field_map import sample_grid
from .jobs import (
    DEFAULT_WEIGHT_CAP,
    MODES,
    GenerationJob,
    job_digest,
    job_from_dict,
    job_to_dict,
    make_job,
)
from .runner import run_generation
from .tensors import (
    LatentTensor,
    OperatorSpec,
    Weights,
    latent_digest,
    mean_abs_difference,
)

MANIFEST_NAME = "manifest.json"
MANIFEST_VERSION = 1

# How sweep divergence is measured; stated in every report because the
# number is meaningless without the metric.
SWEEP_METRIC = "mean absolute elementwise difference of final latents"


# -- shared helpers ------------------------------------------------------------

def _load_json(path: str | Path) -> Any:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"invalid JSON in {path}: line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc


def _require_keys(doc: Mapping[str, Any], allowed: set[str], required: set[str], what: str) -> None:
    if not isinstance(doc, Mapping):
        raise SchemaError(f"{what} must be a JSON object")
    unknown = set(doc) - allowed
    if unknown:
        key = sorted(unknown)[0]
        raise SchemaError(f"unknown {what} field {key!r}", field=key)
    for key in sorted(required):
        if key not in doc:
            raise SchemaError(f"missing required {what} field {key!r}", field=key)


def _slug(text: str, limit: int = 24) -> str:
    cleaned = re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-")
    return cleaned[:limit] or "concept"


def _write_manifest(out_dir: Path, doc: dict[str, Any]) -> Path:
    path = out_dir / MANIFEST_NAME
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _entry(name: str, job: GenerationJob, result, rel_dir: str) -> dict[str, Any]:
    return {
        "name": name,
        "dir": rel_dir,
        "job": job_to_dict(job),
        "digest": result.job_digest,
        "latent_digest": latent_digest(result.final_latent),
        "failed": False,
    }


def _failed_entry(name: str, job: GenerationJob | None, rel_dir: str, error: Exception) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "name": name,
        "dir": rel_dir,
        "failed": True,
        "error": f"{type(error).__name__}: {error}",
    }
    if job is not None:
        doc["job"] = job_to_dict(job)
        doc["digest"] = job_digest(job)
    return doc


# -- alpha sweeps --------------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    """Two prompts interpolated across an alpha grid, run under one or
    both merge modes, optionally with a control reference attached."""

    prompts: tuple[str, str]
    resolution: int
    modes: tuple[str, ...] = MODES
    control_ref: str | None = None
    backend_id: str = "mock-v1"
    seed: int = 0
    steps: int = 5

    def __post_init__(self):
        object.__setattr__(self, "prompts", tuple(self.prompts))
        object.__setattr__(self, "modes", tuple(self.modes))
        if len(self.prompts) != 2 or not all(isinstance(p, str) and p for p in self.prompts):
            raise ValidationError("need exactly two nonempty prompts", field="prompts")
        if not isinstance(self.resolution, int) or self.resolution < 3:
            raise BadResolution(
                f"sweep resolution must be >= 3 (to include an interior point), got {self.resolution!r}"
            )
        if not self.modes:
            raise ValidationError("need at least one mode", field="modes")
        if len(set(self.modes)) != len(self.modes):
            raise ValidationError("modes must be distinct", field="modes")
        for m in self.modes:
            if m not in MODES:
                raise ValidationError(f"mode must be one of {MODES}", field="modes")
        if self.control_ref is not None and (
            not isinstance(self.control_ref, str) or not self.control_ref
        ):
            raise ValidationError("control_ref must be a nonempty string", field="control")
        if not isinstance(self.steps, int) or self.steps < 1:
            raise ValidationError("steps must be a positive integer", field="steps")


def sweep_spec_from_dict(doc: Mapping[str, Any]) -> SweepSpec:
    allowed = {"prompts", "resolution", "modes", "control", "backend", "seed", "steps"}
    _require_keys(doc, allowed, {"prompts", "resolution"}, "sweep spec")
    prompts = doc["prompts"]
    if not isinstance(prompts, list) or len(prompts) != 2:
        raise SchemaError("prompts must be a list of two strings", field="prompts")
    modes = doc.get("modes", list(MODES))
    if not isinstance(modes, list):
        raise SchemaError("modes must be a list", field="modes")
    return SweepSpec(
        prompts=tuple(prompts),
        resolution=doc["resolution"],
        modes=tuple(modes),
        control_ref=doc.get("control"),
        backend_id=doc.get("backend", "mock-v1"),
        seed=doc.get("seed", 0),
        steps=doc.get("steps", 5),
    )


def load_sweep_spec(path: str | Path) -> SweepSpec:
    return sweep_spec_from_dict(_load_json(path))


@dataclass
class SweepReport:
    """Cross-mode comparison along the alpha grid.

    mode_diffs[(controlled, alpha)] holds the pairwise difference between
    the two merge routes at that grid point; endpoint_max_diff is the
    worst deviation of any mode's endpoint run from the matching
    single-prompt baseline.
    """

    metric: str
    alphas: list[float]
    cells: list[dict[str, Any]]
    mode_diffs: list[dict[str, Any]]
    endpoint_max_diff: float
    endpoint_agreement: bool
    mid_alpha: float | None
    mid_divergence: float | None
    failures: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "metric": self.metric,
            "alphas": self.alphas,
            "mode_diffs": self.mode_diffs,
            "endpoint_max_diff": self.endpoint_max_diff,
            "endpoint_agreement": self.endpoint_agreement,
            "mid_alpha": self.mid_alpha,
            "mid_divergence": self.mid_divergence,
            "failures": self.failures,
        }


def _sweep_job(spec: SweepSpec, mode: str, alpha: float, controlled: bool) -> GenerationJob:
    return make_job(
        list(spec.prompts),
        seed=spec.seed,
        steps=spec.steps,
        backend_id=spec.backend_id,
        controls=[spec.control_ref] if controlled else [],
        mode=mode,
        concept_op=OperatorSpec.lerp(alpha),
    )


def _baseline_job(spec: SweepSpec, prompt: str, controlled: bool) -> GenerationJob:
    return make_job(
        [prompt],
        seed=spec.seed,
        steps=spec.steps,
        backend_id=spec.backend_id,
        controls=[spec.control_ref] if controlled else [],
    )


def run_sweep(spec: SweepSpec, out_dir: str | Path) -> SweepReport:
    """Run the full grid and assemble the divergence report.

    Endpoint cells are compared against single-prompt baselines; the
    interior point nearest alpha 0.5 carries the headline divergence
    number. Failed cells are recorded and skipped in the statistics.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    backend = get_backend(spec.backend_id)
    alphas = [w.values[1] for w in sample_grid(2, spec.resolution)]
    variants = [False] + ([True] if spec.control_ref else [])

    entries: list[dict[str, Any]] = []
    latents: dict[tuple[bool, str, float], LatentTensor] = {}
    baselines: dict[tuple[bool, int], LatentTensor] = {}
    failures = 0

    for controlled in variants:
        tag = "ctl" if controlled else "raw"
        for endpoint, prompt in enumerate(spec.prompts):
            name = f"baseline_{tag}_p{endpoint}"
            job = _baseline_job(spec, prompt, controlled)
            cell_dir = out / "cells" / name
            result = run_generation(backend, job, cell_dir)
            baselines[(controlled, endpoint)] = result.final_latent
            entries.append(_entry(name, job, result, f"cells/{name}"))
        for mode in spec.modes:
            for i, alpha in enumerate(alphas):
                name = f"{tag}_{mode}_{i:03d}"
                cell_dir = out / "cells" / name
                job = _sweep_job(spec, mode, alpha, controlled)
                try:
                    result = run_generation(backend, job, cell_dir)
                except LatentDiffError as exc:
                    failures += 1
                    entries.append(_failed_entry(name, job, f"cells/{name}", exc))
                    continue
                latents[(controlled, mode, alpha)] = result.final_latent
                cell = _entry(name, job, result, f"cells/{name}")
                cell.update({"mode": mode, "alpha": alpha, "controlled": controlled})
                entries.append(cell)

    mode_diffs: list[dict[str, Any]] = []
    endpoint_max = 0.0
    for controlled in variants:
        for alpha in alphas:
            got = [
                (mode, latents.get((controlled, mode, alpha))) for mode in spec.modes
            ]
            present = [(m, t) for m, t in got if t is not None]
            if len(spec.modes) >= 2 and len(present) == 2:
                diff = mean_abs_difference(present[0][1], present[1][1])
                mode_diffs.append(
                    {"alpha": alpha, "controlled": controlled, "diff": diff}
                )
            for endpoint, target_alpha in ((0, 0.0), (1, 1.0)):
                if alpha == target_alpha:
                    base = baselines[(controlled, endpoint)]
                    for _, tensor in present:
                        endpoint_max = max(
                            endpoint_max, mean_abs_difference(tensor, base)
                        )

    mid_alpha = None
    mid_divergence = None
    if mode_diffs:
        nearest = min(mode_diffs, key=lambda d: abs(d["alpha"] - 0.5))
        mid_alpha = nearest["alpha"]
        mid_divergence = nearest["diff"]

    report = SweepReport(
        metric=SWEEP_METRIC,
        alphas=alphas,
        cells=[e for e in entries if not e["name"].startswith("baseline_")],
        mode_diffs=mode_diffs,
        endpoint_max_diff=endpoint_max,
        endpoint_agreement=endpoint_max <= 1e-6,
        mid_alpha=mid_alpha,
        mid_divergence=mid_divergence,
        failures=failures,
    )
    _write_manifest(
        out,
        {
            "version": MANIFEST_VERSION,
            "kind": "sweep",
            "entries": entries,
            "report": report.to_dict(),
        },
    )
    return report


# -- encyclopedia pages --------------------------------------------------------

@dataclass(frozen=True)
class PediaPair:
    concepts: tuple[str, str]
    weights: Weights

    def __post_init__(self):
        object.__setattr__(self, "concepts", tuple(self.concepts))
        if len(self.concepts) != 2 or not all(
            isinstance(c, str) and c for c in self.concepts
        ):
            raise ValidationError("a pair needs two nonempty concepts", field="concepts")
        if self.concepts[0] == self.concepts[1]:
            raise ValidationError(
                f"pair concepts must be distinct, got {self.concepts[0]!r} twice",
                field="concepts",
            )
        if self.weights.arity != 2:
            raise ArityMismatch("pair weights must have arity 2", field="weights")


@dataclass(frozen=True)
class PediaSchedule:
    pairs: tuple[PediaPair, ...]
    caption_client_id: str = NULL_CAPTIONER_ID
    page_template: str | None = None
    backend_id: str = "mock-v1"
    seed: int = 0
    steps: int = 5

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(self.pairs))
        if not self.pairs:
            raise EmptySchedule("schedule has no concept pairs")


def pedia_schedule_from_dict(doc: Mapping[str, Any]) -> PediaSchedule:
    allowed = {"pairs", "caption_client", "page_template", "backend", "seed", "steps"}
    _require_keys(doc, allowed, {"pairs"}, "schedule")
    raw_pairs = doc["pairs"]
    if not isinstance(raw_pairs, list):
        raise SchemaError("pairs must be a list", field="pairs")
    pairs = []
    for i, entry in enumerate(raw_pairs):
        where = f"pairs[{i}]"
        _require_keys(entry, {"concepts", "alpha", "weights"}, {"concepts"}, where)
        if "alpha" in entry and "weights" in entry:
            raise SchemaError("give alpha or weights, not both", field=f"{where}.alpha")
        if "alpha" in entry:
            weights = Weights.from_alpha(float(entry["alpha"]))
        elif "weights" in entry:
            weights = Weights(tuple(float(v) for v in entry["weights"]))
        else:
            weights = Weights.from_alpha(0.5)
        concepts = entry["concepts"]
        if not isinstance(concepts, list):
            raise SchemaError("concepts must be a list", field=f"{where}.concepts")
        pairs.append(PediaPair(tuple(concepts), weights))
    return PediaSchedule(
        pairs=tuple(pairs),
        caption_client_id=doc.get("caption_client", NULL_CAPTIONER_ID),
        page_template=doc.get("page_template"),
        backend_id=doc.get("backend", "mock-v1"),
        seed=doc.get("seed", 0),
        steps=doc.get("steps", 5),
    )


def load_pedia_schedule(path: str | Path) -> PediaSchedule:
    return pedia_schedule_from_dict(_load_json(path))


def run_infinitepedia(schedule: PediaSchedule, out_dir: str | Path) -> list[dict[str, Any]]:
    """Generate one encyclopedia page per concept pair.

    Each page is a directory holding the blended generation (query-wise
    merge of the two concept prompts), a caption sidecar, and a page
    manifest. A missing caption client degrades to the deterministic
    stub and the page is flagged, not failed.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    degraded = False
    try:
        client = get_caption_client(schedule.caption_client_id)
    except CaptionClientUnavailable:
        client = NullCaptioner()
        degraded = True

    backend = get_backend(schedule.backend_id)
    entries = []
    pages = []
    for i, pair in enumerate(schedule.pairs):
        name = f"{i:03d}_{_slug(pair.concepts[0])}_{_slug(pair.concepts[1])}"
        page_dir = out / "pages" / name
        job = make_job(
            list(pair.concepts),
            seed=schedule.seed,
            steps=schedule.steps,
            backend_id=schedule.backend_id,
            mode="query_wise",
            concept_op=OperatorSpec("lerp", pair.weights),
        )
        try:
            result = run_generation(backend, job, page_dir)
        except LatentDiffError as exc:
            entries.append(_failed_entry(name, job, f"pages/{name}", exc))
            continue
        caption = client.caption(pair.concepts, pair.weights)
        (page_dir / "caption.txt").write_text(caption + "\n", encoding="utf-8")
        page = {
            "concepts": list(pair.concepts),
            "weights": list(pair.weights.values),
            "digest": result.job_digest,
            "latent_digest": latent_digest(result.final_latent),
            "caption_client": client.client_id,
            "caption_degraded": degraded,
            "template": schedule.page_template,
            "files": {"preview": "preview.ppm", "caption": "caption.txt", "latent": "final.ltt"},
        }
        (page_dir / "page.json").write_text(
            json.dumps(page, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        pages.append(page)
        entry = _entry(name, job, result, f"pages/{name}")
        entry["caption_degraded"] = degraded
        entries.append(entry)

    _write_manifest(
        out,
        {
            "version": MANIFEST_VERSION,
            "kind": "pedia",
            "caption_client": client.client_id,
            "caption_degraded": degraded,
            "entries": entries,
        },
    )
    return pages


# -- motion traversal ----------------------------------------------------------

@dataclass(frozen=True)
class MotionSpec:
    """Ordered motion frames (as control references) plus a list of
    affine weight points to visit over their hull. Points outside [0,1]
    extrapolate beyond the recorded motion."""

    frames: tuple[str, ...]
    traversal: tuple[Weights, ...]
    prompt: str = "figure in motion"
    backend_id: str = "mock-v1"
    seed: int = 0
    steps: int = 5
    weight_cap: float = DEFAULT_WEIGHT_CAP

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        object.__setattr__(self, "traversal", tuple(self.traversal))
        if len(self.frames) < 2:
            raise ValidationError("need at least two frames", field="frames")
        if not all(isinstance(f, str) and f for f in self.frames):
            raise ValidationError("frames must be nonempty strings", field="frames")
        if not self.traversal:
            raise ValidationError("traversal must visit at least one point", field="traversal")
        for i, w in enumerate(self.traversal):
            if w.arity != len(self.frames):
                raise ArityMismatch(
                    f"traversal point {i} has arity {w.arity}, expected {len(self.frames)}",
                    field=f"traversal[{i}]",
                )
        if not isinstance(self.prompt, str) or not self.prompt:
            raise ValidationError("prompt must be a nonempty string", field="prompt")


def motion_spec_from_dict(doc: Mapping[str, Any]) -> MotionSpec:
    allowed = {"frames", "traversal", "prompt", "backend", "seed", "steps", "weight_cap"}
    _require_keys(doc, allowed, {"frames", "traversal"}, "motion spec")
    frames = doc["frames"]
    if not isinstance(frames, list):
        raise SchemaError("frames must be a list", field="frames")
    raw = doc["traversal"]
    if not isinstance(raw, list):
        raise SchemaError("traversal must be a list of weight vectors", field="traversal")
    traversal = []
    for i, point in enumerate(raw):
        if not isinstance(point, list):
            raise SchemaError(
                "traversal points must be lists of numbers", field=f"traversal[{i}]"
            )
        traversal.append(Weights(tuple(float(v) for v in point)))
    kwargs = {}
    if "prompt" in doc:
        kwargs["prompt"] = doc["prompt"]
    if "weight_cap" in doc:
        kwargs["weight_cap"] = float(doc["weight_cap"])
    return MotionSpec(
        frames=tuple(frames),
        traversal=tuple(traversal),
        backend_id=doc.get("backend", "mock-v1"),
        seed=doc.get("seed", 0),
        steps=doc.get("steps", 5),
        **kwargs,
    )


def load_motion_spec(path: str | Path) -> MotionSpec:
    return motion_spec_from_dict(_load_json(path))


def run_latent_motion(spec: MotionSpec, out_dir: str | Path) -> list[dict[str, Any]]:
    """Traverse the frame hull: one generation per weight point, with the
    shape operator combining the frames' conditioning biases.

    The manifest flags each point as inside or outside the hull; points
    whose weights exceed the cap are reported per frame and do not stop
    the sequence.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    backend = get_backend(spec.backend_id)
    entries = []
    points = []
    for k, weights in enumerate(spec.traversal):
        name = f"point_{k:03d}"
        point_dir = out / "points" / name
        job = None
        try:
            job = make_job(
                [spec.prompt],
                seed=spec.seed,
                steps=spec.steps,
                backend_id=spec.backend_id,
                controls=list(spec.frames),
                shape_op=OperatorSpec("affine", weights),
                weight_cap=spec.weight_cap,
            )
            result = run_generation(backend, job, point_dir)
        except LatentDiffError as exc:
            entry = _failed_entry(name, job, f"points/{name}", exc)
            entry.update({"weights": list(weights.values), "inside": weights.interior})
            entries.append(entry)
            points.append(entry)
            continue
        entry = _entry(name, job, result, f"points/{name}")
        entry.update({"weights": list(weights.values), "inside": weights.interior})
        entries.append(entry)
        points.append(entry)

    _write_manifest(
        out,
        {
            "version": MANIFEST_VERSION,
            "kind": "motion",
            "frames": list(spec.frames),
            "prompt": spec.prompt,
            "entries": entries,
        },
    )
    return points


# -- replay --------------------------------------------------------------------

def read_manifest(out_dir: str | Path) -> dict[str, Any]:
    doc = _load_json(Path(out_dir) / MANIFEST_NAME)
    if not isinstance(doc, dict) or doc.get("version") != MANIFEST_VERSION:
        raise ParseError(f"unsupported manifest in {out_dir}")
    return doc


def replay_manifest(out_dir: str | Path) -> list[dict[str, Any]]:
    """Re-run every job recorded in a manifest and verify the latents.

    Returns one check per entry: ok means the regenerated latent's
    digest equals the recorded one, byte for byte. Entries that failed
    during the original run are skipped.
    """
    manifest = read_manifest(out_dir)
    checks = []
    for entry in manifest.get("entries", []):
        if entry.get("failed"):
            continue
        job, _ = job_from_dict(entry["job"])
        backend = get_backend(job.backend_id)
        result = run_generation(backend, job)
        actual = latent_digest(result.final_latent)
        checks.append(
            {
                "name": entry["name"],
                "expected": entry["latent_digest"],
                "actual": actual,
                "ok": actual == entry["latent_digest"],
            }
        )
    return checks
