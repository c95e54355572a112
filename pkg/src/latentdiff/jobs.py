"""Generation jobs: validation, canonical encoding, digests, and the
`.job.json` file schema.

A job is the unit of reproducibility: prompts, controls, seed, step
count, operator bindings and backend selection. Its digest is FNV-1a
64-bit over a canonical key-sorted JSON encoding, so any implementation
can recompute it; output paths are not part of the identity.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

from .errors import (
    LatentDiffError,
    ParseError,
    SchemaError,
    ValidationError,
    WeightCapExceeded,
)
from .pipeline import BackendTopology, HookRegistration, HookSite
from .rng import fnv1a_64
from .tensors import LatentTensor, OperatorSpec, Weights

JOB_VERSION = 1
MODES = ("query_wise", "feature_wise")

# Guard against numerically absurd extrapolation: max |weight| per job.
DEFAULT_WEIGHT_CAP = 4.0

_JOB_KEYS = {
    "version",
    "backend",
    "seed",
    "steps",
    "mode",
    "prompts",
    "controls",
    "concept_op",
    "shape_op",
    "weight_cap",
    "output_dir",
}
_OP_KEYS = {"kind", "weights", "alpha", "schedule", "block"}


@dataclass(frozen=True)
class GenerationJob:
    backend_id: str
    seed: int
    steps: int
    prompts: tuple[str, ...]
    controls: tuple[str, ...] = ()
    concept_registration: HookRegistration | None = None
    shape_registration: HookRegistration | None = None
    mode: str = "query_wise"
    weight_cap: float = DEFAULT_WEIGHT_CAP

    def __post_init__(self):
        object.__setattr__(self, "prompts", tuple(self.prompts))
        object.__setattr__(self, "controls", tuple(self.controls))

    @property
    def prompt_count(self) -> int:
        return len(self.prompts)

    @property
    def control_count(self) -> int:
        return len(self.controls)


@dataclass
class GenerationResult:
    final_latent: LatentTensor
    preview_bytes: bytes
    hook_counters: dict[str, int]
    job_digest: str
    timings: dict[str, float] = field(default_factory=dict)
    preview_path: Path | None = None


def concept_site_kind(mode: str) -> str:
    """The site the concept operator occupies: attention queries in
    query_wise mode, the embedding stage in the feature_wise baseline."""
    return "feature_embedding" if mode == "feature_wise" else "concept_query"


# -- construction helpers ------------------------------------------------------

def make_job(
    prompts,
    seed: int = 0,
    steps: int = 5,
    backend_id: str = "mock-v1",
    controls=(),
    mode: str = "query_wise",
    concept_op: OperatorSpec | None = None,
    shape_op: OperatorSpec | None = None,
    concept_block: int | None = None,
    shape_block: int | None = None,
    weight_cap: float = DEFAULT_WEIGHT_CAP,
) -> GenerationJob:
    """Assemble a job, deriving hook sites from the mode."""
    concept_reg = None
    if concept_op is not None:
        concept_reg = HookRegistration(
            HookSite(concept_site_kind(mode), concept_block), concept_op
        )
    shape_reg = None
    if shape_op is not None:
        shape_reg = HookRegistration(HookSite("shape_bias", shape_block), shape_op)
    return GenerationJob(
        backend_id=backend_id,
        seed=seed,
        steps=steps,
        prompts=tuple(prompts),
        controls=tuple(controls),
        concept_registration=concept_reg,
        shape_registration=shape_reg,
        mode=mode,
        weight_cap=weight_cap,
    )


# -- structural validation -----------------------------------------------------

def validate_job(job: GenerationJob, topology: BackendTopology | None = None) -> None:
    """Raise ValidationError (with a field path) on malformed jobs.

    Passing the backend topology additionally checks block indices and
    schedule lengths via the registration machinery.
    """
    if not isinstance(job.backend_id, str) or not job.backend_id:
        raise ValidationError("backend must be a nonempty string", field="backend")
    if not isinstance(job.seed, int) or isinstance(job.seed, bool) or not (
        0 <= job.seed < 2**64
    ):
        raise ValidationError("seed must be an unsigned 64-bit integer", field="seed")
    if not isinstance(job.steps, int) or isinstance(job.steps, bool) or job.steps < 1:
        raise ValidationError("steps must be a positive integer", field="steps")
    if job.mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}", field="mode")
    if not job.prompts:
        raise ValidationError("at least one prompt is required", field="prompts")
    for i, p in enumerate(job.prompts):
        if not isinstance(p, str) or not p:
            raise ValidationError("prompt must be a nonempty string", field=f"prompts[{i}]")
    for i, c in enumerate(job.controls):
        if not isinstance(c, str) or not c:
            raise ValidationError(
                "control reference must be a nonempty string", field=f"controls[{i}]"
            )
    if not (isinstance(job.weight_cap, (int, float)) and math.isfinite(job.weight_cap)
            and job.weight_cap > 0):
        raise ValidationError("weight_cap must be a positive number", field="weight_cap")

    expected_kind = concept_site_kind(job.mode)
    if job.concept_registration is not None:
        if job.concept_registration.site.kind != expected_kind:
            raise ValidationError(
                f"{job.mode} jobs bind the concept operator at {expected_kind}",
                field="concept_op",
            )
        _check_weight_cap(job.concept_registration.spec, job.weight_cap, "concept_op")
    elif job.prompt_count >= 2:
        raise ValidationError(
            "multiple prompts require a concept operator to merge them",
            field="concept_op",
        )
    if job.shape_registration is not None:
        if job.shape_registration.site.kind != "shape_bias":
            raise ValidationError(
                "shape operator must bind the shape_bias site", field="shape_op"
            )
        _check_weight_cap(job.shape_registration.spec, job.weight_cap, "shape_op")

    if topology is not None:
        # Delegates range/arity/schedule checks to the registration path.
        from .runner import build_pipeline

        build_pipeline(topology, job)


def _check_weight_cap(spec: OperatorSpec, cap: float, field_name: str) -> None:
    entries = list(spec.schedule or ())
    if spec.weights is not None:
        entries.append(spec.weights)
    for w in entries:
        worst = max(abs(v) for v in w.values)
        if worst > cap:
            raise WeightCapExceeded(
                f"|weight| {worst} exceeds the job cap {cap}",
                field=f"{field_name}.weights",
            )


# -- dict / file round-trip ----------------------------------------------------

def _weights_from_value(value, where: str) -> Weights:
    if not isinstance(value, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        raise SchemaError("weights must be a list of numbers", field=where)
    try:
        return Weights(tuple(float(v) for v in value))
    except LatentDiffError as exc:
        if exc.field is None:
            exc.field = where
        raise


def operator_from_dict(d: Mapping[str, Any], where: str) -> tuple[OperatorSpec, int | None]:
    """Parse an operator description {kind, weights|alpha, schedule?, block?}."""
    if not isinstance(d, Mapping):
        raise SchemaError("operator must be an object", field=where)
    unknown = set(d) - _OP_KEYS
    if unknown:
        raise SchemaError(
            f"unknown operator field {sorted(unknown)[0]!r}",
            field=f"{where}.{sorted(unknown)[0]}",
        )
    kind = d.get("kind")
    if kind not in ("identity", "lerp", "slerp", "affine"):
        raise SchemaError(
            "kind must be one of identity, lerp, slerp, affine", field=f"{where}.kind"
        )
    if "weights" in d and "alpha" in d:
        raise SchemaError("give weights or alpha, not both", field=f"{where}.alpha")
    weights = None
    if "alpha" in d:
        alpha = d["alpha"]
        if not isinstance(alpha, (int, float)) or isinstance(alpha, bool) or not math.isfinite(alpha):
            raise SchemaError("alpha must be a finite number", field=f"{where}.alpha")
        weights = Weights.from_alpha(float(alpha))
    elif "weights" in d and d["weights"] is not None:
        weights = _weights_from_value(d["weights"], f"{where}.weights")
    schedule = None
    if d.get("schedule") is not None:
        raw = d["schedule"]
        if not isinstance(raw, list) or not raw:
            raise SchemaError("schedule must be a nonempty list", field=f"{where}.schedule")
        schedule = tuple(
            _weights_from_value(entry, f"{where}.schedule[{i}]")
            for i, entry in enumerate(raw)
        )
    block = d.get("block")
    if block is not None and (not isinstance(block, int) or isinstance(block, bool)):
        raise SchemaError("block must be an integer index", field=f"{where}.block")
    return OperatorSpec(kind, weights, schedule), block


def operator_to_dict(reg: HookRegistration | None) -> dict[str, Any] | None:
    """Normalized operator dict: alpha is folded into weights so that
    equivalent descriptions share one canonical form."""
    if reg is None:
        return None
    spec = reg.spec
    return {
        "kind": spec.kind,
        "weights": list(spec.weights.values) if spec.weights is not None else None,
        "schedule": (
            [list(w.values) for w in spec.schedule] if spec.schedule is not None else None
        ),
        "block": reg.site.block_index,
    }


def job_from_dict(d: Mapping[str, Any]) -> tuple[GenerationJob, str | None]:
    """Parse a job document. Returns (job, output_dir). Unknown fields are
    rejected; missing optionals take their defaults."""
    if not isinstance(d, Mapping):
        raise SchemaError("job must be a JSON object")
    unknown = set(d) - _JOB_KEYS
    if unknown:
        key = sorted(unknown)[0]
        raise SchemaError(f"unknown job field {key!r}", field=key)
    version = d.get("version")
    if version != JOB_VERSION:
        raise SchemaError(f"unsupported job version {version!r}", field="version")
    for key in ("backend", "seed", "steps", "prompts"):
        if key not in d:
            raise SchemaError(f"missing required field {key!r}", field=key)
    mode = d.get("mode", "query_wise")
    if mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}", field="mode")
    prompts = d["prompts"]
    if not isinstance(prompts, list):
        raise SchemaError("prompts must be a list", field="prompts")
    controls = d.get("controls", [])
    if not isinstance(controls, list):
        raise SchemaError("controls must be a list", field="controls")

    concept_reg = None
    if d.get("concept_op") is not None:
        spec, block = operator_from_dict(d["concept_op"], "concept_op")
        concept_reg = HookRegistration(HookSite(concept_site_kind(mode), block), spec)
    shape_reg = None
    if d.get("shape_op") is not None:
        spec, block = operator_from_dict(d["shape_op"], "shape_op")
        shape_reg = HookRegistration(HookSite("shape_bias", block), spec)

    weight_cap = d.get("weight_cap", DEFAULT_WEIGHT_CAP)
    if not isinstance(weight_cap, (int, float)) or isinstance(weight_cap, bool):
        raise SchemaError("weight_cap must be a number", field="weight_cap")

    output_dir = d.get("output_dir")
    if output_dir is not None and not isinstance(output_dir, str):
        raise SchemaError("output_dir must be a string path", field="output_dir")

    seed = d["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ValidationError("seed must be an integer", field="seed")
    steps = d["steps"]
    if not isinstance(steps, int) or isinstance(steps, bool):
        raise ValidationError("steps must be an integer", field="steps")

    job = GenerationJob(
        backend_id=d["backend"],
        seed=seed,
        steps=steps,
        prompts=tuple(prompts),
        controls=tuple(controls),
        concept_registration=concept_reg,
        shape_registration=shape_reg,
        mode=mode,
        weight_cap=float(weight_cap),
    )
    validate_job(job)
    return job, output_dir


def job_to_dict(job: GenerationJob) -> dict[str, Any]:
    """Canonical job document (no output_dir: paths are not job identity)."""
    return {
        "version": JOB_VERSION,
        "backend": job.backend_id,
        "seed": job.seed,
        "steps": job.steps,
        "mode": job.mode,
        "prompts": list(job.prompts),
        "controls": list(job.controls),
        "concept_op": operator_to_dict(job.concept_registration),
        "shape_op": operator_to_dict(job.shape_registration),
        "weight_cap": job.weight_cap,
    }


def canonical_encoding(job: GenerationJob) -> bytes:
    """Key-sorted compact JSON; the digest input."""
    return json.dumps(
        job_to_dict(job), sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")


def job_digest(job: GenerationJob) -> str:
    """FNV-1a 64-bit digest of the canonical encoding, as 16 hex digits."""
    return format(fnv1a_64(canonical_encoding(job)), "016x")


def load_job_file(path: str | Path) -> tuple[GenerationJob, str | None]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read job file {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"invalid JSON in {path}: line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    return job_from_dict(doc)


def save_job_file(job: GenerationJob, path: str | Path, output_dir: str | None = None) -> None:
    doc = job_to_dict(job)
    if output_dir is not None:
        doc["output_dir"] = output_dir
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def job_with_weights(job: GenerationJob, which: str, weights: Weights) -> GenerationJob:
    """Copy of the job with one operator's constant weights replaced;
    used by sweeps and the field mapper to walk weight space."""
    if which == "concept":
        reg = job.concept_registration
        if reg is None:
            raise ValidationError("job has no concept operator", field="concept_op")
        spec = replace(reg.spec, weights=weights, schedule=None)
        return replace(job, concept_registration=HookRegistration(reg.site, spec))
    if which == "shape":
        reg = job.shape_registration
        if reg is None:
            raise ValidationError("job has no shape operator", field="shape_op")
        spec = replace(reg.spec, weights=weights, schedule=None)
        return replace(job, shape_registration=HookRegistration(reg.site, spec))
    raise ValidationError(f"unknown operator axis {which!r}", field="axis")
