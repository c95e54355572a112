"""Adapter contract for real Stable Diffusion + ControlNet runtimes.

Everything here except generate_external runs on any machine: configs
load and validate, attachment plans are pure data. Actual generation
needs a model runtime, which is probed at call time; its absence is the
defined BackendUnavailable outcome, never a crash.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Protocol, Sequence

from .errors import (
    ArityMismatch,
    BackendUnavailable,
    ParseError,
    SchemaError,
    UnknownSite,
)
from .jobs import GenerationJob, GenerationResult, job_digest, validate_job
from .tensors import LatentTensor, OperatorSpec

ATTACH_POINTS = ("post_output_projection", "pre_output_projection")
EMBEDDING_STAGE_ID = "text-embedding"

_CONFIG_KEYS = {
    "model_ref",
    "attention_attach",
    "cross_attention_block_ids",
    "control_layer_ids",
    "device_hints",
}


@dataclass(frozen=True)
class AdapterConfig:
    model_ref: str
    cross_attention_block_ids: tuple[str, ...]
    control_layer_ids: tuple[str, ...]
    attention_attach: str = "post_output_projection"
    device_hints: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.model_ref:
            raise SchemaError("model_ref must be nonempty", field="model_ref")
        if self.attention_attach not in ATTACH_POINTS:
            raise SchemaError(
                f"attention_attach must be one of {ATTACH_POINTS}",
                field="attention_attach",
            )
        for name in ("cross_attention_block_ids", "control_layer_ids"):
            ids = getattr(self, name)
            object.__setattr__(self, name, tuple(ids))
            ids = getattr(self, name)
            if not ids:
                raise SchemaError(f"{name} must be nonempty", field=name)
            seen = set()
            for i, bid in enumerate(ids):
                if not isinstance(bid, str) or not bid:
                    raise SchemaError(
                        "ids must be nonempty strings", field=f"{name}[{i}]"
                    )
                if bid in seen:
                    raise SchemaError(
                        f"duplicate id {bid!r}", field=f"{name}[{i}]"
                    )
                seen.add(bid)
        object.__setattr__(self, "device_hints", dict(self.device_hints))


def load_adapter_config(path: str | Path) -> AdapterConfig:
    """Load and validate an adapter.json. Bad JSON reports line and
    column; schema problems name the offending field."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read adapter config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(
            f"invalid JSON in {path}: line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(doc, dict):
        raise SchemaError("adapter config must be a JSON object")
    unknown = set(doc) - _CONFIG_KEYS
    if unknown:
        key = sorted(unknown)[0]
        raise SchemaError(f"unknown config field {key!r}", field=key)
    for key in ("model_ref", "cross_attention_block_ids", "control_layer_ids"):
        if key not in doc:
            raise SchemaError(f"missing required field {key!r}", field=key)
    for key in ("cross_attention_block_ids", "control_layer_ids"):
        if not isinstance(doc[key], list):
            raise SchemaError(f"{key} must be a list of strings", field=key)
    hints = doc.get("device_hints", {})
    if not isinstance(hints, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in hints.items()
    ):
        raise SchemaError(
            "device_hints must map strings to strings", field="device_hints"
        )
    return AdapterConfig(
        model_ref=doc["model_ref"],
        cross_attention_block_ids=tuple(doc["cross_attention_block_ids"]),
        control_layer_ids=tuple(doc["control_layer_ids"]),
        attention_attach=doc.get("attention_attach", "post_output_projection"),
        device_hints=hints,
    )


# -- attachment planning -------------------------------------------------------

@dataclass(frozen=True)
class Attachment:
    site_kind: str
    target_id: str
    spec: OperatorSpec


def plan_attachments(config: AdapterConfig, job: GenerationJob) -> tuple[Attachment, ...]:
    """Ordered list of hook installs a runtime must perform for a job.

    Pure data in, pure data out: concept attachments first (one per
    cross-attention block, or one per embedding stage in feature mode),
    then one shape attachment per control layer. Arity mismatches
    between operators and the job's prompts/controls fail here, before
    any model is touched.
    """
    plan: list[Attachment] = []
    if job.concept_registration is not None:
        reg = job.concept_registration
        _check_arity(reg.spec, job.prompt_count, "prompts")
        if reg.site.kind == "feature_embedding":
            plan.append(Attachment("feature_embedding", EMBEDDING_STAGE_ID, reg.spec))
        elif reg.site.block_index is None:
            for bid in config.cross_attention_block_ids:
                plan.append(Attachment("concept_query", bid, reg.spec))
        else:
            idx = reg.site.block_index
            if not (0 <= idx < len(config.cross_attention_block_ids)):
                raise UnknownSite(
                    f"block index {idx} outside the config's "
                    f"{len(config.cross_attention_block_ids)} cross-attention blocks"
                )
            plan.append(
                Attachment("concept_query", config.cross_attention_block_ids[idx], reg.spec)
            )
    if job.shape_registration is not None:
        reg = job.shape_registration
        _check_arity(reg.spec, job.control_count, "controls")
        if reg.site.block_index is None:
            for lid in config.control_layer_ids:
                plan.append(Attachment("shape_bias", lid, reg.spec))
        else:
            idx = reg.site.block_index
            if not (0 <= idx < len(config.control_layer_ids)):
                raise UnknownSite(
                    f"layer index {idx} outside the config's "
                    f"{len(config.control_layer_ids)} control layers"
                )
            plan.append(Attachment("shape_bias", config.control_layer_ids[idx], reg.spec))
    return tuple(plan)


def _check_arity(spec: OperatorSpec, count: int, what: str) -> None:
    if spec.arity != count:
        raise ArityMismatch(
            f"operator expects {spec.arity} inputs but the job has {count} {what}"
        )


# -- external generation -------------------------------------------------------

class ExternalRuntime(Protocol):
    """What a real model integration must provide. run() receives the
    verbatim attachment plan and returns (final latent, preview bytes)."""

    def run(
        self,
        config: AdapterConfig,
        job: GenerationJob,
        plan: Sequence[Attachment],
    ) -> tuple[LatentTensor, bytes]: ...


_runtime: ExternalRuntime | None = None
_runtime_lock = threading.Lock()


def set_external_runtime(runtime: ExternalRuntime | None) -> None:
    """Install (or clear) the model runtime. Integrations call this on
    import; tests use it to splice in fakes."""
    global _runtime
    _runtime = runtime


def resolve_model_path(config: AdapterConfig) -> Path:
    root = os.environ.get("LATENTDIFF_MODEL_DIR")
    if root:
        return Path(root) / config.model_ref
    return Path(config.model_ref)


def probe_runtime(config: AdapterConfig) -> ExternalRuntime | None:
    """Find a usable model runtime, or None. An installed runtime wins;
    otherwise there is nothing to drive the model with, regardless of
    whether the weights happen to be on disk."""
    if _runtime is not None:
        return _runtime
    return None


def generate_external(config: AdapterConfig, job: GenerationJob) -> GenerationResult:
    """Run a job on a real model stack.

    The attachment plan handed to the runtime is exactly
    plan_attachments(config, job), and the reported hook counters are
    plan arithmetic: each attachment fires once per step. Runtimes are
    serialized; accelerator memory is one shared resource.
    """
    runtime = probe_runtime(config)
    if runtime is None:
        raise BackendUnavailable(
            f"no model runtime is installed for {config.model_ref!r} "
            f"(looked near {resolve_model_path(config)})"
        )
    validate_job(job)
    plan = plan_attachments(config, job)
    started = time.perf_counter()
    with _runtime_lock:
        latent, preview = runtime.run(config, job, plan)
    counters = {"concept_query": 0, "shape_bias": 0, "feature_embedding": 0}
    for attachment in plan:
        counters[attachment.site_kind] += job.steps
    return GenerationResult(
        final_latent=latent,
        preview_bytes=preview,
        hook_counters=counters,
        job_digest=job_digest(job),
        timings={"total_s": time.perf_counter() - started},
    )
