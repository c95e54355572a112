"""Hook sites and the pipeline description that binds operators to them.

Two intervention points exist in the denoising loop: per-prompt
cross-attention results (``concept_query``) and per-control conditioning
biases (``shape_bias``). A third site, ``feature_embedding``, is the
baseline that merges prompt embeddings before attention instead. Sites
with no registered operator forward their vectors unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .errors import (
    ArityMismatch,
    LayerCountMismatch,
    ShapeMismatch,
    UnknownSite,
    ValidationError,
)
from .tensors import LatentTensor, OperatorSpec, apply_operator

SITE_KINDS = ("concept_query", "shape_bias", "feature_embedding")

# A prompt embedding is an ordinary latent tensor (tokens x dim).
PromptEmbedding = LatentTensor


@dataclass(frozen=True)
class BackendTopology:
    """Shape contract a backend exposes to the hook layer."""

    latent_shape: tuple[int, ...]
    embed_tokens: int
    embed_dim: int
    cross_attention_blocks: int
    injection_layers: int
    layer_shapes: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if len(self.layer_shapes) != self.injection_layers:
            raise LayerCountMismatch(
                f"{len(self.layer_shapes)} layer shapes for "
                f"{self.injection_layers} injection layers"
            )


@dataclass(frozen=True)
class HookSite:
    """A hook location: kind plus an optional block/layer index.

    ``block_index`` of None addresses all blocks (or layers) of that kind.
    """

    kind: str
    block_index: int | None = None

    def __post_init__(self):
        if self.kind not in SITE_KINDS:
            raise UnknownSite(f"unknown site kind {self.kind!r}")
        if self.kind == "feature_embedding" and self.block_index is not None:
            raise UnknownSite("feature_embedding is a single pre-attention site")


@dataclass(frozen=True)
class HookRegistration:
    site: HookSite
    spec: OperatorSpec


@dataclass(frozen=True)
class ControlBiasSet:
    """One conditioning bias per injection layer, in layer order."""

    biases: tuple[LatentTensor, ...]

    def __post_init__(self):
        object.__setattr__(self, "biases", tuple(self.biases))

    @property
    def layer_count(self) -> int:
        return len(self.biases)


def zero_bias_set(topology: BackendTopology) -> ControlBiasSet:
    return ControlBiasSet(
        tuple(LatentTensor(np.zeros(s, dtype=np.float32)) for s in topology.layer_shapes)
    )


@dataclass(frozen=True)
class Pipeline:
    """Immutable description of a hooked run: topology, job arity context,
    and the operator registrations keyed by (kind, block_index)."""

    topology: BackendTopology
    prompt_count: int
    control_count: int
    steps: int
    mode: str = "query_wise"
    registrations: tuple[tuple[tuple[str, int | None], OperatorSpec], ...] = ()

    def spec_at(self, kind: str, index: int | None) -> OperatorSpec | None:
        """Operator at a concrete site; an all-blocks registration covers
        every index of its kind unless a per-index one overrides it."""
        table = dict(self.registrations)
        if index is not None and (kind, index) in table:
            return table[(kind, index)]
        return table.get((kind, None))

    def has_kind(self, kind: str) -> bool:
        return any(k == kind for (k, _), _ in self.registrations)


def register(pipeline: Pipeline, reg: HookRegistration) -> Pipeline:
    """Bind an operator to a hook site, returning the updated pipeline.

    Registering twice on the same (kind, block_index) replaces the earlier
    binding. Raises UnknownSite for out-of-range indices and ArityMismatch
    when the operator cannot consume the prompts/controls bound to the job.
    """
    site, spec = reg.site, reg.spec
    topo = pipeline.topology
    if site.kind == "concept_query":
        limit = topo.cross_attention_blocks
        input_count = pipeline.prompt_count
        if pipeline.mode == "feature_wise":
            raise ValidationError(
                "feature_wise mode forbids concept_query registrations",
                field="concept_op",
            )
    elif site.kind == "shape_bias":
        limit = topo.injection_layers
        input_count = pipeline.control_count
    else:  # feature_embedding
        limit = 1
        input_count = pipeline.prompt_count
        if pipeline.mode != "feature_wise":
            raise ValidationError(
                "feature_embedding registrations require feature_wise mode",
                field="mode",
            )
    if site.block_index is not None and not 0 <= site.block_index < limit:
        raise UnknownSite(
            f"{site.kind} index {site.block_index} out of range [0, {limit})"
        )
    _check_spec_arity(spec, input_count, site.kind)
    if site.kind in ("concept_query", "feature_embedding") and input_count >= 2:
        if site.block_index is not None:
            raise ValidationError(
                "multi-prompt jobs need the concept operator on all blocks",
                field="concept_op.block",
            )
    if spec.schedule is not None and len(spec.schedule) != pipeline.steps:
        raise ValidationError(
            f"schedule length {len(spec.schedule)} != step count {pipeline.steps}",
            field="schedule",
        )
    key = (site.kind, site.block_index)
    entries = tuple((k, s) for k, s in pipeline.registrations if k != key)
    return replace(pipeline, registrations=entries + ((key, spec),))


def _check_spec_arity(spec: OperatorSpec, input_count: int, kind: str) -> None:
    if spec.arity != input_count:
        raise ArityMismatch(
            f"{spec.kind} operator at {kind} consumes {spec.arity} inputs, "
            f"but the job binds {input_count}"
        )


def predicted_counters(pipeline: Pipeline) -> dict[str, int]:
    """Invocation counts a run of this pipeline will produce per site kind."""
    counts = {kind: 0 for kind in SITE_KINDS}
    topo = pipeline.topology
    for (kind, index), _ in pipeline.registrations:
        if kind == "concept_query":
            per_step = topo.cross_attention_blocks if index is None else 1
        elif kind == "shape_bias":
            per_step = topo.injection_layers if index is None else 1
        else:
            per_step = 1
        counts[kind] += per_step * pipeline.steps
    return counts


def apply_concept_operation(
    query_results: Sequence[LatentTensor], spec: OperatorSpec, step: int
) -> LatentTensor:
    """Merge per-prompt cross-attention results into the single tensor that
    replaces the attention block's output.

    Each entry must be the attention result computed with the same
    image-latent query against that prompt's keys/values.
    """
    return apply_operator(spec, query_results, step)


def apply_shape_operation(
    bias_sets: Sequence[ControlBiasSet], spec: OperatorSpec, step: int
) -> ControlBiasSet:
    """Merge per-control bias sets layer by layer; the merged set is what
    gets injected additively into the denoising network."""
    bias_sets = list(bias_sets)
    if not bias_sets:
        raise ArityMismatch("no bias sets to merge")
    layers = bias_sets[0].layer_count
    for i, bs in enumerate(bias_sets[1:], start=1):
        if bs.layer_count != layers:
            raise LayerCountMismatch(
                f"bias set {i} has {bs.layer_count} layers, expected {layers}"
            )
    merged = tuple(
        apply_operator(spec, [bs.biases[layer] for bs in bias_sets], step)
        for layer in range(layers)
    )
    return ControlBiasSet(merged)


def apply_feature_wise(
    embeddings: Sequence[PromptEmbedding], spec: OperatorSpec, step: int
) -> PromptEmbedding:
    """Baseline merge of prompt embeddings before attention; the loop then
    runs a single cross-attention against the combined embedding."""
    return apply_operator(spec, embeddings, step)


def sum_bias_sets(bias_sets: Sequence[ControlBiasSet]) -> ControlBiasSet:
    """Default combination when no shape operator is registered: plain
    left-to-right addition per layer."""
    bias_sets = list(bias_sets)
    if not bias_sets:
        raise ArityMismatch("no bias sets to sum")
    layers = bias_sets[0].layer_count
    for bs in bias_sets[1:]:
        if bs.layer_count != layers:
            raise LayerCountMismatch("bias sets disagree on layer count")
    merged = []
    for layer in range(layers):
        acc = bias_sets[0].biases[layer].data
        for bs in bias_sets[1:]:
            if bs.biases[layer].shape != bias_sets[0].biases[layer].shape:
                raise ShapeMismatch(f"layer {layer} shapes differ across bias sets")
            acc = acc + bs.biases[layer].data
        merged.append(LatentTensor(acc))
    return ControlBiasSet(tuple(merged))


MergeFn = Callable[[Sequence[LatentTensor], int], LatentTensor]
