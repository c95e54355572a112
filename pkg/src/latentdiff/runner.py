"""Job execution: wires operator registrations into a backend's denoise
loop, counts hook firings, and persists outputs.

The untouched path is strict: when a job registers nothing, the loop
below performs exactly the same calls as a direct backend run, so the
final latent is byte-identical to one produced without the hook
machinery in the way.
"""

from __future__ import annotations

import json
import time
from pathlib import Path
from typing import Sequence

from .errors import ValidationError
from .jobs import GenerationJob, GenerationResult, job_digest, job_to_dict, validate_job
from .pipeline import (
    BackendTopology,
    ControlBiasSet,
    Pipeline,
    apply_concept_operation,
    apply_feature_wise,
    register,
    sum_bias_sets,
    zero_bias_set,
)
from .tensors import LatentTensor, apply_operator, save_ltt


def build_pipeline(topology: BackendTopology, job: GenerationJob) -> Pipeline:
    """Construct the hook pipeline for a job, running every registration
    through the same checks interactive callers get."""
    pipeline = Pipeline(
        topology=topology,
        prompt_count=job.prompt_count,
        control_count=job.control_count,
        steps=job.steps,
        mode=job.mode,
    )
    for registration in (job.concept_registration, job.shape_registration):
        if registration is not None:
            pipeline = register(pipeline, registration)
    return pipeline


def predicted_counters(topology: BackendTopology, job: GenerationJob) -> dict[str, int]:
    """Expected hook firing counts for a job, before running it."""
    from .pipeline import predicted_counters as pipeline_counters

    return pipeline_counters(build_pipeline(topology, job))


def _merged_bias(
    pipeline: Pipeline,
    bias_sets: Sequence[ControlBiasSet],
    step: int,
    counters: dict[str, int],
) -> ControlBiasSet:
    topology = pipeline.topology
    if not bias_sets:
        return zero_bias_set(topology)
    layers = topology.injection_layers
    specs = [pipeline.spec_at("shape_bias", layer) for layer in range(layers)]
    if all(spec is None for spec in specs):
        return sum_bias_sets(bias_sets)
    merged = []
    for layer, spec in enumerate(specs):
        inputs = [bs.biases[layer] for bs in bias_sets]
        if spec is None:
            acc = inputs[0].data
            for extra in inputs[1:]:
                acc = acc + extra.data
            merged.append(LatentTensor(acc))
        else:
            counters["shape_bias"] += 1
            merged.append(apply_operator(spec, inputs, step))
    return ControlBiasSet(tuple(merged))


def run_generation(backend, job: GenerationJob, out_dir: str | Path | None = None) -> GenerationResult:
    """Execute a job against a backend instance.

    Encodes prompts and controls once, then walks the denoise loop with
    the job's operators spliced in at their registered sites. Returns
    the final latent plus observability data; when out_dir is given,
    writes final.ltt, preview.ppm and result.json there.
    """
    if job.backend_id != backend.backend_id:
        raise ValidationError(
            f"job targets backend {job.backend_id!r} but got {backend.backend_id!r}",
            field="backend",
        )
    started = time.perf_counter()
    topology = backend.topology
    validate_job(job)
    pipeline = build_pipeline(topology, job)
    counters = {"concept_query": 0, "shape_bias": 0, "feature_embedding": 0}

    embeddings = [backend.encode_prompt(p) for p in job.prompts]
    bias_sets = [backend.encode_control(c) for c in job.controls]
    latent = backend.initial_latent(job.seed)

    feature_spec = None
    if job.mode == "feature_wise" and pipeline.has_kind("feature_embedding"):
        feature_spec = pipeline.spec_at("feature_embedding", None)
    use_query_merge = pipeline.has_kind("concept_query")

    encode_done = time.perf_counter()
    for step in range(job.steps):
        bias = _merged_bias(pipeline, bias_sets, step, counters)
        if feature_spec is not None:
            merged_embedding = apply_feature_wise(embeddings, feature_spec, step)
            counters["feature_embedding"] += 1
            latent = backend.denoise_step(latent, step, [merged_embedding], bias)
        elif use_query_merge:

            def merge(results: Sequence[LatentTensor], block: int) -> LatentTensor:
                spec = pipeline.spec_at("concept_query", block)
                if spec is None:
                    return results[0]
                counters["concept_query"] += 1
                return apply_concept_operation(results, spec, step)

            latent = backend.denoise_step(latent, step, embeddings, bias, merge)
        else:
            latent = backend.denoise_step(latent, step, embeddings, bias)
    loop_done = time.perf_counter()

    preview = backend.decode_preview(latent)
    digest = job_digest(job)
    result = GenerationResult(
        final_latent=latent,
        preview_bytes=preview,
        hook_counters=counters,
        job_digest=digest,
        timings={
            "encode_s": encode_done - started,
            "denoise_s": loop_done - encode_done,
            "total_s": time.perf_counter() - started,
        },
    )
    if out_dir is not None:
        write_result(result, job, out_dir)
    return result


def write_result(result: GenerationResult, job: GenerationJob, out_dir: str | Path) -> Path:
    """Persist latent, preview and a result manifest; returns the directory."""
    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    save_ltt(result.final_latent, directory / "final.ltt")
    (directory / "preview.ppm").write_bytes(result.preview_bytes)
    manifest = {
        "digest": result.job_digest,
        "job": job_to_dict(job),
        "counters": result.hook_counters,
        "timings": {k: round(v, 6) for k, v in result.timings.items()},
        "files": {"latent": "final.ltt", "preview": "preview.ppm"},
    }
    (directory / "result.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    result.preview_path = directory / "preview.ppm"
    return directory
