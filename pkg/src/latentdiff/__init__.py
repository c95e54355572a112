"""latentdiff: latent-space operators for diffusion pipelines.

Vector operators (identity, lerp, slerp, affine combinations) applied at
two intervention points of a denoising loop: per-prompt cross-attention
results and per-control conditioning biases. Ships a deterministic mock
backend for desk-scale verification, a batch harness, a weight-space
field mapper, and an HTTP service for interactive steering.
"""

from .errors import (
    AffineViolation,
    ArityMismatch,
    BackendUnavailable,
    LatentDiffError,
    ShapeMismatch,
    ValidationError,
)
from .tensors import (
    HullFrame,
    LatentTensor,
    OperatorSpec,
    Weights,
    affine_combine,
    apply_operator,
    latent_digest,
    lerp,
    load_ltt,
    sample_frame,
    save_ltt,
    slerp,
    tensor,
)
from .pipeline import BackendTopology, ControlBiasSet, HookRegistration, HookSite
from .jobs import GenerationJob, GenerationResult, job_digest, make_job
from .backends import available_backends, get_backend, register_backend
from .runner import run_generation
from .field_map import FieldMap, FieldSample, build_field_map, classify, sample_grid

__version__ = "0.1.0"

__all__ = [
    "AffineViolation",
    "ArityMismatch",
    "BackendTopology",
    "BackendUnavailable",
    "ControlBiasSet",
    "FieldMap",
    "FieldSample",
    "GenerationJob",
    "GenerationResult",
    "HookRegistration",
    "HookSite",
    "HullFrame",
    "LatentDiffError",
    "LatentTensor",
    "OperatorSpec",
    "ShapeMismatch",
    "ValidationError",
    "Weights",
    "affine_combine",
    "apply_operator",
    "available_backends",
    "build_field_map",
    "classify",
    "get_backend",
    "job_digest",
    "latent_digest",
    "lerp",
    "load_ltt",
    "make_job",
    "register_backend",
    "run_generation",
    "sample_frame",
    "sample_grid",
    "save_ltt",
    "slerp",
    "tensor",
]
