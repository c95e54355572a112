"""Pure latent-vector algebra: the operator family invoked at hook sites.

Every operator is a stateless function over immutable float32 tensors.
Weight vectors are affine (they sum to one within ``AFFINE_TOL``); values
outside [0, 1] mean extrapolation and are permitted, never an error.
Weights are not silently renormalized — a bad sum is a caller bug and is
reported as :class:`AffineViolation`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    AffineViolation,
    ArityMismatch,
    IoError,
    NonFiniteInput,
    ParseError,
    ShapeMismatch,
    ValidationError,
    ZeroNorm,
)

AFFINE_TOL = 1e-6
OPERATOR_KINDS = ("identity", "lerp", "slerp", "affine")

_SLERP_ANGLE_EPS = 1e-6
_SLERP_NORM_EPS = 1e-12

LTT_SUFFIX = ".ltt"


class LatentTensor:
    """Shape-tagged dense float32 array, the currency of all hook sites.

    The backing buffer is row-major, read-only, and finite; operators
    return fresh instances rather than mutating inputs.
    """

    __slots__ = ("data",)

    def __init__(self, data):
        arr = np.ascontiguousarray(data, dtype=np.float32)
        if arr is data and arr.flags.writeable:
            arr = arr.copy()  # never freeze a caller-owned buffer
        if arr.ndim < 1 or any(extent < 1 for extent in arr.shape):
            raise ShapeMismatch(f"tensor shape must have positive extents, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise NonFiniteInput("latent tensor contains NaN or Inf")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    def __setattr__(self, name, value):
        raise AttributeError("LatentTensor is immutable")

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def size(self) -> int:
        return int(self.data.size)

    def flat(self) -> np.ndarray:
        return self.data.reshape(-1)

    def tolist(self):
        return self.data.tolist()

    def __eq__(self, other) -> bool:
        if not isinstance(other, LatentTensor):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.data, other.data))

    def __hash__(self):
        return hash((self.shape, self.data.tobytes()))

    def __repr__(self) -> str:
        return f"LatentTensor(shape={self.shape})"


def tensor(values) -> LatentTensor:
    """Convenience constructor from nested lists / arrays."""
    return LatentTensor(np.asarray(values))


def tensors_allclose(a: LatentTensor, b: LatentTensor, atol: float = 1e-6) -> bool:
    return a.shape == b.shape and bool(np.allclose(a.data, b.data, rtol=0.0, atol=atol))


def mean_abs_difference(a: LatentTensor, b: LatentTensor) -> float:
    """Mean absolute elementwise difference; the divergence metric used repo-wide."""
    if a.shape != b.shape:
        raise ShapeMismatch(f"cannot diff shapes {a.shape} and {b.shape}")
    return float(np.mean(np.abs(a.data.astype(np.float64) - b.data.astype(np.float64))))


@dataclass(frozen=True)
class Weights:
    """Affine weight vector: finite scalars summing to 1 within AFFINE_TOL.

    Individual values may lie outside [0, 1] — that is extrapolation,
    not an error.
    """

    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if len(vals) < 1:
            raise ArityMismatch("weights need at least one value")
        if not all(math.isfinite(v) for v in vals):
            raise NonFiniteInput("weights contain NaN or Inf")
        if abs(math.fsum(vals) - 1.0) > AFFINE_TOL:
            raise AffineViolation(
                f"weights sum to {math.fsum(vals)!r}, expected 1 within {AFFINE_TOL}"
            )

    @property
    def arity(self) -> int:
        return len(self.values)

    @property
    def interior(self) -> bool:
        """True iff all weights lie inside [0, 1] (interpolation)."""
        return all(0.0 <= v <= 1.0 for v in self.values)

    @classmethod
    def from_alpha(cls, alpha: float) -> "Weights":
        """Two-point weights [1 - alpha, alpha]."""
        return cls((1.0 - alpha, alpha))

    def __iter__(self) -> Iterator[float]:
        return iter(self.values)


@dataclass(frozen=True)
class OperatorSpec:
    """Declarative description of a latent operator.

    ``kind`` is one of OPERATOR_KINDS. ``weights`` parameterize lerp,
    slerp (two-point, [1-alpha, alpha]) and affine combinations; identity
    takes none. ``schedule``, when present, supplies one weight vector per
    denoising step and overrides ``weights``.
    """

    kind: str
    weights: Weights | None = None
    schedule: tuple[Weights, ...] | None = None

    def __post_init__(self):
        if self.kind not in OPERATOR_KINDS:
            raise ValidationError(f"unknown operator kind {self.kind!r}", field="kind")
        if self.schedule is not None:
            object.__setattr__(self, "schedule", tuple(self.schedule))
        if self.kind == "identity":
            if self.weights is not None or self.schedule:
                raise ValidationError("identity operator takes no weights", field="weights")
            return
        entries = list(self.schedule or ())
        if self.weights is not None:
            entries.append(self.weights)
        if not entries:
            raise ValidationError(f"{self.kind} operator requires weights", field="weights")
        arities = {w.arity for w in entries}
        if len(arities) > 1:
            raise ArityMismatch(
                f"inconsistent weight arities {sorted(arities)} in operator spec",
                field="schedule",
            )
        if self.kind in ("lerp", "slerp") and entries[0].arity != 2:
            raise ArityMismatch(f"{self.kind} requires weights of arity 2", field="weights")

    @property
    def arity(self) -> int:
        """Number of inputs this spec consumes."""
        if self.kind == "identity":
            return 1
        if self.weights is not None:
            return self.weights.arity
        return self.schedule[0].arity

    def weights_for_step(self, step: int) -> Weights | None:
        if self.schedule is not None:
            if not 0 <= step < len(self.schedule):
                raise ValidationError(
                    f"step {step} outside schedule of length {len(self.schedule)}",
                    field="schedule",
                )
            return self.schedule[step]
        return self.weights

    @classmethod
    def identity(cls) -> "OperatorSpec":
        return cls("identity")

    @classmethod
    def lerp(cls, alpha: float) -> "OperatorSpec":
        return cls("lerp", Weights.from_alpha(alpha))

    @classmethod
    def slerp(cls, alpha: float) -> "OperatorSpec":
        return cls("slerp", Weights.from_alpha(alpha))

    @classmethod
    def affine(cls, values: Sequence[float]) -> "OperatorSpec":
        return cls("affine", Weights(tuple(values)))


@dataclass(frozen=True)
class HullFrame:
    """Ordered set of embedded data points spanning a convex hull.

    Duplicate vertices are permitted: frames extracted from video stills
    may repeat, and no deduplication is performed.
    """

    vertices: tuple[LatentTensor, ...]
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(self.vertices))
        if len(self.vertices) < 2:
            raise ArityMismatch("hull frame needs at least 2 vertices")
        shape = self.vertices[0].shape
        for i, v in enumerate(self.vertices):
            if v.shape != shape:
                raise ShapeMismatch(f"vertex {i} has shape {v.shape}, expected {shape}")
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))
            if len(self.labels) != len(self.vertices):
                raise ArityMismatch(
                    f"{len(self.labels)} labels for {len(self.vertices)} vertices"
                )

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)


@dataclass(frozen=True)
class FrameSample:
    """Result of sampling a hull frame: the combined tensor plus an
    inside-hull flag (true iff all weights lie in [0, 1])."""

    tensor: LatentTensor
    inside: bool


def _check_same_shape(a: LatentTensor, b: LatentTensor) -> None:
    if a.shape != b.shape:
        raise ShapeMismatch(f"shapes {a.shape} and {b.shape} differ")


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not math.isfinite(alpha):
        raise NonFiniteInput(f"alpha is {alpha!r}")
    return alpha


def lerp(a: LatentTensor, b: LatentTensor, alpha: float) -> LatentTensor:
    """Elementwise (1 - alpha) * a + alpha * b.

    Endpoints are exact: alpha 0 returns a and alpha 1 returns b bit-for-bit.
    """
    _check_same_shape(a, b)
    alpha = _check_alpha(alpha)
    if alpha == 0.0:
        return LatentTensor(a.data)
    if alpha == 1.0:
        return LatentTensor(b.data)
    out = (1.0 - alpha) * a.data.astype(np.float64) + alpha * b.data.astype(np.float64)
    return LatentTensor(out)


def slerp(a: LatentTensor, b: LatentTensor, alpha: float) -> LatentTensor:
    """Spherical interpolation over the flattened tensors.

    result = sin((1-alpha)*omega)/sin(omega) * a + sin(alpha*omega)/sin(omega) * b
    with omega the angle between the flattened vectors. Falls back to lerp
    when omega < 1e-6. Tensors are flattened to a single vector rather than
    treated per-channel.
    """
    _check_same_shape(a, b)
    alpha = _check_alpha(alpha)
    av = a.flat().astype(np.float64)
    bv = b.flat().astype(np.float64)
    norm_a = float(np.linalg.norm(av))
    norm_b = float(np.linalg.norm(bv))
    if norm_a < _SLERP_NORM_EPS or norm_b < _SLERP_NORM_EPS:
        raise ZeroNorm(f"slerp inputs must have norm >= {_SLERP_NORM_EPS}")
    cos_omega = min(1.0, max(-1.0, float(np.dot(av, bv)) / (norm_a * norm_b)))
    omega = math.acos(cos_omega)
    if omega < _SLERP_ANGLE_EPS:
        return lerp(a, b, alpha)
    sin_omega = math.sin(omega)
    wa = math.sin((1.0 - alpha) * omega) / sin_omega
    wb = math.sin(alpha * omega) / sin_omega
    return LatentTensor((wa * av + wb * bv).reshape(a.shape))


def affine_combine(inputs: Sequence[LatentTensor], weights: Weights) -> LatentTensor:
    """Weighted sum with affine weights: interpolation inside [0, 1],
    extrapolation outside — both permitted.

    One-hot weights return the selected input bit-exactly.
    """
    inputs = list(inputs)
    if not inputs:
        raise ArityMismatch("affine_combine needs at least one input")
    shape = inputs[0].shape
    for i, t in enumerate(inputs[1:], start=1):
        if t.shape != shape:
            raise ShapeMismatch(f"input {i} has shape {t.shape}, expected {shape}")
    if weights.arity != len(inputs):
        raise ArityMismatch(f"{weights.arity} weights for {len(inputs)} inputs")
    nonzero = [i for i, w in enumerate(weights.values) if w != 0.0]
    if len(nonzero) == 1 and weights.values[nonzero[0]] == 1.0:
        return LatentTensor(inputs[nonzero[0]].data)
    acc = np.zeros(shape, dtype=np.float64)
    for w, t in zip(weights.values, inputs):
        acc += w * t.data.astype(np.float64)
    return LatentTensor(acc)


def sample_frame(frame: HullFrame, weights: Weights) -> FrameSample:
    """Affine combination over the frame's vertices plus the inside-hull flag."""
    return FrameSample(
        tensor=affine_combine(frame.vertices, weights),
        inside=weights.interior,
    )


def apply_operator(
    spec: OperatorSpec, inputs: Sequence[LatentTensor], step: int = 0
) -> LatentTensor:
    """Dispatch a declarative operator spec over its inputs.

    With a schedule present, the weights for this call are schedule[step];
    otherwise the spec's constant weights apply.
    """
    inputs = list(inputs)
    if not inputs:
        raise ArityMismatch("operator needs at least one input")
    if spec.kind == "identity":
        if len(inputs) != 1:
            raise ArityMismatch(f"identity operator takes 1 input, got {len(inputs)}")
        return LatentTensor(inputs[0].data)
    weights = spec.weights_for_step(step)
    if spec.kind == "lerp":
        if len(inputs) != 2:
            raise ArityMismatch(f"lerp takes 2 inputs, got {len(inputs)}")
        return lerp(inputs[0], inputs[1], weights.values[1])
    if spec.kind == "slerp":
        if len(inputs) != 2:
            raise ArityMismatch(f"slerp takes 2 inputs, got {len(inputs)}")
        return slerp(inputs[0], inputs[1], weights.values[1])
    return affine_combine(inputs, weights)


# -- .ltt tensor file format ---------------------------------------------------
#
# Two-part file: a UTF-8 JSON header line {"shape":[...],"dtype":"f32",
# "order":"row-major"} terminated by a newline, then raw little-endian
# 32-bit floats.

def tensor_to_ltt_bytes(t: LatentTensor) -> bytes:
    header = json.dumps(
        {"shape": list(t.shape), "dtype": "f32", "order": "row-major"},
        separators=(",", ":"),
    )
    return header.encode("utf-8") + b"\n" + t.data.astype("<f4", copy=False).tobytes()


def tensor_from_ltt_bytes(blob: bytes) -> LatentTensor:
    newline = blob.find(b"\n")
    if newline < 0:
        raise ParseError("missing header line in .ltt data")
    try:
        header = json.loads(blob[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError(f"bad .ltt header: {exc}") from exc
    if not isinstance(header, dict) or set(header) != {"shape", "dtype", "order"}:
        raise ParseError("header must have exactly the keys shape, dtype, order")
    if header["dtype"] != "f32":
        raise ParseError(f"unsupported dtype {header['dtype']!r}")
    if header["order"] != "row-major":
        raise ParseError(f"unsupported order {header['order']!r}")
    shape = header["shape"]
    if not isinstance(shape, list) or not all(
        isinstance(e, int) and e > 0 for e in shape
    ):
        raise ParseError(f"bad shape {shape!r}")
    count = 1
    for extent in shape:
        count *= extent
    payload = blob[newline + 1 :]
    if len(payload) != 4 * count:
        raise ParseError(
            f"payload holds {len(payload)} bytes, expected {4 * count} for shape {shape}"
        )
    arr = np.frombuffer(payload, dtype="<f4").reshape(shape)
    return LatentTensor(arr)


def latent_digest(t: LatentTensor) -> str:
    """FNV-1a 64-bit digest of the tensor's .ltt encoding, hex.

    Two tensors share a digest exactly when their serialized bytes
    match, which is the equality the replay machinery cares about.
    """
    from .rng import fnv1a_64

    return format(fnv1a_64(tensor_to_ltt_bytes(t)), "016x")


def save_ltt(t: LatentTensor, path: str | Path) -> None:
    try:
        Path(path).write_bytes(tensor_to_ltt_bytes(t))
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def load_ltt(path: str | Path) -> LatentTensor:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return tensor_from_ltt_bytes(blob)
