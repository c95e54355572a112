"""Dependency-free toy diffusion backend.

Every scalar is a pure function of the inputs plus fixed constants, with
FNV-1a-64 and SplitMix64 as the only randomness sources, so full runs are
byte-reproducible. The 4x4 spatial latent keeps a 5-step run well under
10 ms; the backend exists to exercise hooks, not to model diffusion
dynamics (no noise-prediction schedule is emulated).
"""

from __future__ import annotations

from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import EmptyControlRef, EmptyPrompt, ShapeMismatch
from .pipeline import (
    BackendTopology,
    ControlBiasSet,
    MergeFn,
    PromptEmbedding,
    sum_bias_sets,
    zero_bias_set,
)
from .rng import SplitMix64, fnv1a_64, uniform_tensor
from .tensors import LatentTensor

BACKEND_ID = "mock-v1"

LATENT_SHAPE = (8, 4, 4)
EMBED_TOKENS = 4
EMBED_DIM = 16
CROSS_ATTENTION_BLOCKS = 3
INJECTION_LAYERS = 3

# Residual rate of the latent update; keeps iterates bounded for >= 100
# steps under tanh saturation.
UPDATE_RATE = 0.1
CONTROL_BIAS_SCALE = 0.1
PREVIEW_SIZE = 64

# Fixed seed for all projection matrices. Changing it is a version bump.
NETWORK_SEED = 0xD1FF0510

TOPOLOGY = BackendTopology(
    latent_shape=LATENT_SHAPE,
    embed_tokens=EMBED_TOKENS,
    embed_dim=EMBED_DIM,
    cross_attention_blocks=CROSS_ATTENTION_BLOCKS,
    injection_layers=INJECTION_LAYERS,
    layer_shapes=tuple(LATENT_SHAPE for _ in range(INJECTION_LAYERS)),
)

_CHANNELS = LATENT_SHAPE[0]
_POSITIONS = LATENT_SHAPE[1] * LATENT_SHAPE[2]
_SCALE = 16  # preview upsampling factor: 4x4 cells -> 64x64 pixels


@lru_cache(maxsize=1)
def _projections() -> tuple[tuple[np.ndarray, np.ndarray, np.ndarray], ...]:
    """Per-block (Wq, Wk, Wv), drawn row-major from one SplitMix64 stream
    seeded by NETWORK_SEED, blocks ascending, q then k then v. Entries are
    uniform [-1, 1) scaled by 1/sqrt(fan_in)."""
    stream = SplitMix64(NETWORK_SEED)

    def draw(rows: int, cols: int) -> np.ndarray:
        mat = stream.fill(rows * cols).reshape(rows, cols)
        return (mat / np.float32(np.sqrt(rows))).astype(np.float32)

    blocks = []
    for _ in range(CROSS_ATTENTION_BLOCKS):
        wq = draw(_CHANNELS, EMBED_DIM)
        wk = draw(EMBED_DIM, EMBED_DIM)
        wv = draw(EMBED_DIM, _CHANNELS)
        blocks.append((wq, wk, wv))
    return tuple(blocks)


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


class MockBackend:
    """Stateless; safe for unlimited concurrent use."""

    backend_id = BACKEND_ID
    topology = TOPOLOGY

    def encode_prompt(self, text: str) -> PromptEmbedding:
        """Deterministic 4x16 embedding of the prompt string alone."""
        if not text:
            raise EmptyPrompt("prompt must be a nonempty string", field="prompts")
        seed = fnv1a_64(text.encode("utf-8"))
        return LatentTensor(uniform_tensor(seed, (EMBED_TOKENS, EMBED_DIM)))

    def encode_control(self, control_ref: str) -> ControlBiasSet:
        """Per-layer biases seeded by FNV-1a-64(ref bytes + layer byte),
        scaled by CONTROL_BIAS_SCALE."""
        if not control_ref:
            raise EmptyControlRef("control reference must be nonempty", field="controls")
        ref = control_ref.encode("utf-8")
        biases = []
        for layer in range(INJECTION_LAYERS):
            seed = fnv1a_64(ref + bytes([layer]))
            raw = uniform_tensor(seed, TOPOLOGY.layer_shapes[layer])
            biases.append(LatentTensor(raw * np.float32(CONTROL_BIAS_SCALE)))
        return ControlBiasSet(tuple(biases))

    def initial_latent(self, seed: int) -> LatentTensor:
        return LatentTensor(uniform_tensor(seed, LATENT_SHAPE))

    def denoise_step(
        self,
        latent: LatentTensor,
        t: int,
        embeddings: Sequence[PromptEmbedding],
        bias: ControlBiasSet,
        merge: MergeFn | None = None,
    ) -> LatentTensor:
        """One hooked pass: blocks chain sequentially; each block runs the
        shared image-latent query against every supplied embedding, merges
        the per-prompt results through ``merge`` (required when more than
        one embedding is supplied), applies tanh, and adds its injection
        bias. The latent then takes a residual step toward the chain output.
        """
        if latent.shape != LATENT_SHAPE:
            raise ShapeMismatch(f"latent shape {latent.shape} != {LATENT_SHAPE}")
        for e in embeddings:
            if e.shape != (EMBED_TOKENS, EMBED_DIM):
                raise ShapeMismatch(
                    f"embedding shape {e.shape} != {(EMBED_TOKENS, EMBED_DIM)}"
                )
        if bias.layer_count != INJECTION_LAYERS:
            raise ShapeMismatch(
                f"{bias.layer_count} bias layers != {INJECTION_LAYERS}"
            )
        if len(embeddings) != 1 and merge is None:
            raise ShapeMismatch(
                "multiple embeddings require a merge operator"
            )

        h = latent.data
        for c, (wq, wk, wv) in enumerate(_projections()):
            x = h.reshape(_CHANNELS, _POSITIONS).T  # positions x channels
            q = x @ wq  # positions x embed_dim
            results = []
            for e in embeddings:
                k = e.data @ wk  # tokens x embed_dim
                v = e.data @ wv  # tokens x channels
                attn = _softmax_rows(q @ k.T / np.float32(np.sqrt(EMBED_DIM))) @ v
                results.append(
                    LatentTensor(attn.T.reshape(LATENT_SHAPE))
                )
            if merge is not None:
                combined = merge(results, c)
            else:
                combined = results[0]
            h = np.tanh(combined.data) + bias.biases[c].data
        out = latent.data + np.float32(UPDATE_RATE) * (h - latent.data)
        return LatentTensor(out)

    def decode_preview(self, latent: LatentTensor) -> bytes:
        """64x64 grayscale preview: channel means of the 4x4 latent,
        min-max normalized to [0, 255] (uniform 128 when the range is
        degenerate), nearest-neighbor upsampled, serialized as binary
        P5 with maxval 255."""
        if latent.shape != LATENT_SHAPE:
            raise ShapeMismatch(f"latent shape {latent.shape} != {LATENT_SHAPE}")
        means = latent.data.mean(axis=0)
        lo = float(means.min())
        hi = float(means.max())
        if hi == lo:
            cells = np.full(means.shape, 128, dtype=np.uint8)
        else:
            cells = np.rint((means - lo) / (hi - lo) * 255.0).astype(np.uint8)
        image = np.kron(cells, np.ones((_SCALE, _SCALE), dtype=np.uint8))
        header = f"P5\n{PREVIEW_SIZE} {PREVIEW_SIZE}\n255\n".encode("ascii")
        return header + image.tobytes()


def reference_run(
    prompt: str,
    control_refs: Sequence[str],
    seed: int,
    steps: int,
) -> LatentTensor:
    """The un-hooked reference loop: a single prompt, controls combined by
    plain addition, no hook machinery. Pass-through jobs must match this
    byte-for-byte.
    """
    backend = MockBackend()
    embedding = backend.encode_prompt(prompt)
    if control_refs:
        bias = sum_bias_sets([backend.encode_control(ref) for ref in control_refs])
    else:
        bias = zero_bias_set(TOPOLOGY)
    latent = backend.initial_latent(seed)
    for t in range(steps):
        latent = backend.denoise_step(latent, t, [embedding], bias)
    return latent
