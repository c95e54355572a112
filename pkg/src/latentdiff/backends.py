"""Backend registry.

Backends expose a small surface (encode_prompt, encode_control,
initial_latent, denoise_step, decode_preview, topology, backend_id) and
are looked up by identifier. The deterministic mock ships built in;
adapters for real runtimes register themselves on import.
"""

from __future__ import annotations

from typing import Callable, Protocol, Sequence

from .errors import BackendUnavailable
from .pipeline import BackendTopology, ControlBiasSet
from .tensors import LatentTensor


class Backend(Protocol):
    backend_id: str
    topology: BackendTopology

    def encode_prompt(self, prompt: str) -> LatentTensor: ...

    def encode_control(self, ref: str) -> ControlBiasSet: ...

    def initial_latent(self, seed: int) -> LatentTensor: ...

    def denoise_step(
        self,
        latent: LatentTensor,
        step: int,
        embeddings: Sequence[LatentTensor],
        bias: ControlBiasSet,
        merge=None,
    ) -> LatentTensor: ...

    def decode_preview(self, latent: LatentTensor) -> bytes: ...


_FACTORIES: dict[str, Callable[[], Backend]] = {}


def register_backend(backend_id: str, factory: Callable[[], Backend]) -> None:
    _FACTORIES[backend_id] = factory


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_FACTORIES))


def get_backend(backend_id: str) -> Backend:
    """Instantiate a backend by id, or raise BackendUnavailable with the
    ids that would have worked."""
    factory = _FACTORIES.get(backend_id)
    if factory is None:
        raise BackendUnavailable(
            f"no backend {backend_id!r}; available: {', '.join(available_backends()) or 'none'}"
        )
    return factory()


def _register_builtin() -> None:
    from .mock_backend import BACKEND_ID, MockBackend

    register_backend(BACKEND_ID, MockBackend)


_register_builtin()
