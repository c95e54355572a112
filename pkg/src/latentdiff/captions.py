"""Caption clients for encyclopedia-page generation.

Captioning a hybrid concept is an external-service problem in general;
what ships here is the registry plus a deterministic stub so batch runs
never depend on network access. Real clients register by id.
"""

from __future__ import annotations

from typing import Callable, Protocol, Sequence

from .errors import CaptionClientUnavailable
from .tensors import Weights

NULL_CAPTIONER_ID = "null-captioner"


class CaptionClient(Protocol):
    client_id: str

    def caption(self, concepts: Sequence[str], weights: Weights) -> str: ...


class NullCaptioner:
    """Template captions, fully deterministic: same inputs, same text."""

    client_id = NULL_CAPTIONER_ID

    def caption(self, concepts: Sequence[str], weights: Weights) -> str:
        pairs = ", ".join(
            f"{concept} ({weight:g})"
            for concept, weight in zip(concepts, weights.values)
        )
        title = "-".join(concepts)
        return (
            f"{title}: a hybrid entity combining {pairs}. "
            "Entry generated from latent blending; no factual claims intended."
        )


_CLIENTS: dict[str, Callable[[], CaptionClient]] = {NULL_CAPTIONER_ID: NullCaptioner}


def register_caption_client(client_id: str, factory: Callable[[], CaptionClient]) -> None:
    _CLIENTS[client_id] = factory


def available_caption_clients() -> tuple[str, ...]:
    return tuple(sorted(_CLIENTS))


def get_caption_client(client_id: str) -> CaptionClient:
    factory = _CLIENTS.get(client_id)
    if factory is None:
        raise CaptionClientUnavailable(
            f"no caption client {client_id!r}; available: "
            + ", ".join(available_caption_clients())
        )
    return factory()
