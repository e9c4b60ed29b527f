"""Provider-facing value types and backend protocols.

A backend is the raw transport (HTTP client or deterministic mock); the
service layer in `services.py` adds caching, normalization, and error
annotation on top.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol, Sequence


@dataclass(frozen=True)
class Detection:
    """One detected person box in pixel coordinates."""

    x: int
    y: int
    width: int
    height: int
    confidence: float

    @property
    def area(self) -> int:
        return self.width * self.height


@dataclass(frozen=True)
class EmbeddingVector:
    """A sentence embedding, unit-normalized by the service layer."""

    values: tuple[float, ...]
    dim: int
    model_name: str
    normalized: bool

    def __post_init__(self) -> None:
        if self.dim != len(self.values):
            raise ValueError(f"dim {self.dim} != len(values) {len(self.values)}")
        if self.normalized and abs(self.norm() - 1.0) > 1e-6:
            raise ValueError("vector marked normalized but norm deviates from 1")

    def norm(self) -> float:
        return math.sqrt(sum(v * v for v in self.values))

    @classmethod
    def unit(cls, raw: Sequence[float], model_name: str) -> "EmbeddingVector":
        """Build a unit-normalized vector from raw provider values."""
        norm = math.sqrt(sum(v * v for v in raw))
        if norm == 0.0:
            raise ValueError("cannot normalize a zero-norm embedding")
        return cls(
            values=tuple(v / norm for v in raw),
            dim=len(raw),
            model_name=model_name,
            normalized=True,
        )


class CaptionBackend(Protocol):
    def complete(self, image_bytes: bytes, prompt: str) -> str: ...


class EmbeddingBackend(Protocol):
    def encode(self, text: str) -> list[float]: ...


class DetectionBackend(Protocol):
    def detect(self, image_bytes: bytes) -> list[Detection]: ...
