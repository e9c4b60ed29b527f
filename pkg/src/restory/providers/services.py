"""Caching service layer over the raw provider backends.

Each service reads the payload, derives a cache key, and only reaches the
backend on a miss. Cached captions are stored trimmed; embeddings are stored
as the provider's raw values and unit-normalized on every read, so a cache
hit and a fresh call return bit-identical vectors.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path
from typing import Sequence

from PIL import Image, UnidentifiedImageError

from restory.errors import (
    DecodeError,
    DimensionMismatch,
    EmptyResponse,
    MissingImageFile,
    ProviderError,
)
from restory.hashing import sha256_hex, text_digest
from restory.providers.base import (
    CaptionBackend,
    Detection,
    DetectionBackend,
    EmbeddingBackend,
    EmbeddingVector,
)
from restory.providers.cache import (
    CacheKey,
    DiskCache,
    decode_embedding,
    encode_embedding,
)


def read_image_bytes(image_ref: Path) -> bytes:
    try:
        return Path(image_ref).read_bytes()
    except FileNotFoundError as exc:
        raise MissingImageFile(str(image_ref)) from exc


def verify_decodable(image_bytes: bytes, origin: str) -> None:
    import io

    try:
        with Image.open(io.BytesIO(image_bytes)) as img:
            img.verify()
    except (UnidentifiedImageError, OSError) as exc:
        raise DecodeError(f"cannot decode image {origin}") from exc


class CaptionService:
    def __init__(self, backend: CaptionBackend, model_name: str, cache: DiskCache) -> None:
        self.backend = backend
        self.model_name = model_name
        self.cache = cache

    def caption(self, image_ref: Path, prompt_text: str) -> str:
        if not prompt_text:
            raise ValueError("prompt_text must be non-empty")
        image_bytes = read_image_bytes(image_ref)
        key = CacheKey(
            content_hash=sha256_hex(image_bytes),
            prompt_hash=text_digest(prompt_text),
            model_name=self.model_name,
            kind="caption",
        )

        def compute() -> bytes:
            answer = self.backend.complete(image_bytes, prompt_text).strip()
            if not answer:
                raise EmptyResponse(f"blank caption for {image_ref}")
            return answer.encode("utf-8")

        return self.cache.lookup_or_compute(key, compute).decode("utf-8")


class EmbeddingService:
    def __init__(
        self, backend: EmbeddingBackend, model_name: str, cache: DiskCache
    ) -> None:
        self.backend = backend
        self.model_name = model_name
        self.cache = cache
        self._dims: dict[str, int] = {}

    def embed(self, text: str) -> EmbeddingVector:
        if not text:
            raise ValueError("text must be non-empty")
        key = CacheKey(
            content_hash=text_digest(text),
            prompt_hash="",
            model_name=self.model_name,
            kind="embedding",
        )

        def compute() -> bytes:
            raw = self.backend.encode(text)
            if not raw or all(v == 0.0 for v in raw):
                raise ProviderError("provider answered a zero-norm embedding")
            return encode_embedding(raw)

        values = decode_embedding(self.cache.lookup_or_compute(key, compute))
        known = self._dims.setdefault(self.model_name, len(values))
        if known != len(values):
            raise DimensionMismatch(
                f"model {self.model_name} answered dim {len(values)}, expected {known}"
            )
        return EmbeddingVector.unit(values, self.model_name)


class DetectionService:
    def __init__(
        self, backend: DetectionBackend, model_name: str, cache: DiskCache
    ) -> None:
        self.backend = backend
        self.model_name = model_name
        self.cache = cache

    def detect(self, image_ref: Path) -> list[Detection]:
        image_bytes = read_image_bytes(image_ref)
        verify_decodable(image_bytes, str(image_ref))
        key = CacheKey(
            content_hash=sha256_hex(image_bytes),
            prompt_hash="",
            model_name=self.model_name,
            kind="detection",
        )

        def compute() -> bytes:
            boxes = self.backend.detect(image_bytes)
            return json.dumps(
                [asdict(box) for box in boxes], separators=(",", ":")
            ).encode("utf-8")

        decoded = json.loads(self.cache.lookup_or_compute(key, compute))
        return [Detection(**item) for item in decoded]


def detections_equal(a: Sequence[Detection], b: Sequence[Detection]) -> bool:
    return list(a) == list(b)
