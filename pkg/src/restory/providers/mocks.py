"""Deterministic stand-ins for the three model services.

Each mock is a pure function of its inputs, so entire pipeline runs are
bit-reproducible without network access. Every mock counts its invocations
(`calls`), which lets tests prove that warm-cache reruns perform zero
provider work.
"""

from __future__ import annotations

import hashlib
import io
from typing import Sequence

from PIL import Image

from restory.hashing import sha256_hex, text_digest
from restory.providers.base import Detection

MOCK_VLM_MODEL = "mock-vlm"
MOCK_EMBEDDER_MODEL = "mock-embedder"
MOCK_DETECTOR_MODEL = "mock-detector"


class MockCaptionBackend:
    """Answers ``MOCKCAP:<first 8 hex of combined digest>``.

    The combined digest is sha256 of ``<content_hash>:<prompt_hash>``, making
    the answer a pure function of (image bytes, prompt text).
    """

    def __init__(self) -> None:
        self.calls = 0

    def complete(self, image_bytes: bytes, prompt: str) -> str:
        self.calls += 1
        combined = sha256_hex(
            f"{sha256_hex(image_bytes)}:{text_digest(prompt)}".encode("utf-8")
        )
        return f"MOCKCAP:{combined[:8]}"


class MockEmbeddingBackend:
    """Maps text to a 16-dim vector seeded by the text's sha256 digest."""

    dim = 16

    def __init__(self) -> None:
        self.calls = 0

    def encode(self, text: str) -> list[float]:
        self.calls += 1
        digest = hashlib.sha256(text.encode("utf-8")).digest()
        # 16 big-endian uint16 pairs mapped into [-1, 1]; never all zero
        # because u/65535*2-1 == 0 has no integer solution.
        return [
            int.from_bytes(digest[2 * i : 2 * i + 2], "big") / 65535.0 * 2.0 - 1.0
            for i in range(self.dim)
        ]


class MockDetectionBackend:
    """Returns a fixed box list, or one centered box derived from the image.

    The derived box covers the middle of the frame with a confidence taken
    from the content hash, so crops are deterministic per image.
    """

    def __init__(self, boxes: Sequence[Detection] | None = None) -> None:
        self.calls = 0
        self._boxes = None if boxes is None else tuple(boxes)

    def detect(self, image_bytes: bytes) -> list[Detection]:
        self.calls += 1
        if self._boxes is not None:
            return list(self._boxes)
        with Image.open(io.BytesIO(image_bytes)) as img:
            width, height = img.size
        lead_byte = hashlib.sha256(image_bytes).digest()[0]
        return [
            Detection(
                x=width // 4,
                y=height // 4,
                width=max(1, width // 2),
                height=max(1, height // 2),
                confidence=0.5 + lead_byte / 512.0,
            )
        ]
