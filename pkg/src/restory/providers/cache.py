"""Content-addressed on-disk cache for provider responses.

Layout: ``<root>/<kind>/<two-hex-prefix>/<full-key-digest>`` holding the raw
value bytes. Text values are UTF-8; embeddings are a 4-byte little-endian
length followed by little-endian 32-bit floats. Errors are never cached, so
transient failures cannot poison later runs. Writes go through a temp file
and an atomic rename: concurrent duplicate computes are allowed and the last
write wins.
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from restory.hashing import sha256_hex

CACHE_KINDS = ("caption", "embedding", "detection")


@dataclass(frozen=True)
class CacheKey:
    """Identity of one cached provider response.

    `prompt_hash` is empty for embeddings and detections, where the payload
    alone determines the answer.
    """

    content_hash: str
    prompt_hash: str
    model_name: str
    kind: str

    def __post_init__(self) -> None:
        if self.kind not in CACHE_KINDS:
            raise ValueError(f"unknown cache kind: {self.kind!r}")

    def digest(self) -> str:
        joined = ":".join(
            (self.content_hash, self.prompt_hash, self.model_name, self.kind)
        )
        return sha256_hex(joined.encode("utf-8"))


def encode_embedding(values: Sequence[float]) -> bytes:
    return struct.pack("<I", len(values)) + struct.pack(f"<{len(values)}f", *values)


def decode_embedding(data: bytes) -> list[float]:
    if len(data) < 4:
        raise ValueError("embedding blob shorter than its length header")
    (dim,) = struct.unpack_from("<I", data)
    expected = 4 + 4 * dim
    if len(data) != expected:
        raise ValueError(f"embedding blob is {len(data)} bytes, expected {expected}")
    return list(struct.unpack_from(f"<{dim}f", data, 4))


class DiskCache:
    def __init__(self, root: Path) -> None:
        self.root = Path(root)

    def path_for(self, key: CacheKey) -> Path:
        digest = key.digest()
        return self.root / key.kind / digest[:2] / digest

    def get(self, key: CacheKey) -> bytes | None:
        path = self.path_for(key)
        try:
            return path.read_bytes()
        except FileNotFoundError:
            return None

    def put(self, key: CacheKey, value: bytes) -> None:
        path = self.path_for(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as handle:
                handle.write(value)
            os.replace(tmp_name, path)
        except BaseException:
            try:
                os.unlink(tmp_name)
            except FileNotFoundError:
                pass
            raise

    def lookup_or_compute(self, key: CacheKey, compute: Callable[[], bytes]) -> bytes:
        cached = self.get(key)
        if cached is not None:
            return cached
        value = compute()
        self.put(key, value)
        return value
