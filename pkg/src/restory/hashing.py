"""Content digests used for cache keys and content addressing."""

from __future__ import annotations

import hashlib
from pathlib import Path


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def text_digest(text: str) -> str:
    return sha256_hex(text.encode("utf-8"))


def file_digest(path: Path) -> str:
    return sha256_hex(Path(path).read_bytes())
