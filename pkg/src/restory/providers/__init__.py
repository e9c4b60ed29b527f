"""Clients for the three external model services, mocks, and the response cache."""

from restory.providers.base import (
    CaptionBackend,
    Detection,
    DetectionBackend,
    EmbeddingBackend,
    EmbeddingVector,
)
from restory.providers.cache import (
    CACHE_KINDS,
    CacheKey,
    DiskCache,
    decode_embedding,
    encode_embedding,
)
from restory.providers.config import ProviderConfig
from restory.providers.http import (
    HttpCaptionBackend,
    HttpDetectionBackend,
    HttpEmbeddingBackend,
)
from restory.providers.mocks import (
    MOCK_DETECTOR_MODEL,
    MOCK_EMBEDDER_MODEL,
    MOCK_VLM_MODEL,
    MockCaptionBackend,
    MockDetectionBackend,
    MockEmbeddingBackend,
)
from restory.providers.services import (
    CaptionService,
    DetectionService,
    EmbeddingService,
)

__all__ = [
    "CACHE_KINDS",
    "CacheKey",
    "CaptionBackend",
    "CaptionService",
    "Detection",
    "DetectionBackend",
    "DetectionService",
    "DiskCache",
    "EmbeddingBackend",
    "EmbeddingService",
    "EmbeddingVector",
    "HttpCaptionBackend",
    "HttpDetectionBackend",
    "HttpEmbeddingBackend",
    "MOCK_DETECTOR_MODEL",
    "MOCK_EMBEDDER_MODEL",
    "MOCK_VLM_MODEL",
    "MockCaptionBackend",
    "MockDetectionBackend",
    "MockEmbeddingBackend",
    "ProviderConfig",
    "decode_embedding",
    "encode_embedding",
]
