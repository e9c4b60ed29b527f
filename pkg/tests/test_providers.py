from __future__ import annotations

import math
from pathlib import Path

import httpx
import pytest

from restory.errors import (
    DetectorUnavailable,
    DimensionMismatch,
    EmptyResponse,
    ProviderError,
    ProviderUnavailable,
)
from restory.hashing import sha256_hex, text_digest
from restory.providers import (
    CacheKey,
    CaptionService,
    Detection,
    DetectionService,
    DiskCache,
    EmbeddingService,
    EmbeddingVector,
    HttpCaptionBackend,
    HttpDetectionBackend,
    HttpEmbeddingBackend,
    MockCaptionBackend,
    MockDetectionBackend,
    MockEmbeddingBackend,
    ProviderConfig,
    decode_embedding,
    encode_embedding,
)
from restory.providers.http import post_with_retries

from conftest import write_png


# --- cache -----------------------------------------------------------------


def test_cache_miss_then_hit(cache: DiskCache) -> None:
    key = CacheKey("abc", "def", "m", "caption")
    computes = []

    def compute() -> bytes:
        computes.append(1)
        return b"value"

    assert cache.lookup_or_compute(key, compute) == b"value"
    assert cache.lookup_or_compute(key, compute) == b"value"
    assert len(computes) == 1


def test_cache_errors_not_cached(cache: DiskCache) -> None:
    key = CacheKey("abc", "", "m", "embedding")
    attempts = []

    def failing() -> bytes:
        attempts.append(1)
        raise ProviderUnavailable("boom")

    with pytest.raises(ProviderUnavailable):
        cache.lookup_or_compute(key, failing)
    assert cache.get(key) is None
    assert cache.lookup_or_compute(key, lambda: b"ok") == b"ok"
    assert len(attempts) == 1


def test_cache_distinct_prompts_distinct_entries(cache: DiskCache) -> None:
    key_a = CacheKey("img", "prompt-a", "m", "caption")
    key_b = CacheKey("img", "prompt-b", "m", "caption")
    cache.put(key_a, b"A")
    cache.put(key_b, b"B")
    assert cache.get(key_a) == b"A"
    assert cache.get(key_b) == b"B"


def test_cache_layout(cache: DiskCache) -> None:
    key = CacheKey("c", "p", "model", "detection")
    digest = sha256_hex(b"c:p:model:detection")
    assert key.digest() == digest
    assert cache.path_for(key) == cache.root / "detection" / digest[:2] / digest


def test_cache_roundtrip_bytes(cache: DiskCache) -> None:
    key = CacheKey("x", "", "m", "embedding")
    blob = bytes(range(256))
    cache.put(key, blob)
    assert cache.get(key) == blob


def test_cache_key_rejects_unknown_kind() -> None:
    with pytest.raises(ValueError):
        CacheKey("a", "b", "m", "pretraining")


def test_embedding_encoding_roundtrip() -> None:
    values = [0.25, -1.5, 3.0, 0.0]
    assert decode_embedding(encode_embedding(values)) == values
    with pytest.raises(ValueError):
        decode_embedding(b"\x01")


# --- caption service ----------------------------------------------------------


def test_mock_caption_contract(tmp_path: Path, cache: DiskCache) -> None:
    image = write_png(tmp_path / "a.png")
    service = CaptionService(MockCaptionBackend(), "mock-vlm", cache)
    answer = service.caption(image, "What?")
    content_hash = sha256_hex(image.read_bytes())
    combined = sha256_hex(f"{content_hash}:{text_digest('What?')}".encode())
    assert answer == f"MOCKCAP:{combined[:8]}"


def test_caption_cached_one_transport_call(tmp_path: Path, cache: DiskCache) -> None:
    image = write_png(tmp_path / "a.png")
    backend = MockCaptionBackend()
    service = CaptionService(backend, "mock-vlm", cache)
    first = service.caption(image, "Prompt")
    second = service.caption(image, "Prompt")
    assert first == second
    assert backend.calls == 1


def test_caption_whitespace_is_empty_response(tmp_path: Path, cache: DiskCache) -> None:
    image = write_png(tmp_path / "a.png")

    class BlankBackend:
        def complete(self, image_bytes: bytes, prompt: str) -> str:
            return "   \n\t"

    service = CaptionService(BlankBackend(), "blank", cache)
    with pytest.raises(EmptyResponse):
        service.caption(image, "Prompt")
    # the failure must not be cached
    service_ok = CaptionService(MockCaptionBackend(), "blank", cache)
    assert service_ok.caption(image, "Prompt").startswith("MOCKCAP:")


def test_caption_requires_prompt(tmp_path: Path, cache: DiskCache) -> None:
    image = write_png(tmp_path / "a.png")
    service = CaptionService(MockCaptionBackend(), "mock-vlm", cache)
    with pytest.raises(ValueError):
        service.caption(image, "")


# --- embedding service -----------------------------------------------------------


def test_mock_embedding_deterministic(cache: DiskCache) -> None:
    service = EmbeddingService(MockEmbeddingBackend(), "mock-embedder", cache)
    a = service.embed("hello world")
    b = service.embed("hello world")
    assert a == b
    assert a.dim == 16
    assert abs(a.norm() - 1.0) <= 1e-6


def test_embedding_normalized_even_if_provider_is_not(cache: DiskCache) -> None:
    class BigBackend:
        def encode(self, text: str) -> list[float]:
            return [3.0, 4.0]

    service = EmbeddingService(BigBackend(), "big", cache)
    vector = service.embed("anything")
    assert math.isclose(vector.norm(), 1.0, abs_tol=1e-6)
    assert vector.values == (0.6, 0.8)


def test_embedding_hit_equals_miss(cache: DiskCache) -> None:
    backend = MockEmbeddingBackend()
    service = EmbeddingService(backend, "mock-embedder", cache)
    miss = service.embed("some caption")
    hit = service.embed("some caption")
    assert miss.values == hit.values
    assert backend.calls == 1


def test_embedding_dimension_mismatch(cache: DiskCache) -> None:
    class ShiftyBackend:
        def __init__(self) -> None:
            self.dims = iter([384, 512])

        def encode(self, text: str) -> list[float]:
            return [1.0] * next(self.dims)

    service = EmbeddingService(ShiftyBackend(), "shifty", cache)
    assert service.embed("first").dim == 384
    with pytest.raises(DimensionMismatch):
        service.embed("second")


def test_embedding_rejects_empty_text(cache: DiskCache) -> None:
    service = EmbeddingService(MockEmbeddingBackend(), "mock-embedder", cache)
    with pytest.raises(ValueError):
        service.embed("")


def test_embedding_zero_vector_not_cached(cache: DiskCache) -> None:
    class ZeroBackend:
        def encode(self, text: str) -> list[float]:
            return [0.0, 0.0]

    service = EmbeddingService(ZeroBackend(), "zero", cache)
    with pytest.raises(ProviderError):
        service.embed("text")
    key = CacheKey(text_digest("text"), "", "zero", "embedding")
    assert cache.get(key) is None


def test_embedding_vector_invariants() -> None:
    with pytest.raises(ValueError):
        EmbeddingVector(values=(1.0, 0.0), dim=3, model_name="m", normalized=False)
    with pytest.raises(ValueError):
        EmbeddingVector(values=(2.0,), dim=1, model_name="m", normalized=True)
    with pytest.raises(ValueError):
        EmbeddingVector.unit([0.0, 0.0], "m")


# --- detection service -------------------------------------------------------------


def test_detection_cached_roundtrip(tmp_path: Path, cache: DiskCache) -> None:
    image = write_png(tmp_path / "a.png")
    backend = MockDetectionBackend(boxes=[Detection(1, 2, 3, 4, 0.5)])
    service = DetectionService(backend, "mock-detector", cache)
    first = service.detect(image)
    second = service.detect(image)
    assert first == second == [Detection(1, 2, 3, 4, 0.5)]
    assert backend.calls == 1


def test_mock_detector_derived_box_in_bounds(tmp_path: Path, cache: DiskCache) -> None:
    image = write_png(tmp_path / "a.png", size=(40, 30))
    service = DetectionService(MockDetectionBackend(), "mock-detector", cache)
    [box] = service.detect(image)
    assert 0 <= box.x and box.x + box.width <= 40
    assert 0 <= box.y and box.y + box.height <= 30


# --- provider config -----------------------------------------------------------------


def test_provider_config_validation() -> None:
    from restory.errors import ConfigError

    with pytest.raises(ConfigError):
        ProviderConfig(endpoint_url="http://x", model_name="m", timeout_ms=0)
    with pytest.raises(ConfigError):
        ProviderConfig(endpoint_url="http://x", model_name="m", max_retries=-1)
    with pytest.raises(ConfigError):
        ProviderConfig.from_dict({"endpoint_url": "http://x", "model_name": "m", "zzz": 1})


# --- http backends ----------------------------------------------------------------


def _cfg(**overrides) -> ProviderConfig:
    defaults = dict(
        endpoint_url="http://provider.test/v1",
        model_name="test-model",
        timeout_ms=1000,
        max_retries=2,
        backoff_base_ms=1,
    )
    defaults.update(overrides)
    return ProviderConfig(**defaults)


def test_retry_then_success() -> None:
    seen = []

    def handler(request: httpx.Request) -> httpx.Response:
        seen.append(request)
        if len(seen) < 2:
            return httpx.Response(500)
        return httpx.Response(
            200, json={"choices": [{"message": {"content": "a caption"}}]}
        )

    client = httpx.Client(transport=httpx.MockTransport(handler))
    backend = HttpCaptionBackend(_cfg(), client=client)
    assert backend.complete(b"img", "prompt") == "a caption"
    assert len(seen) == 2


def test_retries_exhausted() -> None:
    def handler(request: httpx.Request) -> httpx.Response:
        return httpx.Response(503)

    client = httpx.Client(transport=httpx.MockTransport(handler))
    backend = HttpCaptionBackend(_cfg(max_retries=1), client=client)
    with pytest.raises(ProviderUnavailable):
        backend.complete(b"img", "prompt")


def test_backoff_sequence() -> None:
    sleeps: list[float] = []

    def handler(request: httpx.Request) -> httpx.Response:
        return httpx.Response(500)

    client = httpx.Client(transport=httpx.MockTransport(handler))
    with pytest.raises(ProviderUnavailable):
        post_with_retries(
            client,
            "http://provider.test/x",
            {},
            _cfg(max_retries=3, backoff_base_ms=100),
            sleep=sleeps.append,
        )
    assert sleeps == [0.1, 0.2, 0.4]


def test_non_retryable_status_fails_fast() -> None:
    seen = []

    def handler(request: httpx.Request) -> httpx.Response:
        seen.append(request)
        return httpx.Response(401)

    client = httpx.Client(transport=httpx.MockTransport(handler))
    backend = HttpEmbeddingBackend(_cfg(), client=client)
    with pytest.raises(ProviderUnavailable):
        backend.encode("text")
    assert len(seen) == 1


def test_auth_header_from_env(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.setenv("TEST_PROVIDER_KEY", "secret-token")
    captured = {}

    def handler(request: httpx.Request) -> httpx.Response:
        captured["auth"] = request.headers.get("authorization")
        return httpx.Response(200, json={"data": [{"embedding": [1.0, 0.0]}]})

    client = httpx.Client(transport=httpx.MockTransport(handler))
    backend = HttpEmbeddingBackend(
        _cfg(auth_env_var="TEST_PROVIDER_KEY"), client=client
    )
    assert backend.encode("text") == [1.0, 0.0]
    assert captured["auth"] == "Bearer secret-token"


def test_caption_payload_attaches_image() -> None:
    captured = {}

    def handler(request: httpx.Request) -> httpx.Response:
        import json as json_mod

        captured["payload"] = json_mod.loads(request.content)
        return httpx.Response(
            200, json={"choices": [{"message": {"content": "hi"}}]}
        )

    client = httpx.Client(transport=httpx.MockTransport(handler))
    backend = HttpCaptionBackend(_cfg(), client=client)
    backend.complete(b"PNGBYTES", "the prompt")
    message = captured["payload"]["messages"][0]
    assert message["content"][0] == {"type": "text", "text": "the prompt"}
    assert message["content"][1]["image_url"]["url"].startswith("data:image/png;base64,")
    assert captured["payload"]["model"] == "test-model"


def test_detector_parses_boxes_and_maps_errors() -> None:
    def ok_handler(request: httpx.Request) -> httpx.Response:
        return httpx.Response(
            200,
            json={
                "detections": [
                    {"x": 1, "y": 2, "width": 3, "height": 4, "confidence": 0.9}
                ]
            },
        )

    client = httpx.Client(transport=httpx.MockTransport(ok_handler))
    backend = HttpDetectionBackend(_cfg(), client=client)
    assert backend.detect(b"img") == [Detection(1, 2, 3, 4, 0.9)]

    def bad_handler(request: httpx.Request) -> httpx.Response:
        return httpx.Response(500)

    client = httpx.Client(transport=httpx.MockTransport(bad_handler))
    backend = HttpDetectionBackend(_cfg(max_retries=0), client=client)
    with pytest.raises(DetectorUnavailable):
        backend.detect(b"img")
