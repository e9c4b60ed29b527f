"""HTTP backends for the three model services.

The captioner and embedder speak OpenAI-compatible wire formats
(``/chat/completions`` with a base64 data-URL image attachment, and
``/embeddings``); the detector POSTs a base64 image to ``/detect`` and reads
back a JSON box list. All three share the same retry policy: transport
errors, 429, and 5xx responses are retried with exponential backoff up to
``max_retries`` extra attempts, then surface as ProviderUnavailable.

Credentials come from the environment variable named in the provider config
and are attached as a bearer token; they are never logged.
"""

from __future__ import annotations

import base64
import logging
import os
import time
from typing import Any, Callable

import httpx

from restory.errors import DetectorUnavailable, ProviderUnavailable
from restory.providers.base import Detection
from restory.providers.config import ProviderConfig

log = logging.getLogger(__name__)

RETRYABLE_STATUS = frozenset({429, 500, 502, 503, 504})


def _auth_headers(cfg: ProviderConfig) -> dict[str, str]:
    if cfg.auth_env_var:
        credential = os.environ.get(cfg.auth_env_var, "")
        if credential:
            return {"Authorization": f"Bearer {credential}"}
    return {}


def post_with_retries(
    client: httpx.Client,
    url: str,
    payload: dict,
    cfg: ProviderConfig,
    *,
    sleep: Callable[[float], None] = time.sleep,
    error_cls: type[ProviderUnavailable] = ProviderUnavailable,
) -> Any:
    """POST JSON and return the decoded JSON body, retrying transient failures."""
    headers = _auth_headers(cfg)
    timeout = cfg.timeout_ms / 1000.0
    last_failure = "no attempt made"
    for attempt in range(cfg.max_retries + 1):
        if attempt > 0:
            sleep(cfg.backoff_base_ms * 2 ** (attempt - 1) / 1000.0)
        try:
            response = client.post(url, json=payload, headers=headers, timeout=timeout)
        except httpx.HTTPError as exc:
            last_failure = f"transport error: {type(exc).__name__}"
            log.warning("POST %s attempt %d failed: %s", url, attempt + 1, last_failure)
            continue
        if response.status_code in RETRYABLE_STATUS:
            last_failure = f"status {response.status_code}"
            log.warning("POST %s attempt %d failed: %s", url, attempt + 1, last_failure)
            continue
        if response.status_code >= 400:
            raise error_cls(f"{url} answered status {response.status_code}")
        try:
            return response.json()
        except ValueError as exc:
            raise error_cls(f"{url} answered non-JSON body") from exc
    raise error_cls(
        f"{url} unavailable after {cfg.max_retries + 1} attempts ({last_failure})"
    )


def _image_data_url(image_bytes: bytes) -> str:
    return "data:image/png;base64," + base64.b64encode(image_bytes).decode("ascii")


class HttpCaptionBackend:
    def __init__(self, cfg: ProviderConfig, client: httpx.Client | None = None) -> None:
        self.cfg = cfg
        self._client = client or httpx.Client()

    def complete(self, image_bytes: bytes, prompt: str) -> str:
        payload = {
            "model": self.cfg.model_name,
            "messages": [
                {
                    "role": "user",
                    "content": [
                        {"type": "text", "text": prompt},
                        {
                            "type": "image_url",
                            "image_url": {"url": _image_data_url(image_bytes)},
                        },
                    ],
                }
            ],
        }
        url = self.cfg.endpoint_url.rstrip("/") + "/chat/completions"
        body = post_with_retries(self._client, url, payload, self.cfg)
        try:
            answer = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderUnavailable(f"{url} answered an unexpected shape") from exc
        if not isinstance(answer, str):
            raise ProviderUnavailable(f"{url} answered non-text content")
        return answer


class HttpEmbeddingBackend:
    def __init__(self, cfg: ProviderConfig, client: httpx.Client | None = None) -> None:
        self.cfg = cfg
        self._client = client or httpx.Client()

    def encode(self, text: str) -> list[float]:
        payload = {"model": self.cfg.model_name, "input": text}
        url = self.cfg.endpoint_url.rstrip("/") + "/embeddings"
        body = post_with_retries(self._client, url, payload, self.cfg)
        try:
            values = body["data"][0]["embedding"]
            return [float(v) for v in values]
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise ProviderUnavailable(f"{url} answered an unexpected shape") from exc


class HttpDetectionBackend:
    def __init__(self, cfg: ProviderConfig, client: httpx.Client | None = None) -> None:
        self.cfg = cfg
        self._client = client or httpx.Client()

    def detect(self, image_bytes: bytes) -> list[Detection]:
        payload = {
            "model": self.cfg.model_name,
            "image": base64.b64encode(image_bytes).decode("ascii"),
        }
        url = self.cfg.endpoint_url.rstrip("/") + "/detect"
        body = post_with_retries(
            self._client, url, payload, self.cfg, error_cls=DetectorUnavailable
        )
        try:
            return [
                Detection(
                    x=int(item["x"]),
                    y=int(item["y"]),
                    width=int(item["width"]),
                    height=int(item["height"]),
                    confidence=float(item["confidence"]),
                )
                for item in body["detections"]
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise DetectorUnavailable(f"{url} answered an unexpected shape") from exc
