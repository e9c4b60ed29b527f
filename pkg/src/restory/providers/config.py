"""Connection settings for one external model service."""

from __future__ import annotations

from dataclasses import dataclass

from restory.errors import ConfigError


@dataclass(frozen=True)
class ProviderConfig:
    endpoint_url: str
    model_name: str
    auth_env_var: str = ""
    timeout_ms: int = 30_000
    max_retries: int = 3
    backoff_base_ms: int = 250

    def __post_init__(self) -> None:
        if not self.endpoint_url:
            raise ConfigError("provider endpoint_url must be non-empty")
        if not self.model_name:
            raise ConfigError("provider model_name must be non-empty")
        if self.timeout_ms <= 0:
            raise ConfigError("timeout_ms must be > 0")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")
        if self.backoff_base_ms < 0:
            raise ConfigError("backoff_base_ms must be >= 0")

    @classmethod
    def from_dict(cls, data: dict) -> "ProviderConfig":
        unknown = set(data) - {
            "endpoint_url",
            "model_name",
            "auth_env_var",
            "timeout_ms",
            "max_retries",
            "backoff_base_ms",
        }
        if unknown:
            raise ConfigError(f"unknown provider config fields: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(f"incomplete provider config: {exc}") from exc
