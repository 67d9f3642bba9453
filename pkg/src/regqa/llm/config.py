"""Provider configuration."""
from __future__ import annotations

from dataclasses import dataclass

PROVIDER_KINDS = ("mock", "remote-chat-embeddings")


@dataclass
class ProviderConfig:
    provider_kind: str = "mock"
    model_name: str = "mock-chat"
    embedding_model: str = "mock-embed"
    temperature: float = 0.2
    max_tokens: int = 1500
    embedding_dim: int = 64
    base_url: str | None = None
    # name of the environment variable holding the credential; the value
    # itself is never stored in configuration files
    api_key_env: str = "REGQA_API_KEY"

    def __post_init__(self):
        if self.provider_kind not in PROVIDER_KINDS:
            raise ValueError(f"unknown provider kind {self.provider_kind!r}")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be in [0, 2]")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        if self.embedding_dim < 8:
            raise ValueError("embedding_dim must be >= 8")
