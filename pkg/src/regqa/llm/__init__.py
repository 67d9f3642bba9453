"""LLM gateway: providers, prompt templates, structured-output checks."""
from __future__ import annotations

from ..errors import ProviderError
from .config import ProviderConfig
from .gateway import LlmGateway
from .mock import (
    FailingChatProvider,
    MockChatProvider,
    MockEmbeddingProvider,
    fixture_key,
    hash_vector,
    write_fixture,
)
from .remote import RemoteProvider
from .templates import PromptTemplate, load_templates, template_checksums

__all__ = [
    "ProviderConfig",
    "LlmGateway",
    "MockChatProvider",
    "MockEmbeddingProvider",
    "FailingChatProvider",
    "RemoteProvider",
    "PromptTemplate",
    "load_templates",
    "template_checksums",
    "fixture_key",
    "hash_vector",
    "write_fixture",
    "build_gateway",
]


def build_gateway(provider: str = "mock", *, dim: int = 64,
                  fixtures_dir=None, strict: bool = False,
                  fixture_vectors=None, config: ProviderConfig | None = None,
                  max_parallel: int = 4) -> LlmGateway:
    """Factory wiring a gateway for the named provider.

    ``mock`` is the default and the test workhorse; ``remote`` requires a
    base URL and a credential in the environment. ``failing`` always
    errors and exists for failure-injection tests.
    """
    if provider == "mock":
        cfg = config or ProviderConfig(provider_kind="mock", embedding_dim=dim)
        return LlmGateway(
            cfg,
            MockChatProvider(fixtures_dir=fixtures_dir, strict=strict),
            MockEmbeddingProvider(dim=cfg.embedding_dim,
                                  fixture_vectors=fixture_vectors),
            max_parallel=max_parallel,
        )
    if provider == "remote":
        if config is None or config.provider_kind != "remote-chat-embeddings":
            raise ProviderError(
                "remote provider requires a ProviderConfig with "
                "provider_kind='remote-chat-embeddings'")
        remote = RemoteProvider(config)
        return LlmGateway(config, remote, remote, max_parallel=max_parallel)
    if provider == "failing":
        cfg = config or ProviderConfig(provider_kind="mock", embedding_dim=dim)
        return LlmGateway(cfg, FailingChatProvider(),
                          MockEmbeddingProvider(dim=cfg.embedding_dim),
                          max_parallel=max_parallel)
    raise ProviderError(f"unknown provider {provider!r}")
