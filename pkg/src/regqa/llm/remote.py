"""HTTPS JSON provider speaking the common chat-completions/embeddings
wire format. Credentials come from the environment only."""
from __future__ import annotations

import logging
import os

import numpy as np
import requests

from ..errors import ProviderError, TokenLimitExceeded
from .config import ProviderConfig

logger = logging.getLogger(__name__)


class RemoteProvider:
    """Chat and embedding calls against a provider-configurable base URL."""

    def __init__(self, config: ProviderConfig, timeout: float = 60.0):
        if not config.base_url:
            raise ProviderError("remote provider requires a base_url")
        api_key = os.environ.get(config.api_key_env, "")
        if not api_key:
            raise ProviderError(
                f"credential environment variable {config.api_key_env} is not set")
        self.config = config
        self.dim = config.embedding_dim
        self.timeout = timeout
        self._headers = {
            "Authorization": f"Bearer {api_key}",
            "Content-Type": "application/json",
        }

    def _post(self, path: str, payload: dict) -> dict:
        url = self.config.base_url.rstrip("/") + path
        try:
            response = requests.post(url, json=payload, headers=self._headers,
                                     timeout=self.timeout)
        except requests.RequestException as exc:
            raise ProviderError(f"transport failure calling {url}: {exc}") from exc
        if not 200 <= response.status_code < 300:
            raise ProviderError(
                f"provider returned HTTP {response.status_code}: {response.text[:200]}")
        return response.json()

    def complete(self, template_id: str, system: str, user: str,
                 slots: dict[str, str]) -> str:
        del slots  # only deterministic mocks are slot-driven
        body = self._post("/chat/completions", {
            "model": self.config.model_name,
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
        })
        try:
            choice = body["choices"][0]
            content = choice["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"malformed chat response: {exc}") from exc
        if choice.get("finish_reason") == "length":
            raise TokenLimitExceeded(
                f"response truncated at max_tokens={self.config.max_tokens}")
        return content

    def embed(self, texts: list[str]) -> np.ndarray:
        body = self._post("/embeddings", {
            "model": self.config.embedding_model,
            "input": list(texts),
        })
        try:
            rows = [entry["embedding"] for entry in body["data"]]
        except (KeyError, TypeError) as exc:
            raise ProviderError(f"malformed embeddings response: {exc}") from exc
        matrix = np.asarray(rows, dtype=np.float64)
        if matrix.shape != (len(texts), self.dim):
            raise ProviderError(
                f"provider returned embeddings of shape {matrix.shape}, "
                f"expected ({len(texts)}, {self.dim})")
        return matrix
