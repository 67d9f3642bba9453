"""Uniform chat/embedding interface with structured-output validation.

Every chat response is validated against the template's JSON Schema; a
single repair retry (with the violation appended to the prompt) is
attempted before SchemaViolation is raised. Request parallelism is
bounded by a semaphore shared across callers.
"""
from __future__ import annotations

import json
import logging
import re
import threading

import jsonschema
import numpy as np

from ..errors import EmptyInput, SchemaViolation, TemplateError
from .config import ProviderConfig
from .templates import PromptTemplate, load_templates, template_checksums

logger = logging.getLogger(__name__)

_FENCE_RE = re.compile(r"^```[a-zA-Z]*\n(.*)\n```$", re.DOTALL)


def _strip_fences(text: str) -> str:
    stripped = text.strip()
    match = _FENCE_RE.match(stripped)
    return match.group(1) if match else stripped


class LlmGateway:
    """Owns prompt templates and mediates all provider traffic."""

    def __init__(self, config: ProviderConfig, chat_provider, embedding_provider,
                 templates: dict[str, PromptTemplate] | None = None,
                 max_parallel: int = 4):
        self.config = config
        self.chat_provider = chat_provider
        self.embedding_provider = embedding_provider
        self.templates = templates if templates is not None else load_templates()
        self._semaphore = threading.BoundedSemaphore(max_parallel)

    @property
    def dim(self) -> int:
        return self.embedding_provider.dim

    def prompt_checksums(self) -> dict[str, str]:
        return template_checksums(self.templates)

    def template(self, template_id: str) -> PromptTemplate:
        try:
            return self.templates[template_id]
        except KeyError:
            raise TemplateError(f"unknown template {template_id!r}")

    def render_user(self, template_id: str, slots: dict[str, str]) -> str:
        """Rendered user prompt for (template_id, slots); this string is
        also the mock fixture key material."""
        return self.template(template_id).render(slots)

    def chat(self, template_id: str, slots: dict[str, str]):
        template = self.template(template_id)
        user = template.render(slots)
        raw = self._complete(template, user, slots)
        try:
            return self._validate(template, raw)
        except SchemaViolation as first:
            logger.warning("%s: schema violation, retrying once: %s",
                           template_id, first)
            repair = (
                f"{user}\n\nYour previous response was rejected: {first}. "
                "Respond again with only a JSON object matching the required shape."
            )
            raw = self._complete(template, repair, slots)
            try:
                return self._validate(template, raw)
            except SchemaViolation as second:
                raise SchemaViolation(
                    f"{template_id}: response failed schema twice: {second}")

    def _complete(self, template: PromptTemplate, user: str,
                  slots: dict[str, str]) -> str:
        with self._semaphore:
            return self.chat_provider.complete(
                template.template_id, template.system_text, user, slots)

    @staticmethod
    def _validate(template: PromptTemplate, raw: str):
        try:
            parsed = json.loads(_strip_fences(raw))
        except json.JSONDecodeError as exc:
            raise SchemaViolation(f"response is not JSON ({exc})")
        try:
            jsonschema.validate(parsed, template.output_schema)
        except jsonschema.ValidationError as exc:
            raise SchemaViolation(exc.message)
        return parsed

    def embed(self, texts: list[str]) -> list[np.ndarray]:
        if not texts:
            raise EmptyInput("embed() requires at least one text")
        if any(not isinstance(t, str) or not t for t in texts):
            raise EmptyInput("embed() inputs must be non-empty strings")
        with self._semaphore:
            matrix = self.embedding_provider.embed(list(texts))
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.shape != (len(texts), self.dim):
            raise SchemaViolation(
                f"embedding provider returned shape {matrix.shape}, "
                f"expected ({len(texts)}, {self.dim})")
        if not np.all(np.isfinite(matrix)):
            raise SchemaViolation("embedding provider returned non-finite values")
        return [matrix[i] for i in range(matrix.shape[0])]
