"""Prompt templates: versioned JSON artifacts shipped under ``prompts/``.

Each template carries a system text, a user text with ``{slot}``
placeholders, and a JSON Schema the response must validate against.
Templates are content-addressed: run reports record their checksums so a
stored bundle pins the exact prompt wording that produced it.
"""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from importlib import resources

from ..errors import TemplateError

TEMPLATE_IDS = (
    "content_prune",
    "entity_extract",
    "entity_validate",
    "relation_extract",
    "relation_validate",
    "query_decompose",
    "answer_synthesize",
)

_SLOT_RE = re.compile(r"\{([a-z_]+)\}")


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    version: int
    system_text: str
    user_text: str
    output_schema: dict

    def slots(self) -> set[str]:
        return set(_SLOT_RE.findall(self.user_text))

    def render(self, bindings: dict[str, str]) -> str:
        """Fill every placeholder; unbound or unknown slots are errors."""
        expected = self.slots()
        given = set(bindings)
        if given - expected:
            raise TemplateError(
                f"{self.template_id}: unknown slots {sorted(given - expected)}")
        if expected - given:
            raise TemplateError(
                f"{self.template_id}: missing slots {sorted(expected - given)}")
        for name, value in bindings.items():
            if not isinstance(value, str):
                raise TemplateError(
                    f"{self.template_id}: slot {name!r} must be a string")
        return _SLOT_RE.sub(lambda m: bindings[m.group(1)], self.user_text)

    def checksum(self) -> str:
        payload = json.dumps(
            {
                "template_id": self.template_id,
                "version": self.version,
                "system": self.system_text,
                "user": self.user_text,
                "output_schema": self.output_schema,
            },
            sort_keys=True,
            separators=(",", ":"),
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def load_templates() -> dict[str, PromptTemplate]:
    templates: dict[str, PromptTemplate] = {}
    package = resources.files("regqa.llm.prompts")
    for template_id in TEMPLATE_IDS:
        raw = json.loads((package / f"{template_id}.json").read_text("utf-8"))
        if raw["template_id"] != template_id:
            raise TemplateError(
                f"template file {template_id}.json declares id {raw['template_id']!r}")
        templates[template_id] = PromptTemplate(
            template_id=template_id,
            version=int(raw.get("version", 1)),
            system_text=raw["system"],
            user_text=raw["user"],
            output_schema=raw["output_schema"],
        )
    return templates


def template_checksums(templates: dict[str, PromptTemplate]) -> dict[str, str]:
    return {tid: tpl.checksum() for tid, tpl in sorted(templates.items())}
