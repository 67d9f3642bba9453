"""Deterministic offline providers.

The mock chat provider answers from fixture files keyed by
``(template_id, sha256(rendered user text))`` and, unless ``strict`` is
set, falls back to rule-based responses so a full pipeline run works on
any corpus with no fixtures at all. Both paths are pure functions of the
template id and slot bindings: identical inputs give byte-identical
output across runs.

Mock embeddings expand a seeded hash of the input string to ``dim``
reals and L2-normalize, so identical strings embed identically (cosine
exactly 1.0) and distinct strings land nearly orthogonal at moderate
dimensions.
"""
from __future__ import annotations

import hashlib
import json
import logging
import re
from pathlib import Path

import numpy as np

from ..errors import MockFixtureMissing, ProviderError
from ..sections import detect_cross_references

logger = logging.getLogger(__name__)

_WORD_RE = re.compile(r"[A-Za-z][A-Za-z-]*")
_SENTENCE_SPLIT_RE = re.compile(r"(?<=[.;:!?])\s+")

# function words plus verbs common in regulatory prose; anything outside
# this set is treated as entity material by the fallback extractor
_STOPWORDS = frozenset("""
a about above after all along also although an and any are as at based be
because been before being below between both but by can clearly could do
does done during each either ensure every except for from further has have
having how however if in including into is it its itself least less
may might more most must near no nor not of off on once only onto or other
our out over per provided regarding required requires shall should so some
such than that the their them then there these they this those through to
under unless until upon use used using was were what when where whether
which while who whose will with within without would
""".split())

_SMALL_VERBS = frozenset(
    "is are was were be been being has have had must shall may might can "
    "could should would will do does did".split())


def fixture_key(rendered_user_text: str) -> str:
    """Content address of a rendered prompt."""
    return hashlib.sha256(rendered_user_text.encode("utf-8")).hexdigest()


def fixture_path(fixtures_dir: str | Path, template_id: str, key: str) -> Path:
    return Path(fixtures_dir) / template_id / f"{key}.json"


def write_fixture(fixtures_dir: str | Path, template_id: str,
                  rendered_user_text: str, payload) -> Path:
    """Store a canned response for one rendered prompt."""
    path = fixture_path(fixtures_dir, template_id, fixture_key(rendered_user_text))
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(payload, str):
        path.write_text(payload, encoding="utf-8")
    else:
        path.write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")
    return path


def split_sentences(text: str) -> list[str]:
    parts = [p.strip() for p in _SENTENCE_SPLIT_RE.split(text) if p.strip()]
    return parts if parts else ([text] if text else [])


def _noun_runs(text: str, max_words: int = 4) -> list[str]:
    """Contiguous non-stopword word runs, lowercased, order-preserving."""
    runs: list[str] = []
    current: list[str] = []
    for word in _WORD_RE.findall(text):
        lowered = word.lower()
        if lowered in _STOPWORDS or len(lowered) < 2:
            if current:
                runs.append(" ".join(current))
                current = []
            continue
        current.append(lowered)
        if len(current) == max_words:
            runs.append(" ".join(current))
            current = []
    if current:
        runs.append(" ".join(current))
    return list(dict.fromkeys(runs))


def _entities_payload(names: list[str]) -> list[dict]:
    return [{"name": name, "label": "concept"} for name in names]


def _relation_between(sentence: str, head: str, tail: str) -> str:
    lowered = sentence.lower()
    start = lowered.find(head.lower())
    end = lowered.find(tail.lower(), start + len(head))
    if start < 0 or end < 0:
        return "related_to"
    between = lowered[start + len(head):end]
    words = [w for w in _WORD_RE.findall(between) if w not in _SMALL_VERBS
             and w not in ("the", "a", "an")]
    return "_".join(words[:3]) if words else "related_to"


class MockChatProvider:
    """Fixture-driven chat with deterministic rule-based fallback."""

    def __init__(self, fixtures_dir: str | Path | None = None,
                 strict: bool = False):
        self.fixtures_dir = Path(fixtures_dir) if fixtures_dir else None
        self.strict = strict

    def complete(self, template_id: str, system: str, user: str,
                 slots: dict[str, str]) -> str:
        key = fixture_key(user)
        if self.fixtures_dir is not None:
            path = fixture_path(self.fixtures_dir, template_id, key)
            if path.exists():
                return path.read_text(encoding="utf-8")
        if self.strict:
            raise MockFixtureMissing(template_id, key)
        return self._fallback(template_id, slots)

    def _fallback(self, template_id: str, slots: dict[str, str]) -> str:
        handlers = {
            "content_prune": self._prune,
            "entity_extract": self._entity_extract,
            "entity_validate": self._entity_validate,
            "relation_extract": self._relation_extract,
            "relation_validate": self._relation_validate,
            "query_decompose": self._query_decompose,
            "answer_synthesize": self._answer_synthesize,
        }
        try:
            handler = handlers[template_id]
        except KeyError:
            raise ProviderError(f"mock has no handler for template {template_id!r}")
        return json.dumps(handler(slots), sort_keys=True)

    @staticmethod
    def _prune(slots):
        return {"sentences": split_sentences(slots["text"])}

    @staticmethod
    def _entity_extract(slots):
        sentences = json.loads(slots["sentences"])
        text = " ".join(sentences)
        names: list[str] = []
        for sentence in sentences:
            names.extend(_noun_runs(sentence))
        refs = [r.canonical_text for r in detect_cross_references(text)]
        return {
            "entities": _entities_payload(list(dict.fromkeys(names))),
            "referenced_sections": refs,
        }

    @staticmethod
    def _entity_validate(slots):
        entities = json.loads(slots["entities"])
        kept = [e for e in entities if e.get("name") and e.get("label")]
        return {"entities": kept}

    @staticmethod
    def _relation_extract(slots):
        entities = [e["name"] for e in json.loads(slots["entities"])]
        sentences = json.loads(slots["sentences"])
        triples = []
        for sentence in sentences:
            lowered = sentence.lower()
            present = sorted(
                (lowered.find(name.lower()), name)
                for name in entities if name.lower() in lowered)
            for (_, head), (_, tail) in zip(present, present[1:]):
                triples.append({
                    "head": head,
                    "relation": _relation_between(sentence, head, tail),
                    "tail": tail,
                })
        return {"triples": triples}

    @staticmethod
    def _relation_validate(slots):
        triples = json.loads(slots["triples"])
        return {"triples": [t for t in triples if t["head"] != t["tail"]]}

    @staticmethod
    def _query_decompose(slots):
        question = slots["question"]
        names = _noun_runs(question)
        triples = []
        lowered = question.lower()
        present = sorted((lowered.find(n), n) for n in names)
        for (_, head), (_, tail) in zip(present, present[1:]):
            triples.append({
                "head": head,
                "relation": _relation_between(question, head, tail),
                "tail": tail,
            })
        return {"entities": names, "triples": triples}

    @staticmethod
    def _answer_synthesize(slots):
        sections = json.loads(slots["sections"])
        kept = [s["id"] for s in sections]
        lines = []
        for entry in sections:
            first = split_sentences(entry["text"])
            lines.append(f"{entry['id']}: {first[0] if first else entry['text']}")
        return {"summary": " ".join(lines), "kept_section_ids": kept}


class FailingChatProvider:
    """Always raises; used to exercise provider-failure handling."""

    def complete(self, template_id, system, user, slots):
        raise ProviderError("injected provider failure")


def hash_vector(text: str, dim: int) -> np.ndarray:
    """Expand sha256(text) in counter mode to ``dim`` uniform reals, then
    L2-normalize."""
    out = np.empty(dim, dtype=np.float64)
    data = text.encode("utf-8")
    produced = 0
    counter = 0
    while produced < dim:
        digest = hashlib.sha256(data + b"\x00" + counter.to_bytes(4, "big")).digest()
        for offset in range(0, 32, 8):
            if produced >= dim:
                break
            value = int.from_bytes(digest[offset:offset + 8], "big")
            out[produced] = value / 2.0**63 - 1.0
            produced += 1
        counter += 1
    norm = np.linalg.norm(out)
    if norm == 0.0:  # unreachable in practice
        out[0] = 1.0
        norm = 1.0
    return out / norm


class MockEmbeddingProvider:
    """Hash-derived embeddings with optional per-string overrides.

    ``fixture_vectors`` maps exact input strings to vectors; overrides are
    L2-normalized on the way in so replayed cosine scores are scale-free.
    """

    def __init__(self, dim: int = 64,
                 fixture_vectors: dict[str, np.ndarray] | None = None):
        self.dim = dim
        self._fixtures: dict[str, np.ndarray] = {}
        for text, vector in (fixture_vectors or {}).items():
            vec = np.asarray(vector, dtype=np.float64)
            if vec.shape != (dim,):
                raise ValueError(
                    f"fixture vector for {text!r} has shape {vec.shape}, "
                    f"expected ({dim},)")
            self._fixtures[text] = vec / np.linalg.norm(vec)

    def embed(self, texts: list[str]) -> np.ndarray:
        rows = [
            self._fixtures.get(text)
            if text in self._fixtures else hash_vector(text, self.dim)
            for text in texts
        ]
        return np.vstack(rows)
