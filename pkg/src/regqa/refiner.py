"""Incremental entity consolidation and embedding construction.

New entity drafts are lemmatized, merged into the local schema on an
exact lemma match, otherwise embedded and merged into the most similar
existing entity when cosine similarity reaches the threshold, otherwise
inserted as new entries. Relation embeddings are collected as-is
(deduplicated by exact string only), and triple embeddings are the
horizontal concatenation [head, relation, tail] of their parts.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels
from .errors import DimensionMismatch, ZeroVector
from .sections import SectionId
from .store import VectorTable

logger = logging.getLogger(__name__)

_CAMEL_BOUNDARY_1 = re.compile(r"(?<=[a-z0-9])(?=[A-Z])")
_CAMEL_BOUNDARY_2 = re.compile(r"(?<=[A-Z])(?=[A-Z][a-z])")
_SPACE_RE = re.compile(r"[\s_]+")

# singulars that would be mangled by the suffix rules
_KEEP_SINGULAR = frozenset({
    "series", "species", "gas", "lens", "atlas", "bus", "plus", "basis",
    "premises", "scissors", "debris",
})

_IRREGULAR_PLURALS = {
    "men": "man", "women": "woman", "feet": "foot", "teeth": "tooth",
    "children": "child", "people": "person", "mice": "mouse",
    "geese": "goose", "criteria": "criterion", "phenomena": "phenomenon",
}

_ES_SUFFIXES = ("sses", "xes", "zes", "ches", "shes")


def _singularize(word: str) -> str:
    """Rule-table singularization of one lowercase word."""
    if word in _KEEP_SINGULAR or word in _IRREGULAR_PLURALS.values():
        return word
    if word in _IRREGULAR_PLURALS:
        return _IRREGULAR_PLURALS[word]
    if word.endswith("ies") and len(word) >= 5:
        return word[:-3] + "y"
    if word.endswith(_ES_SUFFIXES):
        return word[:-2]
    if word.endswith("s") and not word.endswith(("ss", "us", "is")) and len(word) >= 4:
        return word[:-1]
    return word


def _is_proper(token: str, allowlist: frozenset[str]) -> bool:
    if token in allowlist:
        return True
    return len(token) >= 2 and token.isalpha() and token.isupper()


def lemmatize(name: str, proper_nouns: frozenset[str] = frozenset()) -> str:
    """Normalize an entity name to its lemma.

    CamelCase is split into words, tokens are lowercased except detected
    proper nouns (all-caps tokens or allowlist members), and the final
    noun is singularized by rule table. Idempotent.
    """
    if not name:
        raise ValueError("cannot lemmatize an empty name")
    spaced = _CAMEL_BOUNDARY_1.sub(" ", name)
    spaced = _CAMEL_BOUNDARY_2.sub(" ", spaced)
    tokens = [t for t in _SPACE_RE.split(spaced.strip()) if t]
    out: list[str] = []
    for token in tokens:
        out.append(token if _is_proper(token, proper_nouns) else token.lower())
    if out and not _is_proper(out[-1], proper_nouns) and out[-1].isalpha():
        out[-1] = _singularize(out[-1])
    return " ".join(out)


def cosine_similarity(a, b) -> float:
    """Exact cosine: dot(a, b) / (|a| |b|)."""
    va = np.asarray(a, dtype=np.float64)
    vb = np.asarray(b, dtype=np.float64)
    if va.shape != vb.shape or va.ndim != 1:
        raise DimensionMismatch(f"shapes {va.shape} vs {vb.shape}")
    norm_a = float(np.linalg.norm(va))
    norm_b = float(np.linalg.norm(vb))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ZeroVector("cosine undefined for zero vectors")
    return float(va @ vb / (norm_a * norm_b))


@dataclass
class Entity:
    element_id: int
    name: str
    label: str
    lemma: str
    embedding: np.ndarray
    section_ids: set[SectionId]
    head_count: int = 0
    tail_count: int = 0


@dataclass
class StoredTriple:
    triple_id: int
    head_id: int
    tail_id: int
    relation: str
    triple_embedding: np.ndarray
    section_ids: set[SectionId]


@dataclass
class MergeDecision:
    kind: str  # exact_merge | similarity_merge | insert_new
    target_lemma: str | None = None
    similarity: float | None = None


def build_triple_embedding(head: Entity, relation_embedding: np.ndarray,
                           tail: Entity) -> np.ndarray:
    """[head | relation | tail], a vector of length 3d."""
    rel = np.asarray(relation_embedding, dtype=np.float64)
    parts = (head.embedding, rel, tail.embedding)
    dims = {p.shape for p in parts}
    if len(dims) != 1 or rel.ndim != 1:
        raise DimensionMismatch(f"component shapes differ: {sorted(map(str, dims))}")
    return np.concatenate(parts)


class LocalSchema:
    """The incrementally maintained registry of entities, relations, and
    triples with their embeddings."""

    def __init__(self, embedder: Callable[[str], np.ndarray], dim: int):
        self.embedder = embedder
        self.dim = dim
        self.entities: dict[str, Entity] = {}
        self.relations: dict[str, np.ndarray] = {}
        self.triples: list[StoredTriple] = []
        self._by_id: list[Entity] = []
        self._triple_index: dict[tuple[int, str, int], StoredTriple] = {}
        # scan matrix grows amortized so incremental refinement stays O(n d)
        self._matrix = np.empty((16, dim), dtype=np.float64)
        self._norms = np.empty(16, dtype=np.float64)

    # --- entities ---

    def __len__(self) -> int:
        return len(self.entities)

    def entity_by_id(self, element_id: int) -> Entity:
        return self._by_id[element_id - 1]

    def _embed(self, text: str) -> np.ndarray:
        vec = np.asarray(self.embedder(text), dtype=np.float64)
        if vec.shape != (self.dim,):
            raise DimensionMismatch(
                f"embedder returned shape {vec.shape}, expected ({self.dim},)")
        return vec

    def _scan(self, query: np.ndarray) -> np.ndarray:
        count = len(self._by_id)
        q_norm = float(np.linalg.norm(query))
        if q_norm == 0.0:
            raise ZeroVector("zero embedding for entity lemma")
        return kernels.cosine_scan(
            np.ascontiguousarray(self._matrix[:count]), self._norms[:count],
            np.ascontiguousarray(query), q_norm)

    def _insert(self, name: str, label: str, lemma: str,
                embedding: np.ndarray, section_id: SectionId) -> Entity:
        entity = Entity(
            element_id=len(self._by_id) + 1,
            name=name,
            label=label,
            lemma=lemma,
            embedding=embedding,
            section_ids={section_id},
        )
        self.entities[lemma] = entity
        self._by_id.append(entity)
        count = len(self._by_id)
        if count > self._matrix.shape[0]:
            grown = np.empty((self._matrix.shape[0] * 2, self.dim))
            grown[:count - 1] = self._matrix[:count - 1]
            grown_norms = np.empty(grown.shape[0])
            grown_norms[:count - 1] = self._norms[:count - 1]
            self._matrix, self._norms = grown, grown_norms
        self._matrix[count - 1] = embedding
        self._norms[count - 1] = float(np.linalg.norm(embedding))
        return entity

    def refine(self, name: str, label: str, section_id: SectionId,
               tau: float,
               proper_nouns: frozenset[str] = frozenset()) -> tuple[Entity, MergeDecision]:
        """Merge one draft into the schema; returns the surviving entity
        and the decision taken."""
        if not 0.0 < tau <= 1.0:
            raise ValueError("tau must be in (0, 1]")
        lemma = lemmatize(name, proper_nouns)
        existing = self.entities.get(lemma)
        if existing is not None:
            existing.section_ids.add(section_id)
            return existing, MergeDecision("exact_merge", target_lemma=lemma)
        embedding = self._embed(lemma)
        if self._by_id:
            sims = self._scan(embedding)
            best_index = int(np.argmax(sims))  # first max = earliest element_id
            best = float(sims[best_index])
            if best >= tau:
                target = self._by_id[best_index]
                target.section_ids.add(section_id)
                return target, MergeDecision(
                    "similarity_merge", target_lemma=target.lemma, similarity=best)
        entity = self._insert(name, label, lemma, embedding, section_id)
        return entity, MergeDecision("insert_new", target_lemma=lemma)

    # --- relations and triples ---

    def relation_embedding(self, relation: str) -> np.ndarray:
        if relation not in self.relations:
            self.relations[relation] = self._embed(relation)
        return self.relations[relation]

    def add_triple(self, head: Entity, relation: str, tail: Entity,
                   section_id: SectionId) -> StoredTriple:
        key = (head.element_id, relation, tail.element_id)
        stored = self._triple_index.get(key)
        if stored is not None:
            stored.section_ids.add(section_id)
        else:
            embedding = build_triple_embedding(
                head, self.relation_embedding(relation), tail)
            stored = StoredTriple(
                triple_id=len(self.triples) + 1,
                head_id=head.element_id,
                tail_id=tail.element_id,
                relation=relation,
                triple_embedding=embedding,
                section_ids={section_id},
            )
            self.triples.append(stored)
            self._triple_index[key] = stored
        head.head_count += 1
        tail.tail_count += 1
        return stored


def refine_entity(draft, schema: LocalSchema, tau: float) -> MergeDecision:
    """Spec-surface wrapper: consolidate one EntityDraft into the schema."""
    _, decision = schema.refine(draft.name, draft.label, draft.section_id, tau)
    return decision


def export_embeddings(schema: LocalSchema) -> tuple[VectorTable, VectorTable]:
    """Vector tables for persistence and retrieval: entities at dim d,
    triples at 3d."""
    entity_table = VectorTable(schema.dim)
    for entity in schema._by_id:
        entity_table.add_row(entity.element_id, entity.embedding,
                             entity.section_ids)
    triple_table = VectorTable(3 * schema.dim)
    for triple in schema.triples:
        triple_table.add_row(triple.triple_id, triple.triple_embedding,
                             triple.section_ids)
    return entity_table, triple_table
