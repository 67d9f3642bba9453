"""Hybrid retrieval: decompose the question, match entities and triples
against the vector tables, intersect the candidate section sets, expand
through the navigator graph, and synthesize a cited answer.

Matching is semantic (cosine against entity vectors at dim d and triple
vectors at 3d); expansion is structural (outgoing refers_to followed
transitively, one level of has-children per pool member). Seeds come
from the intersection of the two candidate sets; when the intersection
is empty the engine falls back to their union and flags it in the trace.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .bundle import Bundle
from .errors import (
    EmptyDecomposition,
    NoCandidates,
    RetrievalStageError,
)
from .extraction import estimate_tokens, normalize_relation, sentences_slot
from .ingest import SectionNode
from .llm.gateway import LlmGateway
from .navgraph import HAS, REFERS_TO
from .refiner import lemmatize
from .sections import SectionId, parent_of, sort_key
from .store import top_k

logger = logging.getLogger(__name__)

NO_PROVISIONS_SUMMARY = "No relevant provisions were found for this question."


@dataclass
class RetrievalConfig:
    k: int = 5
    min_sim: float = 0.5
    fallback_to_union: bool = True
    include_children: bool = True
    include_parents: bool = False
    follow_incoming: bool = False
    max_context_tokens: int = 6000
    proper_nouns: frozenset[str] = frozenset()

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass
class QueryDecomposition:
    entities: list[str]
    triples: list[tuple[str, str, str]]
    symmetrized: bool = False


def symmetrize(decomposition: QueryDecomposition) -> QueryDecomposition:
    """Add the head/tail-swapped twin of every triple (voice robustness)."""
    triples: dict[tuple[str, str, str], None] = {}
    for head, relation, tail in decomposition.triples:
        triples.setdefault((head, relation, tail), None)
        triples.setdefault((tail, relation, head), None)
    return QueryDecomposition(
        entities=list(dict.fromkeys(decomposition.entities)),
        triples=list(triples),
        symmetrized=True,
    )


@dataclass
class RetrievalTrace:
    entity_hits: dict[str, list[tuple[int, float]]] = field(default_factory=dict)
    triple_hits: dict[str, list[tuple[int, float]]] = field(default_factory=dict)
    entity_candidates: set[SectionId] = field(default_factory=set)
    triple_candidates: set[SectionId] = field(default_factory=set)
    intersection: set[SectionId] = field(default_factory=set)
    seeds: set[SectionId] = field(default_factory=set)
    fallback_used: bool = False
    expanded: set[SectionId] = field(default_factory=set)
    dropped_for_budget: list[str] = field(default_factory=list)
    entities: list[str] = field(default_factory=list)
    triples: list[tuple[str, str, str]] = field(default_factory=list)
    reason: str | None = None

    def to_dict(self) -> dict:
        def ids(values):
            return sorted(s.canonical_text for s in values)

        return {
            "entities": self.entities,
            "triples": [list(t) for t in self.triples],
            "entity_hits": {k: [[i, s] for i, s in v]
                            for k, v in self.entity_hits.items()},
            "triple_hits": {k: [[i, s] for i, s in v]
                            for k, v in self.triple_hits.items()},
            "entity_candidates": ids(self.entity_candidates),
            "triple_candidates": ids(self.triple_candidates),
            "intersection": ids(self.intersection),
            "seeds": ids(self.seeds),
            "fallback_used": self.fallback_used,
            "expanded": ids(self.expanded),
            "dropped_for_budget": self.dropped_for_budget,
            "reason": self.reason,
        }


@dataclass
class AnswerReference:
    section_id: SectionId
    text: str
    source_url: str | None

    def to_dict(self) -> dict:
        return {
            "section_id": self.section_id.canonical_text,
            "text": self.text,
            "source_url": self.source_url,
        }


@dataclass
class Answer:
    summary: str
    references: list[AnswerReference]
    trace: RetrievalTrace

    def to_dict(self, include_trace: bool = False) -> dict:
        payload = {
            "summary": self.summary,
            "references": [ref.to_dict() for ref in self.references],
        }
        if include_trace:
            payload["trace"] = self.trace.to_dict()
        return payload


class RetrievalEngine:
    """Answers questions over an immutable bundle; instances are cheap
    and safe to share across concurrent queries."""

    def __init__(self, bundle: Bundle, gateway: LlmGateway,
                 config: RetrievalConfig | None = None):
        self.bundle = bundle
        self.gateway = gateway
        self.config = config or RetrievalConfig()
        self._corpus_by_id = bundle.corpus_by_id()

    # --- stages ---

    def decompose_query(self, question: str) -> QueryDecomposition:
        if not question or not question.strip():
            raise EmptyDecomposition("question is empty")
        result = self.gateway.chat("query_decompose", {"question": question})
        entities = [e.strip() for e in result["entities"] if e.strip()]
        triples = [
            (t["head"].strip(), normalize_relation(t["relation"]),
             t["tail"].strip())
            for t in result["triples"]
            if t["head"].strip() and t["tail"].strip()
        ]
        if not entities:
            raise EmptyDecomposition(
                "no entities found in question; not answerable by retrieval")
        return symmetrize(QueryDecomposition(entities, triples))

    def _embed_terms(self, terms: list[str]) -> dict[str, np.ndarray]:
        unique = list(dict.fromkeys(t for t in terms if t))
        if not unique:
            return {}
        vectors = self.gateway.embed(unique)
        return dict(zip(unique, vectors))

    def match_entities(self, decomposition: QueryDecomposition,
                       trace: RetrievalTrace | None = None) -> set[SectionId]:
        """Set A: sections of the top-k stored entities per query entity."""
        trace = trace if trace is not None else RetrievalTrace()
        table = self.bundle.entity_vectors
        lemmas = {}
        for entity in decomposition.entities:
            lemma = lemmatize(entity, self.config.proper_nouns)
            if lemma:
                lemmas[entity] = lemma
            else:
                logger.warning("query entity %r lemmatizes to nothing", entity)
        vectors = self._embed_terms(list(lemmas.values()))
        candidates: set[SectionId] = set()
        for entity, lemma in lemmas.items():
            if len(table) == 0:
                trace.entity_hits[entity] = []
                continue
            result = top_k(table, vectors[lemma], self.config.k,
                           self.config.min_sim)
            trace.entity_hits[entity] = result.hits
            for row_id, _sim in result.hits:
                candidates |= table.payload(row_id)
        trace.entity_candidates = set(candidates)
        return candidates

    def match_triples(self, decomposition: QueryDecomposition,
                      trace: RetrievalTrace | None = None) -> set[SectionId]:
        """Set B: sections of the top-k stored triples per query triple
        (symmetrized forms included)."""
        trace = trace if trace is not None else RetrievalTrace()
        table = self.bundle.triple_vectors
        parts: list[str] = []
        prepared: list[tuple[str, str, str, str]] = []
        for head, relation, tail in decomposition.triples:
            head_lemma = lemmatize(head, self.config.proper_nouns)
            tail_lemma = lemmatize(tail, self.config.proper_nouns)
            relation_norm = normalize_relation(relation)
            if not head_lemma or not tail_lemma:
                logger.warning("skipping query triple with empty lemma: %s",
                               (head, relation, tail))
                continue
            prepared.append((f"{head}|{relation}|{tail}", head_lemma,
                             relation_norm, tail_lemma))
            parts.extend((head_lemma, relation_norm, tail_lemma))
        vectors = self._embed_terms(parts)
        candidates: set[SectionId] = set()
        for key, head_lemma, relation_norm, tail_lemma in prepared:
            if len(table) == 0:
                trace.triple_hits[key] = []
                continue
            query = np.concatenate([
                vectors[head_lemma], vectors[relation_norm], vectors[tail_lemma]])
            result = top_k(table, query, self.config.k, self.config.min_sim)
            trace.triple_hits[key] = result.hits
            for row_id, _sim in result.hits:
                candidates |= table.payload(row_id)
        trace.triple_candidates = set(candidates)
        return candidates

    def select_seeds(self, entity_candidates: set[SectionId],
                     triple_candidates: set[SectionId]) -> tuple[set[SectionId], bool]:
        """Intersection of the candidate sets; union fallback when empty."""
        intersection = entity_candidates & triple_candidates
        if intersection:
            return intersection, False
        if not self.config.fallback_to_union:
            return set(), False
        union = entity_candidates | triple_candidates
        return union, bool(union)

    def expand(self, seeds: set[SectionId]) -> set[SectionId]:
        """Structural expansion over the navigator graph.

        Outgoing refers_to edges are followed transitively from every
        pool member; each member reached via seeds or refers_to also
        contributes one level of has-children, which are themselves
        examined for refers_to (but not for further children). Unknown
        seed ids are dropped with a warning.
        """
        graph = self.bundle.graph
        known = [s for s in sorted(seeds, key=sort_key) if s in graph]
        for missing in sorted(seeds - set(known), key=sort_key):
            logger.warning("seed %s is not in the navigator graph", missing)
        status: dict[SectionId, str] = {}
        queue: deque[tuple[SectionId, str]] = deque()
        for seed in known:
            status[seed] = "full"
            queue.append((seed, "full"))
        while queue:
            current, mode = queue.popleft()
            if status.get(current) != mode:
                continue  # superseded by a leaf-to-full upgrade
            targets = list(graph.neighbors(current, REFERS_TO, "out"))
            if self.config.follow_incoming:
                targets += graph.neighbors(current, REFERS_TO, "in")
            for target in targets:
                if status.get(target) != "full":
                    status[target] = "full"
                    queue.append((target, "full"))
            if mode != "full":
                continue
            extra: list[SectionId] = []
            if self.config.include_children:
                extra += graph.neighbors(current, HAS, "out")
            if self.config.include_parents:
                parent = parent_of(current)
                if parent is not None and parent in graph:
                    extra.append(parent)
            for neighbor in extra:
                if neighbor not in status:
                    status[neighbor] = "leaf"
                    queue.append((neighbor, "leaf"))
        return set(status)

    def _budget_sections(self, question: str, sections: list[SectionNode],
                         trace: RetrievalTrace,
                         best_sim: dict[SectionId, float]) -> list[SectionNode]:
        """Trim to the context budget, dropping lowest-similarity non-seed
        sections first; seeds go only as a last resort."""
        def priority(node: SectionNode):
            is_seed = node.id in trace.seeds
            return (not is_seed, -best_sim.get(node.id, 0.0), sort_key(node.id))

        budget = self.config.max_context_tokens - estimate_tokens(question)
        kept: list[SectionNode] = []
        used = 0
        for node in sorted(sections, key=priority):
            cost = estimate_tokens(node.text)
            if kept and used + cost > budget:
                trace.dropped_for_budget.append(node.id.canonical_text)
                continue
            kept.append(node)
            used += cost
        if trace.dropped_for_budget:
            logger.warning("context budget dropped %d sections: %s",
                           len(trace.dropped_for_budget),
                           trace.dropped_for_budget)
        return sorted(kept, key=lambda n: sort_key(n.id))

    def synthesize(self, question: str, sections: list[SectionNode],
                   trace: RetrievalTrace | None = None,
                   best_sim: dict[SectionId, float] | None = None) -> Answer:
        """Filter irrelevant provisions, then compose a cited summary."""
        trace = trace if trace is not None else RetrievalTrace()
        if not sections:
            raise NoCandidates("no provisions to synthesize from")
        kept_nodes = self._budget_sections(question, sections, trace,
                                           best_sim or {})
        payload = sentences_slot(
            [{"id": n.id.canonical_text, "text": n.text} for n in kept_nodes])
        result = self.gateway.chat("answer_synthesize", {
            "question": question,
            "sections": payload,
        })
        by_id = {n.id.canonical_text: n for n in kept_nodes}
        references = []
        for section_text in dict.fromkeys(result["kept_section_ids"]):
            node = by_id.get(section_text)
            if node is None:
                logger.warning("synthesizer cited %r outside the candidate set; "
                               "dropping", section_text)
                continue
            references.append(AnswerReference(node.id, node.text, node.source_url))
        references.sort(key=lambda ref: sort_key(ref.section_id))
        return Answer(result["summary"], references, trace)

    # --- composition ---

    def _no_provisions(self, trace: RetrievalTrace, reason: str) -> Answer:
        trace.reason = reason
        return Answer(NO_PROVISIONS_SUMMARY, [], trace)

    def answer_question(self, question: str) -> Answer:
        """decompose -> match -> select seeds -> expand -> synthesize."""
        trace = RetrievalTrace()
        try:
            decomposition = self.decompose_query(question)
        except EmptyDecomposition:
            return self._no_provisions(trace, "empty_decomposition")
        except Exception as exc:
            raise RetrievalStageError("decompose", exc) from exc
        trace.entities = list(decomposition.entities)
        trace.triples = list(decomposition.triples)

        try:
            entity_candidates = self.match_entities(decomposition, trace)
            triple_candidates = self.match_triples(decomposition, trace)
        except Exception as exc:
            raise RetrievalStageError("match", exc) from exc
        trace.intersection = entity_candidates & triple_candidates
        seeds, fallback_used = self.select_seeds(entity_candidates,
                                                 triple_candidates)
        trace.seeds = set(seeds)
        trace.fallback_used = fallback_used
        if not seeds:
            return self._no_provisions(trace, "no_candidates")

        try:
            expanded = self.expand(seeds)
        except Exception as exc:
            raise RetrievalStageError("expand", exc) from exc
        trace.expanded = set(expanded)

        best_sim: dict[SectionId, float] = {}
        for hits in trace.entity_hits.values():
            for row_id, sim in hits:
                for section_id in self.bundle.entity_vectors.payload(row_id):
                    best_sim[section_id] = max(best_sim.get(section_id, 0.0), sim)
        for hits in trace.triple_hits.values():
            for row_id, sim in hits:
                for section_id in self.bundle.triple_vectors.payload(row_id):
                    best_sim[section_id] = max(best_sim.get(section_id, 0.0), sim)

        sections = [self._corpus_by_id[s]
                    for s in sorted(expanded, key=sort_key)
                    if s in self._corpus_by_id and self._corpus_by_id[s].text]
        if not sections:
            return self._no_provisions(trace, "no_candidates")
        try:
            return self.synthesize(question, sections, trace, best_sim)
        except NoCandidates:
            return self._no_provisions(trace, "no_candidates")
        except Exception as exc:
            raise RetrievalStageError("synthesize", exc) from exc
