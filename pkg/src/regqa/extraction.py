"""Per-section extraction pipeline: prune, extract entities, validate,
extract relationships, validate, assemble.

Every stage round-trips through the gateway's structured-output checks;
constraint enforcement (entities must occur in the text, triple endpoints
must name known entities) happens here in code, never by asking the
model to repair its own output with invented content. A failing section
is reported and skipped; it never aborts a corpus run.
"""
from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .errors import MalformedId, SectionExtractionFailed
from .ingest import SectionNode
from .llm.gateway import LlmGateway
from .llm.mock import split_sentences
from .sections import SectionId, detect_cross_references, parse_section_id, sort_key

logger = logging.getLogger(__name__)

DEFAULT_LABEL = "concept"


@dataclass
class PrunedSection:
    section_id: SectionId
    sentences: list[str]
    retained_refs: list[SectionId]
    reference_loss: bool = False

    @property
    def text(self) -> str:
        return " ".join(self.sentences)


@dataclass
class EntityDraft:
    name: str
    label: str
    section_id: SectionId


@dataclass
class TripleDraft:
    head: str
    relation: str
    tail: str
    section_id: SectionId


@dataclass
class SectionExtraction:
    section_id: SectionId
    entities: list[EntityDraft]
    triples: list[TripleDraft]
    referenced_sections: list[SectionId]


@dataclass
class SectionReport:
    section_id: str
    status: str  # ok | failed
    stage_seconds: dict[str, float] = field(default_factory=dict)
    discarded_triples: list[dict] = field(default_factory=list)
    reference_loss: bool = False
    error: str | None = None


@dataclass
class RunReport:
    sections: list[SectionReport]
    prompt_checksums: dict[str, str]

    def to_dict(self) -> dict:
        return {
            "sections": [
                {
                    "section_id": s.section_id,
                    "status": s.status,
                    "stage_seconds": s.stage_seconds,
                    "discarded_triples": s.discarded_triples,
                    "reference_loss": s.reference_loss,
                    "error": s.error,
                }
                for s in self.sections
            ],
            "prompt_checksums": self.prompt_checksums,
            "failed": sorted(
                s.section_id for s in self.sections if s.status != "ok"),
        }


def estimate_tokens(text: str) -> int:
    return max(1, math.ceil(len(text) / 4))


def chunk_text(text: str, max_tokens: int) -> list[str]:
    """Split at sentence boundaries so each chunk stays under the budget."""
    if estimate_tokens(text) <= max_tokens:
        return [text]
    chunks: list[str] = []
    current: list[str] = []
    used = 0
    for sentence in split_sentences(text):
        cost = estimate_tokens(sentence)
        if current and used + cost > max_tokens:
            chunks.append(" ".join(current))
            current, used = [], 0
        current.append(sentence)
        used += cost
    if current:
        chunks.append(" ".join(current))
    return chunks


def normalize_relation(relation: str) -> str:
    """Lowercase snake_case; empty results collapse to 'related_to'."""
    cleaned = "".join(
        ch if ch.isalnum() else "_" for ch in relation.strip().lower())
    while "__" in cleaned:
        cleaned = cleaned.replace("__", "_")
    cleaned = cleaned.strip("_")
    return cleaned or "related_to"


# --- slot payload builders (also used by fixture writers) -----------------

def sentences_slot(sentences: list[str]) -> str:
    return json.dumps(sentences, ensure_ascii=False)


def entities_slot(drafts: list[EntityDraft]) -> str:
    return json.dumps(
        [{"name": d.name, "label": d.label} for d in drafts],
        ensure_ascii=False)


def triples_slot(triples: list[TripleDraft]) -> str:
    return json.dumps(
        [{"head": t.head, "relation": t.relation, "tail": t.tail} for t in triples],
        ensure_ascii=False)


def _parse_ref_strings(values: list[str], host: SectionId) -> list[SectionId]:
    refs: dict[SectionId, None] = {}
    for value in values:
        try:
            refs.setdefault(parse_section_id(value), None)
            continue
        except MalformedId:
            pass
        detected = detect_cross_references(value, host=host)
        if detected:
            for ref in detected:
                refs.setdefault(ref, None)
        else:
            logger.warning("%s: dropping unparseable reference %r", host, value)
    return list(refs)


class ExtractionPipeline:
    """Drives the staged extraction for single sections and whole corpora."""

    def __init__(self, gateway: LlmGateway, validation_passes: int = 1):
        if not 0 <= validation_passes <= 3:
            raise ValueError("validation_passes must be between 0 and 3")
        self.gateway = gateway
        self.validation_passes = validation_passes

    # --- stages ---

    def prune_content(self, node: SectionNode) -> PrunedSection:
        if not node.body:
            title = node.title or ""
            return PrunedSection(node.id, [title],
                                 detect_cross_references(title, host=node.id))
        sentences: list[str] = []
        for chunk in chunk_text(node.body, self.gateway.config.max_tokens):
            result = self.gateway.chat("content_prune", {
                "section_id": node.id.canonical_text,
                "text": chunk,
            })
            sentences.extend(s for s in result["sentences"] if s.strip())
        source_refs = set(detect_cross_references(node.body, host=node.id))
        pruned_refs = set(detect_cross_references(" ".join(sentences), host=node.id))
        reference_loss = bool(source_refs - pruned_refs)
        if reference_loss:
            logger.warning(
                "%s: pruning lost references %s; passing original body through",
                node.id, sorted(r.canonical_text for r in source_refs - pruned_refs))
            sentences = [node.body]
            pruned_refs = source_refs
        return PrunedSection(node.id, sentences,
                             sorted(pruned_refs, key=sort_key), reference_loss)

    def _clean_drafts(self, raw_entities: list[dict], section_id: SectionId,
                      occurrence_text: str) -> list[EntityDraft]:
        drafts: list[EntityDraft] = []
        seen: set[str] = set()
        haystack = occurrence_text.casefold()
        for entry in raw_entities:
            name = entry.get("name", "").strip()
            label = entry.get("label", "").strip() or DEFAULT_LABEL
            if not name:
                continue
            if name.casefold() not in haystack:
                logger.warning("%s: dropping entity %r not present in text",
                               section_id, name)
                continue
            key = name.casefold()
            if key in seen:
                continue
            seen.add(key)
            drafts.append(EntityDraft(name, label, section_id))
        return drafts

    def extract_entities(
            self, pruned: PrunedSection) -> tuple[list[EntityDraft], list[SectionId]]:
        if not pruned.sentences or not any(s.strip() for s in pruned.sentences):
            return [], []
        result = self.gateway.chat("entity_extract", {
            "section_id": pruned.section_id.canonical_text,
            "sentences": sentences_slot(pruned.sentences),
        })
        drafts = self._clean_drafts(result["entities"], pruned.section_id,
                                    pruned.text)
        refs = _parse_ref_strings(result["referenced_sections"], pruned.section_id)
        return drafts, refs

    def validate_entities(self, original: SectionNode,
                          drafts: list[EntityDraft]) -> list[EntityDraft]:
        original_text = " ".join(t for t in (original.title, original.body) if t)
        current = drafts
        for _ in range(self.validation_passes):
            result = self.gateway.chat("entity_validate", {
                "section_id": original.id.canonical_text,
                "text": original_text,
                "entities": entities_slot(current),
            })
            current = self._clean_drafts(result["entities"], original.id,
                                         original_text)
        return current

    def _clean_triples(self, raw_triples: list[dict], section_id: SectionId,
                       entity_names: set[str], discarded: list[dict],
                       *, drop_self_loops: bool) -> list[TripleDraft]:
        triples: list[TripleDraft] = []
        seen: set[tuple[str, str, str]] = set()
        for entry in raw_triples:
            head = entry.get("head", "").strip()
            tail = entry.get("tail", "").strip()
            relation = normalize_relation(entry.get("relation", ""))
            reason = None
            if head not in entity_names:
                reason = f"unknown head {head!r}"
            elif tail not in entity_names:
                reason = f"unknown tail {tail!r}"
            elif drop_self_loops and head == tail:
                reason = "self-loop"
            if reason:
                logger.warning("%s: discarding triple %s: %s",
                               section_id, entry, reason)
                discarded.append({"triple": entry, "reason": reason})
                continue
            key = (head, relation, tail)
            if key in seen:
                continue
            seen.add(key)
            triples.append(TripleDraft(head, relation, tail, section_id))
        return triples

    def extract_relationships(self, entities: list[EntityDraft],
                              pruned: PrunedSection,
                              discarded: list[dict] | None = None) -> list[TripleDraft]:
        if not entities:
            return []
        result = self.gateway.chat("relation_extract", {
            "section_id": pruned.section_id.canonical_text,
            "entities": entities_slot(entities),
            "sentences": sentences_slot(pruned.sentences),
        })
        names = {d.name for d in entities}
        return self._clean_triples(
            result["triples"], pruned.section_id, names,
            discarded if discarded is not None else [],
            drop_self_loops=False)

    def validate_relationships(self, triples: list[TripleDraft],
                               pruned: PrunedSection,
                               entities: list[EntityDraft],
                               discarded: list[dict] | None = None) -> list[TripleDraft]:
        sink = discarded if discarded is not None else []
        names = {d.name for d in entities}
        current = self._clean_triples(
            [{"head": t.head, "relation": t.relation, "tail": t.tail}
             for t in triples],
            pruned.section_id, names, sink, drop_self_loops=True)
        for _ in range(self.validation_passes):
            if not current:
                break
            result = self.gateway.chat("relation_validate", {
                "section_id": pruned.section_id.canonical_text,
                "text": pruned.text,
                "entities": entities_slot(entities),
                "triples": triples_slot(current),
            })
            current = self._clean_triples(
                result["triples"], pruned.section_id, names, sink,
                drop_self_loops=True)
        return current

    # --- section and corpus drivers ---

    def build_section(
            self, node: SectionNode,
            report: SectionReport | None = None) -> SectionExtraction:
        report = report if report is not None else SectionReport(
            node.id.canonical_text, "ok")
        stage = "prune"
        try:
            started = time.perf_counter()
            pruned = self.prune_content(node)
            report.stage_seconds["prune"] = time.perf_counter() - started
            report.reference_loss = pruned.reference_loss

            stage = "extract_entities"
            started = time.perf_counter()
            drafts, refs = self.extract_entities(pruned)
            report.stage_seconds["extract_entities"] = time.perf_counter() - started

            stage = "validate_entities"
            started = time.perf_counter()
            entities = self.validate_entities(node, drafts)
            report.stage_seconds["validate_entities"] = time.perf_counter() - started

            stage = "extract_relationships"
            started = time.perf_counter()
            triples = self.extract_relationships(
                entities, pruned, report.discarded_triples)
            report.stage_seconds["extract_relationships"] = (
                time.perf_counter() - started)

            stage = "validate_relationships"
            started = time.perf_counter()
            triples = self.validate_relationships(
                triples, pruned, entities, report.discarded_triples)
            report.stage_seconds["validate_relationships"] = (
                time.perf_counter() - started)
        except Exception as exc:
            raise SectionExtractionFailed(node.id, stage, exc) from exc

        referenced = dict.fromkeys(refs)
        for ref in pruned.retained_refs:
            referenced.setdefault(ref, None)
        referenced.pop(node.id, None)  # self-references are not cross-references
        return SectionExtraction(node.id, entities, triples, list(referenced))

    def run_corpus(self, nodes: list[SectionNode],
                   workers: int = 1) -> tuple[list[SectionExtraction], RunReport]:
        """Extract every section; failures are reported, never fatal.

        Results are merged in order_index order regardless of worker
        scheduling, so concurrent runs stay deterministic.
        """
        ordered = sorted(nodes, key=lambda n: n.order_index)
        reports = {n.order_index: SectionReport(n.id.canonical_text, "ok")
                   for n in ordered}
        extractions: dict[int, SectionExtraction] = {}

        def process(node: SectionNode) -> None:
            report = reports[node.order_index]
            try:
                extractions[node.order_index] = self.build_section(node, report)
            except SectionExtractionFailed as exc:
                report.status = "failed"
                report.error = f"{exc.stage}: {exc.cause}"
                logger.error("section %s failed, continuing: %s", node.id, exc)

        if workers <= 1:
            for node in ordered:
                process(node)
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                list(pool.map(process, ordered))

        merged = [extractions[n.order_index] for n in ordered
                  if n.order_index in extractions]
        run_report = RunReport([reports[n.order_index] for n in ordered],
                               self.gateway.prompt_checksums())
        return merged, run_report
