"""End-to-end corpus build: extraction, entity refinement, navigator
graph assembly, vector export."""
from __future__ import annotations

import logging

from .bundle import Bundle
from .extraction import ExtractionPipeline, RunReport
from .ingest import SectionNode
from .llm.gateway import LlmGateway
from .navgraph import build_hierarchy
from .refiner import LocalSchema, export_embeddings
from .sections import detect_cross_references

logger = logging.getLogger(__name__)


def build_bundle(nodes: list[SectionNode], gateway: LlmGateway, *,
                 tau: float = 1.0, validation_passes: int = 1,
                 workers: int = 1,
                 proper_nouns: frozenset[str] = frozenset()) -> tuple[Bundle, RunReport]:
    """Run the whole pipeline over a corpus and assemble a Bundle.

    Processing order is fixed by order_index, so element ids, triple ids,
    and every serialized artifact are deterministic for a given corpus,
    prompt set, and provider.
    """
    ordered = sorted(nodes, key=lambda n: n.order_index)
    pipeline = ExtractionPipeline(gateway, validation_passes=validation_passes)
    extractions, report = pipeline.run_corpus(ordered, workers=workers)

    schema = LocalSchema(lambda text: gateway.embed([text])[0], gateway.dim)
    for extraction in extractions:
        by_name = {}
        for draft in extraction.entities:
            entity, decision = schema.refine(
                draft.name, draft.label, draft.section_id, tau,
                proper_nouns=proper_nouns)
            by_name[draft.name] = entity
            logger.debug("%s: %s -> %s (%s)", extraction.section_id,
                         draft.name, entity.lemma, decision.kind)
        for triple in extraction.triples:
            head = by_name.get(triple.head)
            tail = by_name.get(triple.tail)
            if head is None or tail is None:
                # referential closure is enforced upstream; belt and braces
                logger.warning("%s: skipping triple with unrefined endpoint %s",
                               extraction.section_id, triple)
                continue
            schema.add_triple(head, triple.relation, tail, triple.section_id)

    graph = build_hierarchy(ordered)
    edges = []
    for extraction in extractions:
        for ref in extraction.referenced_sections:
            edges.append((extraction.section_id, ref, "llm"))
    for node in ordered:
        for ref in detect_cross_references(node.text, host=node.id):
            if ref != node.id:
                edges.append((node.id, ref, "pattern"))
    graph.add_cross_references(edges)

    entity_vectors, triple_vectors = export_embeddings(schema)
    meta = {
        "provider_kind": gateway.config.provider_kind,
        "model_name": gateway.config.model_name,
        "embedding_model": gateway.config.embedding_model,
        "tau": tau,
        "validation_passes": validation_passes,
        "prompt_checksums": gateway.prompt_checksums(),
    }
    bundle = Bundle(ordered, graph, schema, entity_vectors, triple_vectors, meta)
    return bundle, report
