"""Bundle persistence: one directory holding the corpus, both graphs'
backing data, the vector tables, and a checksummed manifest.

Serialization is canonical (sorted keys, fixed separators, repr-exact
floats), so identical bundles produce byte-identical files and two runs
of a deterministic build yield identical checksums.
"""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CorruptBundle, StorageError
from .ingest import SectionNode, corpus_from_dicts, corpus_to_dicts
from .navgraph import NavGraph
from .refiner import Entity, LocalSchema, StoredTriple
from .sections import parse_section_id, sort_key
from .store import VectorTable

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.json"
BUNDLE_FILES = (
    "corpus.json",
    "dng.jsonl",
    "schema.json",
    "entity_vectors.jsonl",
    "triple_vectors.jsonl",
)


@dataclass
class Bundle:
    corpus: list[SectionNode]
    graph: NavGraph
    schema: LocalSchema
    entity_vectors: VectorTable
    triple_vectors: VectorTable
    meta: dict = field(default_factory=dict)

    def corpus_by_id(self) -> dict:
        return {node.id: node for node in self.corpus}

    def counts(self) -> dict:
        return {
            "sections": len(self.corpus),
            "graph_nodes": len(self.graph.has_text),
            "entities": len(self.entity_vectors),
            "triples": len(self.triple_vectors),
        }


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _vector_table_to_jsonl(table: VectorTable) -> str:
    lines = []
    for row_id, vector, payload in sorted(table.rows(), key=lambda r: r[0]):
        lines.append(_dump({
            "row_id": row_id,
            "vector": [float(x) for x in vector],
            "payload": sorted((s.canonical_text for s in payload)),
        }))
    return "\n".join(lines) + ("\n" if lines else "")


def _vector_table_from_jsonl(text: str, dim: int) -> VectorTable:
    table = VectorTable(dim)
    for line in text.splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        table.add_row(
            int(record["row_id"]),
            np.asarray(record["vector"], dtype=np.float64),
            {parse_section_id(s) for s in record["payload"]},
        )
    return table


def schema_to_dict(schema: LocalSchema) -> dict:
    """Everything but the entity/triple vectors, which live in the tables."""
    return {
        "dim": schema.dim,
        "entities": [
            {
                "element_id": e.element_id,
                "name": e.name,
                "label": e.label,
                "lemma": e.lemma,
                "section_ids": sorted(s.canonical_text for s in e.section_ids),
                "head_count": e.head_count,
                "tail_count": e.tail_count,
            }
            for e in sorted(schema._by_id, key=lambda e: e.element_id)
        ],
        "relations": {
            relation: [float(x) for x in vector]
            for relation, vector in schema.relations.items()
        },
        "triples": [
            {
                "triple_id": t.triple_id,
                "head_id": t.head_id,
                "tail_id": t.tail_id,
                "relation": t.relation,
                "section_ids": sorted(s.canonical_text for s in t.section_ids),
            }
            for t in schema.triples
        ],
    }


def schema_from_parts(data: dict, entity_table: VectorTable,
                      triple_table: VectorTable) -> LocalSchema:
    """Rebuild a schema from its snapshot plus the vector tables.

    The loaded schema has no embedder; it serves retrieval and diffing,
    not further refinement.
    """
    def _no_embedder(_text: str):
        raise StorageError("loaded schema has no embedding provider attached")

    schema = LocalSchema(_no_embedder, int(data["dim"]))
    for record in sorted(data["entities"], key=lambda r: r["element_id"]):
        entity = Entity(
            element_id=int(record["element_id"]),
            name=record["name"],
            label=record["label"],
            lemma=record["lemma"],
            embedding=entity_table.vector(int(record["element_id"])),
            section_ids={parse_section_id(s) for s in record["section_ids"]},
            head_count=int(record["head_count"]),
            tail_count=int(record["tail_count"]),
        )
        if entity.element_id != len(schema._by_id) + 1:
            raise CorruptBundle(
                f"non-contiguous element_id {entity.element_id} in schema")
        schema.entities[entity.lemma] = entity
        schema._by_id.append(entity)
    for relation, vector in data["relations"].items():
        schema.relations[relation] = np.asarray(vector, dtype=np.float64)
    for record in data["triples"]:
        triple = StoredTriple(
            triple_id=int(record["triple_id"]),
            head_id=int(record["head_id"]),
            tail_id=int(record["tail_id"]),
            relation=record["relation"],
            triple_embedding=triple_table.vector(int(record["triple_id"])),
            section_ids={parse_section_id(s) for s in record["section_ids"]},
        )
        schema.triples.append(triple)
        schema._triple_index[(triple.head_id, triple.relation, triple.tail_id)] = triple
    return schema


def schemas_equal(a: LocalSchema, b: LocalSchema) -> bool:
    if schema_to_dict(a) != schema_to_dict(b):
        return False
    for ea, eb in zip(a._by_id, b._by_id):
        if not np.array_equal(ea.embedding, eb.embedding):
            return False
    for ta, tb in zip(a.triples, b.triples):
        if not np.array_equal(ta.triple_embedding, tb.triple_embedding):
            return False
    return True


def save_bundle(bundle: Bundle, directory: str | Path) -> dict:
    """Write all bundle files plus the manifest; returns the manifest."""
    path = Path(directory)
    try:
        path.mkdir(parents=True, exist_ok=True)
        contents = {
            "corpus.json": _dump(corpus_to_dicts(bundle.corpus)) + "\n",
            "dng.jsonl": bundle.graph.to_jsonl(),
            "schema.json": _dump(schema_to_dict(bundle.schema)) + "\n",
            "entity_vectors.jsonl": _vector_table_to_jsonl(bundle.entity_vectors),
            "triple_vectors.jsonl": _vector_table_to_jsonl(bundle.triple_vectors),
        }
        manifest = {
            "format_version": FORMAT_VERSION,
            "dim": bundle.schema.dim,
            "counts": bundle.counts(),
            "checksums": {name: _sha256(text) for name, text in
                          sorted(contents.items())},
            "meta": bundle.meta,
        }
        for name, text in contents.items():
            (path / name).write_text(text, encoding="utf-8")
        (path / MANIFEST_NAME).write_text(_dump(manifest) + "\n", encoding="utf-8")
    except OSError as exc:
        raise StorageError(f"cannot write bundle to {path}: {exc}") from exc
    return manifest


def load_manifest(directory: str | Path) -> dict:
    path = Path(directory) / MANIFEST_NAME
    try:
        raw = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise StorageError(f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(raw)
    except json.JSONDecodeError as exc:
        raise CorruptBundle(f"manifest is not valid JSON: {exc}") from exc


def load_bundle(directory: str | Path, *, max_levels: int = 3) -> Bundle:
    """Read and verify a bundle; checksum mismatches raise CorruptBundle."""
    path = Path(directory)
    manifest = load_manifest(path)
    if manifest.get("format_version") != FORMAT_VERSION:
        raise CorruptBundle(
            f"unsupported bundle format {manifest.get('format_version')!r}")
    contents: dict[str, str] = {}
    for name in BUNDLE_FILES:
        try:
            contents[name] = (path / name).read_text(encoding="utf-8")
        except OSError as exc:
            raise StorageError(f"cannot read bundle file {name}: {exc}") from exc
        expected = manifest["checksums"].get(name)
        actual = _sha256(contents[name])
        if actual != expected:
            raise CorruptBundle(
                f"checksum mismatch for {name}: expected {expected}, got {actual}")
    dim = int(manifest["dim"])
    try:
        corpus = corpus_from_dicts(json.loads(contents["corpus.json"]),
                                   max_levels=max_levels)
        graph = NavGraph.from_jsonl(contents["dng.jsonl"], max_levels=max_levels)
        entity_vectors = _vector_table_from_jsonl(
            contents["entity_vectors.jsonl"], dim)
        triple_vectors = _vector_table_from_jsonl(
            contents["triple_vectors.jsonl"], 3 * dim)
        schema = schema_from_parts(json.loads(contents["schema.json"]),
                                   entity_vectors, triple_vectors)
    except CorruptBundle:
        raise
    except Exception as exc:
        raise CorruptBundle(f"bundle contents do not parse: {exc}") from exc
    return Bundle(corpus, graph, schema, entity_vectors, triple_vectors,
                  manifest.get("meta", {}))
