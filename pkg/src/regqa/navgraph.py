"""Section-id navigator graph: `has` hierarchy edges derived from the
numbering grammar plus `refers_to` cross-reference edges merged from LLM
and pattern provenances.

The graph is built once (single writer) and treated as immutable for
concurrent reads afterwards.
"""
from __future__ import annotations

import json
import logging
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DuplicateSection, UnknownSection
from .ingest import SectionNode
from .sections import SectionId, parent_of, parse_section_id, sort_key

logger = logging.getLogger(__name__)

HAS = "has"
REFERS_TO = "refers_to"
LABELS = (HAS, REFERS_TO)


@dataclass
class GraphDelta:
    """What add_cross_references changed."""

    added_edges: list[tuple[SectionId, SectionId]] = field(default_factory=list)
    merged_provenance: list[tuple[SectionId, SectionId]] = field(default_factory=list)
    materialized: list[SectionId] = field(default_factory=list)
    skipped_self_loops: list[SectionId] = field(default_factory=list)


class NavGraph:
    def __init__(self):
        self.has_text: dict[SectionId, bool] = {}
        self.flagged: set[SectionId] = set()  # materialized dangling targets
        self._out: dict[str, dict[SectionId, set[SectionId]]] = {
            HAS: {}, REFERS_TO: {}}
        self._in: dict[str, dict[SectionId, set[SectionId]]] = {
            HAS: {}, REFERS_TO: {}}
        self.provenance: dict[tuple[str, SectionId, SectionId], set[str]] = {}

    # --- construction ---

    def __contains__(self, section_id: SectionId) -> bool:
        return section_id in self.has_text

    def ensure_node(self, section_id: SectionId, has_text: bool = False) -> None:
        if section_id not in self.has_text:
            self.has_text[section_id] = has_text
        elif has_text:
            self.has_text[section_id] = True

    def _add_edge(self, label: str, source: SectionId, target: SectionId,
                  provenance: str) -> bool:
        """Returns True if the edge is new, False if only provenance merged."""
        self.ensure_node(source)
        self.ensure_node(target)
        key = (label, source, target)
        new = key not in self.provenance
        self._out[label].setdefault(source, set()).add(target)
        self._in[label].setdefault(target, set()).add(source)
        self.provenance.setdefault(key, set()).add(provenance)
        return new

    def add_section(self, node: SectionNode) -> None:
        """Add one corpus section plus its grammar-implied ancestry."""
        if self.has_text.get(node.id):
            raise DuplicateSection(f"section {node.id} already in graph")
        self.ensure_node(node.id, has_text=bool(node.body or node.title))
        child = node.id
        parent = parent_of(child)
        while parent is not None:
            self.ensure_node(parent)
            self._add_edge(HAS, parent, child, "grammar")
            child, parent = parent, parent_of(parent)

    def add_cross_references(
            self, edges: list[tuple[SectionId, SectionId, str]]) -> GraphDelta:
        """Record refers_to edges, deduplicated across provenances.

        Self-loops are dropped; dangling targets are materialized as
        text-less nodes and flagged.
        """
        delta = GraphDelta()
        for source, target, provenance in edges:
            if source == target:
                logger.warning("dropping refers_to self-loop at %s", source)
                delta.skipped_self_loops.append(source)
                continue
            for endpoint in (source, target):
                if endpoint not in self.has_text:
                    self.flagged.add(endpoint)
                    delta.materialized.append(endpoint)
                    logger.info("materialized dangling reference target %s",
                                endpoint)
            if self._add_edge(REFERS_TO, source, target, provenance):
                delta.added_edges.append((source, target))
            else:
                delta.merged_provenance.append((source, target))
        return delta

    # --- queries ---

    def _require(self, section_id: SectionId) -> None:
        if section_id not in self.has_text:
            raise UnknownSection(f"unknown section {section_id}")

    def neighbors(self, section_id: SectionId, label: str,
                  direction: str = "out") -> list[SectionId]:
        """Adjacent ids under (label, direction), sorted by canonical text."""
        self._require(section_id)
        if label not in LABELS:
            raise ValueError(f"unknown edge label {label!r}")
        if direction not in ("out", "in"):
            raise ValueError(f"direction must be 'out' or 'in', got {direction!r}")
        index = self._out if direction == "out" else self._in
        return sorted(index[label].get(section_id, ()), key=sort_key)

    def children(self, section_id: SectionId) -> list[SectionId]:
        return self.neighbors(section_id, HAS, "out")

    def closure(self, seeds, labels=(REFERS_TO,), direction: str = "out") -> set[SectionId]:
        """Transitive closure over the selected labels, including seeds.

        Cycles terminate via the visited set.
        """
        seed_list = sorted(set(seeds), key=sort_key)
        for seed in seed_list:
            self._require(seed)
        visited: set[SectionId] = set(seed_list)
        queue = deque(seed_list)
        while queue:
            current = queue.popleft()
            for label in labels:
                for neighbor in self.neighbors(current, label, direction):
                    if neighbor not in visited:
                        visited.add(neighbor)
                        queue.append(neighbor)
        return visited

    def edge_provenance(self, source: SectionId, target: SectionId,
                        label: str = REFERS_TO) -> set[str]:
        return set(self.provenance.get((label, source, target), set()))

    def stats(self) -> dict:
        by_label = {label: 0 for label in LABELS}
        by_provenance: dict[str, int] = {}
        for (label, _, _), provs in self.provenance.items():
            by_label[label] += 1
            for prov in provs:
                by_provenance[prov] = by_provenance.get(prov, 0) + 1
        return {
            "nodes": len(self.has_text),
            "nodes_with_text": sum(1 for v in self.has_text.values() if v),
            "flagged_nodes": len(self.flagged),
            "edges": dict(sorted(by_label.items())),
            "edge_provenance": dict(sorted(by_provenance.items())),
        }

    # --- serialization ---

    def edge_records(self) -> list[dict]:
        records = []
        for (label, source, target) in sorted(
                self.provenance, key=lambda k: (k[0], sort_key(k[1]), sort_key(k[2]))):
            records.append({
                "from": source.canonical_text,
                "to": target.canonical_text,
                "label": label,
                "provenance": sorted(self.provenance[(label, source, target)]),
            })
        return records

    def to_jsonl(self) -> str:
        lines = []
        for section_id in sorted(self.has_text, key=sort_key):
            lines.append(json.dumps({
                "node": section_id.canonical_text,
                "has_text": self.has_text[section_id],
                "flagged": section_id in self.flagged,
            }, sort_keys=True))
        for record in self.edge_records():
            lines.append(json.dumps(record, sort_keys=True))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str, *, max_levels: int = 3) -> "NavGraph":
        graph = cls()
        for line in text.splitlines():
            if not line.strip():
                continue
            record = json.loads(line)
            if "node" in record:
                section_id = parse_section_id(record["node"], max_levels=max_levels)
                graph.ensure_node(section_id, has_text=record["has_text"])
                if record.get("flagged"):
                    graph.flagged.add(section_id)
            else:
                source = parse_section_id(record["from"], max_levels=max_levels)
                target = parse_section_id(record["to"], max_levels=max_levels)
                for provenance in record["provenance"]:
                    graph._add_edge(record["label"], source, target, provenance)
        return graph

    def export_edge_list(self, path: str | Path) -> None:
        """Plain edge-list JSONL (no node records), the exchange format."""
        lines = [json.dumps(r, sort_keys=True) for r in self.edge_records()]
        Path(path).write_text("\n".join(lines) + ("\n" if lines else ""),
                              encoding="utf-8")


def build_hierarchy(sections: list[SectionNode]) -> NavGraph:
    """Nodes for every section, `has` chains for every parent relation,
    text-less nodes materialized for missing intermediate ancestors."""
    graph = NavGraph()
    for node in sections:
        graph.add_section(node)
    return graph
