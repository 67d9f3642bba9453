"""Corpus ingestion: marked plaintext, an HTML adapter, and two-source
reconciliation.

The canonical ingestion format is marked plaintext: a line starting with
``@@ <section-id> | <optional title>`` opens a section and the lines up
to the next marker are its body. HTML scraping is an adapter that yields
the same node list, so everything downstream is format-agnostic.
"""
from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from html.parser import HTMLParser
from pathlib import Path

from .errors import (
    DuplicateSection,
    MalformedId,
    MalformedMarker,
    NoSectionsFound,
    OrphanTextError,
)
from .sections import SectionId, parse_section_id, sort_key

logger = logging.getLogger(__name__)

MARKER_PREFIX = "@@"
_WS_RE = re.compile(r"\s+")


@dataclass
class SectionNode:
    """One provision: canonical id, optional title, verbatim body."""

    id: SectionId
    title: str | None
    body: str
    source_url: str | None
    order_index: int

    def __post_init__(self):
        if not self.body and not self.title:
            raise ValueError(f"section {self.id}: body and title both empty")

    @property
    def text(self) -> str:
        return self.body if self.body else (self.title or "")


@dataclass
class ReconcileReport:
    matched: bool
    discrepancies: list[tuple[SectionId, str, str]]


def _check_order_indices(nodes: list[SectionNode]) -> None:
    seen_ids: set[SectionId] = set()
    seen_order: set[int] = set()
    for node in nodes:
        if node.id in seen_ids:
            raise DuplicateSection(f"duplicate section {node.id}")
        if node.order_index in seen_order:
            raise DuplicateSection(f"duplicate order_index {node.order_index}")
        seen_ids.add(node.id)
        seen_order.add(node.order_index)


def parse_marked_text(raw: str, source_url: str | None = None,
                      *, max_levels: int = 3) -> list[SectionNode]:
    """Parse the marked-plaintext corpus format into ordered nodes."""
    sections: list[tuple[SectionId, str | None, list[str]]] = []
    orphan: list[str] = []
    current: list[str] | None = None
    for line_number, line in enumerate(raw.split("\n"), start=1):
        if line.startswith(MARKER_PREFIX):
            marker = line[len(MARKER_PREFIX):].strip()
            if not marker:
                raise MalformedMarker(line_number, line, "empty marker")
            raw_id, _, title = marker.partition("|")
            try:
                section_id = parse_section_id(raw_id, max_levels=max_levels)
            except MalformedId as exc:
                raise MalformedMarker(line_number, line, str(exc))
            title = title.strip() or None
            current = []
            sections.append((section_id, title, current))
        elif current is not None:
            current.append(line)
        elif line.strip():
            orphan.append(line)
    if not sections:
        raise NoSectionsFound("no section markers in input")

    nodes: list[SectionNode] = []
    next_index = 0
    if orphan:
        preamble_id = sections[0][0].base()
        if any(section_id == preamble_id for section_id, _, _ in sections):
            raise OrphanTextError(
                f"text precedes the first marker and {preamble_id} is already "
                "a marked section")
        logger.info("attaching %d orphan lines to synthetic preamble %s",
                    len(orphan), preamble_id)
        nodes.append(SectionNode(preamble_id, None, "\n".join(orphan).strip(),
                                 source_url, next_index))
        next_index += 1
    for section_id, title, body_lines in sections:
        body = "\n".join(body_lines).strip()
        if not body and not title:
            title = section_id.canonical_text  # heading with no text at all
        nodes.append(SectionNode(section_id, title, body, source_url, next_index))
        next_index += 1
    _check_order_indices(nodes)
    return nodes


class _SectionHTMLParser(HTMLParser):
    """Collects (section-id, title, text) runs from anchored markup.

    Any tag carrying an ``id`` or ``name`` attribute that parses as a
    section id opens a new section; if that tag is a heading, its inline
    text becomes the title. All other text accumulates into the body of
    the open section.
    """

    _HEADINGS = {"h1", "h2", "h3", "h4", "h5", "h6"}
    _SKIP = {"script", "style"}

    def __init__(self, max_levels: int = 3):
        super().__init__(convert_charrefs=True)
        self.max_levels = max_levels
        self.sections: list[dict] = []
        self._skip_depth = 0
        self._title_tag: str | None = None

    def handle_starttag(self, tag, attrs):
        if tag in self._SKIP:
            self._skip_depth += 1
            return
        attr_map = dict(attrs)
        candidate = attr_map.get("id") or attr_map.get("name")
        if candidate:
            try:
                section_id = parse_section_id(candidate, max_levels=self.max_levels)
            except MalformedId:
                return
            self.sections.append(
                {"id": section_id, "title_parts": [], "body_parts": []})
            if tag in self._HEADINGS:
                self._title_tag = tag

    def handle_endtag(self, tag):
        if tag in self._SKIP and self._skip_depth:
            self._skip_depth -= 1
            return
        if tag == self._title_tag:
            self._title_tag = None
        if tag in ("p", "div", "li", "br") and self.sections:
            self.sections[-1]["body_parts"].append("\n")

    def handle_data(self, data):
        if self._skip_depth or not self.sections:
            return
        target = "title_parts" if self._title_tag else "body_parts"
        self.sections[-1][target].append(data)


def _collapse(parts: list[str]) -> str:
    text = "".join(parts)
    lines = [_WS_RE.sub(" ", line).strip() for line in text.split("\n")]
    return "\n".join(line for line in lines if line).strip()


def parse_html(raw: str, source_url: str | None = None,
               *, max_levels: int = 3) -> list[SectionNode]:
    """Adapter: extract sections from anchored HTML."""
    parser = _SectionHTMLParser(max_levels=max_levels)
    parser.feed(raw)
    parser.close()
    if not parser.sections:
        raise NoSectionsFound("no section anchors in HTML input")
    nodes = []
    for index, entry in enumerate(parser.sections):
        title = _collapse(entry["title_parts"]) or None
        body = _collapse(entry["body_parts"])
        if not title and not body:
            title = entry["id"].canonical_text
        nodes.append(SectionNode(entry["id"], title, body, source_url, index))
    _check_order_indices(nodes)
    return nodes


def extract_sections(raw: str, format: str, source_url: str | None = None,
                     *, max_levels: int = 3) -> list[SectionNode]:
    """Parse a raw document in the given format ('text' or 'html')."""
    if format in ("text", "marked-plaintext"):
        return parse_marked_text(raw, source_url, max_levels=max_levels)
    if format == "html":
        return parse_html(raw, source_url, max_levels=max_levels)
    raise ValueError(f"unknown corpus format {format!r}")


def _normalize_ws(text: str) -> str:
    return _WS_RE.sub(" ", text).strip()


def _excerpt(text: str, limit: int = 200) -> str:
    return text if len(text) <= limit else text[:limit - 1] + "…"


def reconcile(a: list[SectionNode], b: list[SectionNode]) -> ReconcileReport:
    """Literal per-section comparison after whitespace normalization.

    Disagreement is data, not failure: the report lists every mismatching
    section and sections present in only one source.
    """
    map_a = {node.id: node for node in a}
    map_b = {node.id: node for node in b}
    discrepancies: list[tuple[SectionId, str, str]] = []
    for section_id in sorted(set(map_a) | set(map_b), key=sort_key):
        text_a = _normalize_ws(map_a[section_id].text) if section_id in map_a else ""
        text_b = _normalize_ws(map_b[section_id].text) if section_id in map_b else ""
        if section_id not in map_a or section_id not in map_b or text_a != text_b:
            discrepancies.append(
                (section_id, _excerpt(text_a), _excerpt(text_b)))
    return ReconcileReport(matched=not discrepancies, discrepancies=discrepancies)


# --- corpus.json serialization -------------------------------------------

def corpus_to_dicts(nodes: list[SectionNode]) -> list[dict]:
    return [
        {
            "id": node.id.canonical_text,
            "title": node.title,
            "body": node.body,
            "source_url": node.source_url,
            "order_index": node.order_index,
        }
        for node in nodes
    ]


def corpus_from_dicts(records: list[dict], *, max_levels: int = 3) -> list[SectionNode]:
    nodes = [
        SectionNode(
            id=parse_section_id(rec["id"], max_levels=max_levels),
            title=rec.get("title"),
            body=rec.get("body", ""),
            source_url=rec.get("source_url"),
            order_index=int(rec["order_index"]),
        )
        for rec in records
    ]
    _check_order_indices(nodes)
    return nodes


def save_corpus(nodes: list[SectionNode], path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(corpus_to_dicts(nodes), indent=2, ensure_ascii=False) + "\n",
        encoding="utf-8")


def load_corpus(path: str | Path, *, max_levels: int = 3) -> list[SectionNode]:
    records = json.loads(Path(path).read_text(encoding="utf-8"))
    return corpus_from_dicts(records, max_levels=max_levels)
