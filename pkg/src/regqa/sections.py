"""Section-ID grammar for hierarchically numbered regulatory text.

Identifiers follow the part.section(level)... convention, e.g.
``1926.451(b)(2)(i)``: a part number, a section number, then nested level
tokens whose kind is fixed by position: lowercase letter, arabic number,
lowercase roman numeral (positions 4 and 5 extend to uppercase letter and
uppercase roman when a caller opts into deeper nesting).
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from .errors import MalformedId

logger = logging.getLogger(__name__)

#: Default maximum nesting depth; 4 and 5 are opt-in extensions.
DEFAULT_MAX_LEVELS = 3
HARD_MAX_LEVELS = 5

_ID_RE = re.compile(r"§?\s*([1-9]\d*)\.([1-9]\d*)((?:\([^()]*\))*)")
_TOKEN_RE = re.compile(r"\(([^()]*)\)")
_ROMAN_BODY = r"m{0,3}(?:cm|cd|d?c{0,3})(?:xc|xl|l?x{0,3})(?:ix|iv|v?i{0,3})"
_ROMAN_RE = re.compile(_ROMAN_BODY)
_LETTER_RE = re.compile(r"[a-z]+")
_NUMBER_RE = re.compile(r"[1-9]\d*")
_UPPER_LETTER_RE = re.compile(r"[A-Z]+")
_UPPER_ROMAN_RE = re.compile(_ROMAN_BODY.upper())


def _valid_roman(token: str) -> bool:
    return bool(token) and _ROMAN_RE.fullmatch(token) is not None


def _valid_upper_roman(token: str) -> bool:
    return bool(token) and _UPPER_ROMAN_RE.fullmatch(token) is not None


def _normalize_level(token: str, position: int) -> str:
    """Case-normalize a level token according to its 1-based position."""
    return token.lower() if position <= 3 else token.upper()


def _valid_level(token: str, position: int) -> bool:
    if position == 1:
        return _LETTER_RE.fullmatch(token) is not None
    if position == 2:
        return _NUMBER_RE.fullmatch(token) is not None
    if position == 3:
        return _valid_roman(token)
    if position == 4:
        return _UPPER_LETTER_RE.fullmatch(token) is not None
    if position == 5:
        return _valid_upper_roman(token)
    return False


@dataclass(frozen=True)
class SectionId:
    """Canonical identifier of one provision, e.g. 1926.451(b)(2)(i)."""

    part: int
    section: int
    levels: tuple[str, ...] = ()

    @property
    def canonical_text(self) -> str:
        suffix = "".join(f"({tok})" for tok in self.levels)
        return f"{self.part}.{self.section}{suffix}"

    def base(self) -> "SectionId":
        """The level-free part.section id."""
        return SectionId(self.part, self.section)

    def parent(self) -> "SectionId | None":
        return parent_of(self)

    def child(self, token: str) -> "SectionId":
        position = len(self.levels) + 1
        norm = _normalize_level(token, position)
        if position > HARD_MAX_LEVELS or not _valid_level(norm, position):
            raise MalformedId(f"invalid level token {token!r} at position {position}")
        return SectionId(self.part, self.section, self.levels + (norm,))

    def __str__(self) -> str:
        return self.canonical_text


def parse_section_id(raw: str, *, max_levels: int = DEFAULT_MAX_LEVELS) -> SectionId:
    """Parse and normalize a section id string.

    Normalization trims whitespace, drops a leading section sign, and
    case-folds level tokens by position. Raises MalformedId for anything
    that does not re-render to an equal id.
    """
    if raw is None or not str(raw).strip():
        raise MalformedId("empty section id")
    if not 1 <= max_levels <= HARD_MAX_LEVELS:
        raise ValueError(f"max_levels must be in [1, {HARD_MAX_LEVELS}]")
    text = str(raw).strip()
    match = _ID_RE.fullmatch(text)
    if match is None:
        raise MalformedId(f"not a section id: {raw!r}")
    part, section, blob = match.groups()
    tokens = _TOKEN_RE.findall(blob)
    if len(tokens) > max_levels:
        raise MalformedId(
            f"too many levels in {raw!r}: {len(tokens)} > {max_levels}"
        )
    levels: list[str] = []
    for position, token in enumerate(tokens, start=1):
        token = token.strip()
        if not token:
            raise MalformedId(f"empty level token in {raw!r}")
        norm = _normalize_level(token, position)
        if not _valid_level(norm, position):
            raise MalformedId(
                f"level token {token!r} invalid at position {position} in {raw!r}"
            )
        levels.append(norm)
    return SectionId(int(part), int(section), tuple(levels))


def parent_of(section_id: SectionId) -> SectionId | None:
    """Drop the deepest level token; None for a level-free base id."""
    if not section_id.levels:
        return None
    return SectionId(section_id.part, section_id.section, section_id.levels[:-1])


def ancestors(section_id: SectionId) -> list[SectionId]:
    """Parents up to and including the base id, nearest first."""
    chain = []
    current = parent_of(section_id)
    while current is not None:
        chain.append(current)
        current = parent_of(current)
    return chain


def sort_key(section_id: SectionId) -> str:
    """Deterministic ordering key: the canonical text."""
    return section_id.canonical_text


# --- cross-reference detection -------------------------------------------

_ABS_REF_RE = re.compile(r"(?:§\s*)?(?<![\d.])([1-9]\d{2,3})\.([1-9]\d*)(?!\.?\d)")
_LEVEL_AT_RE = re.compile(r"\(([A-Za-z0-9]{1,6})\)")
_CONT_SEP_RE = re.compile(r"\s*(?:(?:,|;|and|or|through|&)\s*)+")
_PARA_RE = re.compile(
    r"paragraphs?\s+"
    r"((?:\([A-Za-z0-9]{1,6}\))+"
    r"(?:\s*(?:,|;|and|or|through|&)\s*(?:\([A-Za-z0-9]{1,6}\))+)*)"
    r"\s+of\s+this\s+section",
    re.IGNORECASE,
)
_CHAIN_RE = re.compile(r"(?:\([A-Za-z0-9]{1,6}\))+")


def _consume_levels(text: str, pos: int, start_position: int, max_levels: int):
    """Greedily read valid parenthesized levels at ``pos``.

    Returns (levels, new_pos). Stops at the first token that fails the
    positional kind check or when the depth cap is reached.
    """
    levels: list[str] = []
    position = start_position
    while position <= max_levels:
        match = _LEVEL_AT_RE.match(text, pos)
        if match is None:
            break
        norm = _normalize_level(match.group(1), position)
        if not _valid_level(norm, position):
            break
        levels.append(norm)
        pos = match.end()
        position += 1
    return levels, pos


def _chain_to_levels(chain: str, max_levels: int) -> tuple[str, ...] | None:
    """Validate a (x)(y)... chain starting at level position 1."""
    tokens = _LEVEL_AT_RE.findall(chain)
    if not tokens or len(tokens) > max_levels:
        return None
    levels = []
    for position, token in enumerate(tokens, start=1):
        norm = _normalize_level(token, position)
        if not _valid_level(norm, position):
            return None
        levels.append(norm)
    return tuple(levels)


def detect_cross_references(
    body: str,
    host: SectionId | None = None,
    *,
    max_levels: int = DEFAULT_MAX_LEVELS,
) -> list[SectionId]:
    """Find all section ids referenced in ``body``.

    Handles absolute forms ("1926.502(b)(3)", "§1926.502(k)"), sibling
    continuations after an id ("1926.451(b)(2)(i) and (ii)"), and
    host-relative forms ("paragraph (b)(2) of this section"). Relative
    forms without a host are skipped and logged. Output is deduplicated
    in order of first appearance.
    """
    if not body:
        return []
    found: dict[SectionId, None] = {}

    def add(sid: SectionId) -> None:
        found.setdefault(sid, None)

    # host-relative paragraph references
    para_spans = []
    for match in _PARA_RE.finditer(body):
        para_spans.append(match.span())
        if host is None:
            logger.warning("skipping relative reference with no host section: %r",
                           match.group(0))
            continue
        for chain in _CHAIN_RE.findall(match.group(1)):
            levels = _chain_to_levels(chain, max_levels)
            if levels is None:
                logger.warning("unresolvable paragraph reference %r in %s",
                               chain, host)
                continue
            add(SectionId(host.part, host.section, levels))

    def inside_para(pos: int) -> bool:
        return any(start <= pos < end for start, end in para_spans)

    # absolute references plus sibling continuations
    for match in _ABS_REF_RE.finditer(body):
        if inside_para(match.start()):
            continue
        part, section = int(match.group(1)), int(match.group(2))
        levels, pos = _consume_levels(body, match.end(), 1, max_levels)
        ref = SectionId(part, section, tuple(levels))
        add(ref)
        # continuation tokens: "... (b)(2)(i) and (ii)", "..., (h)(2)"
        while True:
            sep = _CONT_SEP_RE.match(body, pos)
            if sep is None:
                break
            chain_match = _CHAIN_RE.match(body, sep.end())
            if chain_match is None:
                break
            tokens = _LEVEL_AT_RE.findall(chain_match.group(0))
            resolved: SectionId | None = None
            if len(tokens) == 1 and ref.levels:
                # sibling at the reference's own depth
                position = len(ref.levels)
                norm = _normalize_level(tokens[0], position)
                if _valid_level(norm, position):
                    resolved = SectionId(part, section, ref.levels[:-1] + (norm,))
            if resolved is None:
                levels_from_base = _chain_to_levels(chain_match.group(0), max_levels)
                if levels_from_base is not None:
                    resolved = SectionId(part, section, levels_from_base)
            if resolved is None:
                break
            add(resolved)
            ref = resolved
            pos = chain_match.end()

    return list(found)
