"""Locate funding-relevant paratext sections and split them into statements."""
from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping


class SectionKind(str, Enum):
    ACKNOWLEDGEMENTS = "acknowledgements"
    FUNDING = "funding"
    DISCLOSURE = "disclosure"
    FOOTNOTE = "footnote"
    OTHER = "other"


@dataclass(frozen=True)
class ParatextSection:
    kind: SectionKind
    heading: str
    text: str

    def __post_init__(self) -> None:
        if not isinstance(self.kind, SectionKind):
            object.__setattr__(self, "kind", SectionKind(self.kind))


@dataclass(frozen=True)
class Statement:
    section_kind: SectionKind
    text: str
    char_span: tuple[int, int]


DEFAULT_HEADINGS: dict[str, SectionKind] = {
    "acknowledgements": SectionKind.ACKNOWLEDGEMENTS,
    "acknowledgments": SectionKind.ACKNOWLEDGEMENTS,
    "acknowledgement": SectionKind.ACKNOWLEDGEMENTS,
    "acknowledgment": SectionKind.ACKNOWLEDGEMENTS,
    "funding": SectionKind.FUNDING,
    "financial support": SectionKind.FUNDING,
    "financial information": SectionKind.FUNDING,
    "grant support": SectionKind.FUNDING,
    "disclosure": SectionKind.DISCLOSURE,
    "disclosure statement": SectionKind.DISCLOSURE,
    "conflict of interest": SectionKind.DISCLOSURE,
    "conflicts of interest": SectionKind.DISCLOSURE,
}

_HEADING_JUNK = re.compile(r"[\s:.\u2014\-]+$")


def _normalize_heading(heading: str) -> str:
    return " ".join(_HEADING_JUNK.sub("", heading.strip()).lower().split())


def classify_heading(
    heading: str, lexicon: Mapping[str, SectionKind] = DEFAULT_HEADINGS
) -> SectionKind | None:
    """Exact lexicon match first, then the longest entry the heading starts with."""
    norm = _normalize_heading(heading)
    if not norm:
        return None
    if norm in lexicon:
        return lexicon[norm]
    best = None
    for entry in lexicon:
        if norm.startswith(entry + " ") and (best is None or len(entry) > len(best)):
            best = entry
    return lexicon[best] if best else None


def locate_sections(
    sections: Iterable[ParatextSection],
    lexicon: Mapping[str, SectionKind] = DEFAULT_HEADINGS,
    cue_table=None,
) -> list[ParatextSection]:
    """Return the sections that are candidates for funder extraction.

    Headings are matched case-insensitively against ``lexicon``. A section with an
    unrecognised heading keeps a producer-assigned non-funding kind; otherwise it is
    promoted to ``footnote`` if its text carries at least one financial cue, and
    dropped if it does not.
    """
    from .extract import has_financial_cue, default_cue_table

    table = cue_table if cue_table is not None else default_cue_table()
    out = []
    for sec in sections:
        if not sec.text or not sec.text.strip():
            continue
        kind = classify_heading(sec.heading, lexicon)
        if kind is None:
            if sec.kind in (SectionKind.ACKNOWLEDGEMENTS, SectionKind.DISCLOSURE,
                            SectionKind.FOOTNOTE):
                kind = sec.kind
            elif has_financial_cue(sec.text, table):
                kind = SectionKind.FOOTNOTE
            else:
                continue
        out.append(ParatextSection(kind, sec.heading, sec.text))
    return out


# Abbreviations whose trailing period never ends a sentence.
ABBREVIATIONS = ("Dr", "Mr", "Ms", "Mrs", "Prof", "St", "e.g", "i.e", "et al", "Inc", "Ltd",
                 "Co", "Corp", "No", "vs", "Fig", "Ref")

_BOUNDARY = re.compile(r"[.!?][\"'”)\]]*(?=\s+[\"'“(\[]?[A-Z])")
_ABBREV_TAIL = re.compile(
    r"(?:(?<![\w.])(?:%s)|\.\.)$" % "|".join(re.escape(a) for a in ABBREVIATIONS)
)
# "T. Soare", "J. R. Smith": a lone capital is an initial when a surname follows.
_INITIAL_TAIL = re.compile(r"(?<![\w.])[A-Z]$")
_SURNAME_AHEAD = re.compile(r"\s+(?:[A-Z]\.\s*)*[A-Z][a-z]")


def segment_statements(section: ParatextSection) -> list[Statement]:
    text = section.text
    cuts = []
    for m in _BOUNDARY.finditer(text):
        if text[m.start()] == ".":
            if _ABBREV_TAIL.search(text, 0, m.start()):
                continue
            if _INITIAL_TAIL.search(text, 0, m.start()) and _SURNAME_AHEAD.match(text, m.end()):
                continue
        cuts.append(m.end())
    cuts.append(len(text))

    statements = []
    pos = 0
    for cut in cuts:
        start = pos
        while start < cut and text[start].isspace():
            start += 1
        end = cut
        while end > start and text[end - 1].isspace():
            end -= 1
        if end > start:
            statements.append(Statement(section.kind, text[start:end], (start, end)))
        pos = cut
    return statements
