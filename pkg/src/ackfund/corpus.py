"""Publication records: loading, validation, joins, and external funding fields.

Corpus files are UTF-8 JSON Lines, one record per line::

    {"id": "21984237", "pub_year": 2011, "journal": "...", "doc_type": "article",
     "author_countries": ["GB", "DE"],
     "mesh": [{"descriptor_name": "Breast Neoplasms", "tree_numbers": ["C04.588.180"]}],
     "sections": [{"kind": "other", "heading": "Funding", "text": "..."}],
     "wos_fu": "Cancer Research UK [C355/A6253]", "medline_grants": null,
     "reference": {"funders": ["cruk"], "has_ack": true}}
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .errors import Diagnostics, ValidationError, logger
from .paratext import ParatextSection, locate_sections


class DocType(str, Enum):
    ARTICLE = "article"
    REVIEW = "review"
    CONFERENCE_PAPER = "conference_paper"
    EDITORIAL = "editorial"
    ERRATUM = "erratum"
    NOTE = "note"
    LETTER = "letter"
    SHORT_SURVEY = "short_survey"
    BOOK = "book"
    OTHER = "other"


class Cohort(str, Enum):
    FUNDED = "FUNDED"
    ACK_NO_FUNDER = "ACK_NO_FUNDER"
    NO_ACK = "NO_ACK"


_TREE_NUMBER = re.compile(r"^[A-Z]\d+(?:\.\d+)*$")
_COUNTRY = re.compile(r"^[A-Z]{2}$")


@dataclass(frozen=True)
class MeshAssignment:
    descriptor_name: str
    tree_numbers: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "tree_numbers", tuple(self.tree_numbers))
        if not self.tree_numbers:
            raise ValidationError(f"MeSH descriptor {self.descriptor_name!r} has no tree numbers")
        for tn in self.tree_numbers:
            if not _TREE_NUMBER.match(tn):
                raise ValidationError(f"malformed tree number {tn!r}")


@dataclass(frozen=True)
class ReferenceAnnotation:
    funders: frozenset[str]
    has_ack_section: bool

    def __post_init__(self) -> None:
        object.__setattr__(self, "funders", frozenset(self.funders))
        if not self.has_ack_section and self.funders:
            raise ValidationError("reference lists funders but has_ack is false")


@dataclass(frozen=True)
class ExternalFunderEntry:
    name_raw: str
    grant_codes: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "grant_codes", tuple(self.grant_codes))
        if not self.name_raw.strip():
            raise ValidationError("external funder entry has an empty name")


@dataclass(frozen=True)
class PublicationRecord:
    id: str
    pub_year: int
    journal: str = ""
    doc_type: DocType = DocType.OTHER
    author_countries: tuple[str, ...] = ()
    mesh_descriptors: tuple[MeshAssignment, ...] = ()
    sections: tuple[ParatextSection, ...] = ()
    wos_fu_raw: str | None = None
    medline_grants_raw: tuple[str, ...] | None = None
    reference: ReferenceAnnotation | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.id, str) or not self.id.strip():
            raise ValidationError("record id must be a non-empty string")
        if isinstance(self.pub_year, bool) or not isinstance(self.pub_year, int) \
                or not 1800 <= self.pub_year <= 2100:
            raise ValidationError(f"{self.id}: pub_year {self.pub_year!r} outside [1800, 2100]")
        object.__setattr__(self, "doc_type", DocType(self.doc_type))
        object.__setattr__(self, "author_countries", tuple(self.author_countries))
        object.__setattr__(self, "mesh_descriptors", tuple(self.mesh_descriptors))
        object.__setattr__(self, "sections", tuple(self.sections))
        if self.medline_grants_raw is not None:
            object.__setattr__(self, "medline_grants_raw", tuple(self.medline_grants_raw))
        for code in self.author_countries:
            if not isinstance(code, str) or not _COUNTRY.match(code):
                raise ValidationError(f"{self.id}: bad author country {code!r}")


# ------------------------------------------------------------ (de)serialisation

def record_from_dict(data: dict, diagnostics: Diagnostics | None = None) -> PublicationRecord:
    if not isinstance(data, dict):
        raise ValidationError("record is not an object")
    try:
        doc_type = data.get("doc_type") or "other"
        try:
            doc_type = DocType(doc_type)
        except ValueError:
            if diagnostics is not None:
                diagnostics.add("unknown-doc-type", f"{data.get('id')}: {doc_type!r} -> other")
            doc_type = DocType.OTHER
        mesh = tuple(
            MeshAssignment(m["descriptor_name"], tuple(m["tree_numbers"]))
            for m in data.get("mesh") or ()
        )
        sections = tuple(
            ParatextSection(s.get("kind") or "other", s.get("heading") or "", s["text"])
            for s in data.get("sections") or ()
        )
        ref = data.get("reference")
        reference = None
        if ref is not None:
            reference = ReferenceAnnotation(frozenset(ref.get("funders") or ()),
                                            bool(ref.get("has_ack")))
        grants = data.get("medline_grants")
        if grants is not None and not isinstance(grants, list):
            raise ValidationError("medline_grants must be a list")
        wos = data.get("wos_fu")
        if wos is not None and not isinstance(wos, str):
            raise ValidationError("wos_fu must be a string")
        return PublicationRecord(
            id=data["id"],
            pub_year=data["pub_year"],
            journal=data.get("journal") or "",
            doc_type=doc_type,
            author_countries=tuple(data.get("author_countries") or ()),
            mesh_descriptors=mesh,
            sections=sections,
            wos_fu_raw=wos,
            medline_grants_raw=tuple(grants) if grants is not None else None,
            reference=reference,
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"malformed record: {exc!r}") from exc


def record_to_dict(record: PublicationRecord) -> dict:
    return {
        "id": record.id,
        "pub_year": record.pub_year,
        "journal": record.journal,
        "doc_type": record.doc_type.value,
        "author_countries": list(record.author_countries),
        "mesh": [{"descriptor_name": m.descriptor_name, "tree_numbers": list(m.tree_numbers)}
                 for m in record.mesh_descriptors],
        "sections": [{"kind": s.kind.value, "heading": s.heading, "text": s.text}
                     for s in record.sections],
        "wos_fu": record.wos_fu_raw,
        "medline_grants": (list(record.medline_grants_raw)
                           if record.medline_grants_raw is not None else None),
        "reference": (None if record.reference is None else
                      {"funders": sorted(record.reference.funders),
                       "has_ack": record.reference.has_ack_section}),
    }


def serialize_record(record: PublicationRecord) -> str:
    return json.dumps(record_to_dict(record), ensure_ascii=False)


def dump_corpus(records: Iterable[PublicationRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(serialize_record(rec))
            fh.write("\n")


def _check_unique(records: Sequence[PublicationRecord], what: str = "corpus") -> None:
    seen: set[str] = set()
    for rec in records:
        if rec.id in seen:
            raise ValidationError(f"duplicate id {rec.id!r} in {what}")
        seen.add(rec.id)


def parse_corpus_lines(lines: Iterable[str], diagnostics: Diagnostics | None = None,
                       source: str = "<corpus>") -> list[PublicationRecord]:
    diagnostics = diagnostics if diagnostics is not None else Diagnostics()
    records = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            records.append(record_from_dict(json.loads(line), diagnostics))
        except (json.JSONDecodeError, ValidationError) as exc:
            diagnostics.add("malformed-line", f"{source}:{lineno}: {exc}")
            logger.warning("skipping %s:%d: %s", source, lineno, exc)
    _check_unique(records, source)
    return records


def load_corpus(path: str | Path, diagnostics: Diagnostics | None = None) -> list[PublicationRecord]:
    """Load a JSON Lines corpus; malformed lines are skipped and reported.

    Raises ``OSError`` if the file cannot be read and ``ValidationError`` on
    duplicate ids.
    """
    with open(path, encoding="utf-8") as fh:
        return parse_corpus_lines(fh, diagnostics, str(path))


def join_by_id(primary: Sequence[PublicationRecord], secondary: Sequence[PublicationRecord]
               ) -> tuple[list[PublicationRecord], list[str]]:
    """Attach author countries and document type from ``secondary`` by id."""
    _check_unique(primary, "primary input")
    _check_unique(secondary, "secondary input")
    index = {r.id: r for r in secondary}
    joined, unmatched = [], []
    for rec in primary:
        other = index.get(rec.id)
        if other is None:
            unmatched.append(rec.id)
            continue
        joined.append(replace(rec, author_countries=other.author_countries,
                              doc_type=other.doc_type))
    return joined, unmatched


# ------------------------------------------------------- external funding fields

def _split_top_level(raw: str) -> list[str]:
    pieces = raw.split("; ")
    merged: list[str] = []
    i = 0
    while i < len(pieces):
        piece = pieces[i]
        depth = piece.count("[") - piece.count("]")
        j = i
        # Re-join pieces only when a later piece closes the open bracket.
        if depth > 0:
            acc, d = piece, depth
            for k in range(i + 1, len(pieces)):
                acc += "; " + pieces[k]
                d += pieces[k].count("[") - pieces[k].count("]")
                if d <= 0:
                    piece, j = acc, k
                    break
        merged.append(piece)
        i = j + 1
    return merged


_TRAILING_CODES = re.compile(r"^(.*?)\s*\[([^\[\]]*)\]$", re.S)


def parse_wos_fu(raw: str | None, diagnostics: Diagnostics | None = None) -> list[ExternalFunderEntry]:
    """Parse a WoS "FU" field: ``Name [code, code]; Name; ...``."""
    if raw is None or not raw.strip():
        return []
    entries = []
    for piece in _split_top_level(raw.strip()):
        piece = piece.strip()
        if not piece:
            continue
        m = _TRAILING_CODES.match(piece)
        if m and m.group(1).count("[") == m.group(1).count("]"):
            name = m.group(1).strip()
            codes = tuple(c.strip() for c in m.group(2).split(",") if c.strip())
        else:
            if "[" in piece or "]" in piece:
                if diagnostics is not None:
                    diagnostics.add("unbalanced-bracket", f"FU entry {piece!r}")
            name, codes = piece, ()
        if not name:
            if diagnostics is not None:
                diagnostics.add("empty-fu-name", f"FU entry {piece!r}")
            continue
        entries.append(ExternalFunderEntry(name, codes))
    return entries


def serialize_fu(entries: Iterable[ExternalFunderEntry]) -> str:
    parts = []
    for e in entries:
        parts.append(f"{e.name_raw} [{', '.join(e.grant_codes)}]" if e.grant_codes else e.name_raw)
    return "; ".join(parts)


def parse_medline_grant(raw: str) -> ExternalFunderEntry:
    """Parse a MEDLINE grant string ``code/subagency/agency/country``.

    Three-field strings (``code/agency/country``, the layout used for non-US
    agencies) are also accepted. Anything else falls back to the whole string.
    """
    text = raw.strip()
    parts = [p.strip() for p in text.split("/")]
    if len(parts) == 1:
        return ExternalFunderEntry(text, ())
    if len(parts) >= 4:
        code = "/".join(parts[:-3])
        agency = parts[-2]
    elif len(parts) == 3:
        code, agency = parts[0], parts[1]
    else:
        code, agency = parts[0], parts[1]
    name = agency if agency else text
    return ExternalFunderEntry(name, (code,) if code else ())


# -------------------------------------------------------------------- cohorts

def classify_cohort(record: PublicationRecord, extracted_funders: Iterable[str],
                    located: Sequence[ParatextSection] | None = None) -> Cohort:
    if any(True for _ in extracted_funders):
        return Cohort.FUNDED
    if located is None:
        located = locate_sections(record.sections)
    return Cohort.ACK_NO_FUNDER if located else Cohort.NO_ACK
