"""Funder name harmonisation against a curated alias table."""
from __future__ import annotations

import csv
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import countries
from .errors import ValidationError

MIN_CONTAINMENT_CHARS = 8
STOP_TOKENS = {"the", "of", "for"}
ALIAS_COLUMNS = ("id", "canonical_name", "country", "sector", "alias")


class Sector(str, Enum):
    UK_PUBLIC_CHARITY = "uk_public_charity"
    NON_UK_PUBLIC_CHARITY = "non_uk_public_charity"
    INDUSTRY = "industry"
    HOST_INSTITUTION = "host_institution"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class CanonicalFunder:
    id: str
    canonical_name: str
    country: str = countries.UNKNOWN
    sector: Sector = Sector.UNKNOWN

    def __post_init__(self) -> None:
        object.__setattr__(self, "sector", Sector(self.sector))
        if not countries.is_valid_code(self.country):
            raise ValidationError(f"funder {self.id}: bad country {self.country!r}")


@dataclass(frozen=True)
class Unresolved:
    normal_form: str


_ACRONYM_SUFFIX = re.compile(r"\s*\(\s*[A-Z][A-Za-z0-9&.\-]*\s*\)\s*$")
_SPLITTERS = re.compile(r"[-/_\u2010-\u2015]")
# Letters that NFKD does not decompose into ASCII.
_TRANSLIT = str.maketrans({"ß": "ss", "æ": "ae", "Æ": "AE", "ø": "o", "Ø": "O", "œ": "oe",
                           "Œ": "OE", "ł": "l", "Ł": "L", "đ": "d", "Đ": "D", "ı": "i"})


def normalize_name(surface: str) -> str:
    """Comparison key for a funder name.

    >>> normalize_name("Deutsche Forschungsgemeinschaft (DFG)")
    'deutsche forschungsgemeinschaft'
    """
    text = _ACRONYM_SUFFIX.sub("", surface)
    text = unicodedata.normalize("NFKD", text.translate(_TRANSLIT))
    text = "".join(c for c in text if not unicodedata.combining(c))
    text = text.encode("ascii", "ignore").decode("ascii").lower()
    text = _SPLITTERS.sub(" ", text)
    text = "".join(c for c in text if c == "&" or not unicodedata.category(c).startswith(("P", "S"))
                   or c.isspace())
    return " ".join(t for t in text.split() if t not in STOP_TOKENS)


class AliasTable:
    """Immutable alias normal form -> funder mapping."""

    def __init__(self, funders: Iterable[CanonicalFunder], aliases: Mapping[str, str]):
        self.funders: dict[str, CanonicalFunder] = {}
        for f in funders:
            if f.id in self.funders and self.funders[f.id] != f:
                raise ValidationError(f"conflicting definitions for funder {f.id!r}")
            self.funders[f.id] = f
        entries: dict[str, str] = {}
        for alias, fid in list(aliases.items()) + [(f.canonical_name, f.id)
                                                   for f in self.funders.values()]:
            key = normalize_name(alias)
            if not key:
                continue
            if fid not in self.funders:
                raise ValidationError(f"alias {alias!r} points to unknown funder {fid!r}")
            if entries.get(key, fid) != fid:
                raise ValidationError(f"alias {key!r} maps to both {entries[key]!r} and {fid!r}")
            entries[key] = fid
        self.entries = entries
        # Longest alias first, then id, so containment ties resolve identically
        # whatever the row order of the source file.
        self._by_length = sorted(
            ((k, v) for k, v in entries.items() if len(k) >= MIN_CONTAINMENT_CHARS),
            key=lambda kv: (-len(kv[0]), kv[1], kv[0]),
        )

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, key: str) -> bool:
        return key in self.entries

    def lookup(self, normal_form: str) -> CanonicalFunder | None:
        fid = self.entries.get(normal_form)
        return self.funders[fid] if fid else None

    @classmethod
    def empty(cls) -> AliasTable:
        return cls([], {})

    @classmethod
    def from_rows(cls, rows: Iterable[Sequence[str]]) -> AliasTable:
        funders: dict[str, CanonicalFunder] = {}
        aliases: dict[str, str] = {}
        for lineno, row in enumerate(rows, 1):
            if not row or not row[0].strip() or row[0].startswith("#"):
                continue
            if tuple(c.strip().lower() for c in row[:5]) == ALIAS_COLUMNS:
                continue
            if len(row) < 4:
                raise ValidationError(f"alias table row {lineno}: expected >= 4 columns")
            fid, name, country, sector = (c.strip() for c in row[:4])
            alias = row[4].strip() if len(row) > 4 else ""
            try:
                funder = CanonicalFunder(fid, name, country or countries.UNKNOWN,
                                         Sector(sector or "unknown"))
            except ValueError as exc:
                raise ValidationError(f"alias table row {lineno}: {exc}") from exc
            if fid in funders and funders[fid] != funder:
                raise ValidationError(f"alias table row {lineno}: conflicting data for {fid!r}")
            funders[fid] = funder
            if alias:
                key = normalize_name(alias)
                if aliases.get(key, fid) != fid:
                    raise ValidationError(
                        f"alias table row {lineno}: {alias!r} already maps to {aliases[key]!r}")
                aliases[key] = fid
        return cls(funders.values(), aliases)

    @classmethod
    def from_tsv(cls, path: str | Path) -> AliasTable:
        with open(path, encoding="utf-8", newline="") as fh:
            return cls.from_rows(csv.reader(fh, delimiter="\t"))

    def containment_match(self, normal_form: str) -> CanonicalFunder | None:
        padded = f" {normal_form} "
        for alias, fid in self._by_length:
            if f" {alias} " in padded:
                return self.funders[fid]
            if len(normal_form) >= MIN_CONTAINMENT_CHARS and padded in f" {alias} ":
                return self.funders[fid]
        return None


def resolve(surface: str, table: AliasTable) -> CanonicalFunder | Unresolved:
    key = normalize_name(surface)
    hit = table.lookup(key)
    if hit is None and key:
        hit = table.containment_match(key)
    return hit if hit is not None else Unresolved(key)


def assign_country(funder: CanonicalFunder | Unresolved, context=None,
                   acknowledging_author_index: int | None = None,
                   text: str | None = None) -> str:
    """Country of a funder, by decreasing precedence.

    1. the alias table's country for a resolved funder;
    2. a country stated in ``text`` (e.g. "National Institute for Health Research (UK)");
    3. the acknowledging author's country, else the first author's;
    4. ``"ZZ"``.
    """
    if isinstance(funder, CanonicalFunder) and funder.country != countries.UNKNOWN:
        return funder.country
    if text:
        code = countries.find_in_text(text)
        if code:
            return code
    author_countries = tuple(getattr(context, "author_countries", ()) or ())
    if author_countries:
        if acknowledging_author_index is not None and \
                0 <= acknowledging_author_index < len(author_countries):
            return author_countries[acknowledging_author_index]
        return author_countries[0]
    return countries.UNKNOWN


def harmonize_set(surfaces: Iterable[str], table: AliasTable) -> tuple[frozenset[str], list[str]]:
    ids: set[str] = set()
    unresolved: set[str] = set()
    for s in surfaces:
        hit = resolve(s, table)
        if isinstance(hit, CanonicalFunder):
            ids.add(hit.id)
        elif hit.normal_form:
            unresolved.add(hit.normal_form)
    return frozenset(ids), sorted(unresolved)


def write_unresolved_report(counts: Counter, path: str | Path) -> None:
    """TSV (normal_form, occurrence_count), most frequent first."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("normal_form\toccurrence_count\n")
        for name, n in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])):
            fh.write(f"{name}\t{n}\n")
