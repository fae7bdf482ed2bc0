"""Glue between stages: code each publication once, then feed the analytics."""
from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

from . import countries
from .corpus import (Cohort, PublicationRecord, classify_cohort, parse_medline_grant,
                     parse_wos_fu)
from .errors import Diagnostics, ValidationError
from .extract import CueTable, Support, extract_sections
from .harmonize import AliasTable, CanonicalFunder, Sector, assign_country, resolve
from .landscape import CodedRecord
from .paratext import locate_sections

UNRESOLVED_PREFIX = "unresolved:"
SYSTEMS = ("extractor", "wos", "medline")


def funder_key(hit) -> str:
    """Analytics key: the canonical id, or a prefixed normal form."""
    if isinstance(hit, CanonicalFunder):
        return hit.id
    return UNRESOLVED_PREFIX + hit.normal_form


@dataclass(frozen=True)
class CodedPublication:
    id: str
    surfaces: tuple[str, ...]
    funder_ids: frozenset[str]
    unresolved: tuple[str, ...]
    cohort: Cohort

    @property
    def funder_keys(self) -> frozenset[str]:
        return self.funder_ids | {UNRESOLVED_PREFIX + u for u in self.unresolved}


@dataclass(frozen=True)
class FunderInfo:
    key: str
    label: str
    country: str
    sector: Sector


@dataclass
class CodingResult:
    publications: list[CodedPublication]
    registry: dict[str, FunderInfo]
    unresolved_counts: Counter
    diagnostics: Diagnostics

    def cohort_counts(self) -> dict[Cohort, int]:
        counts = Counter(p.cohort for p in self.publications)
        return {c: counts.get(c, 0) for c in Cohort}


def code_corpus(records: Sequence[PublicationRecord], aliases: AliasTable,
                cues: CueTable | None = None,
                diagnostics: Diagnostics | None = None) -> CodingResult:
    """Locate, extract and harmonise every record, and settle funder countries.

    A funder's country comes from the alias table when known; otherwise the
    most frequent country assigned across its mentions wins (ties by code).
    """
    diagnostics = diagnostics if diagnostics is not None else Diagnostics()
    pubs: list[CodedPublication] = []
    unresolved_counts: Counter = Counter()
    votes: dict[str, Counter] = defaultdict(Counter)
    labels: dict[str, str] = {}

    for rec in records:
        located = locate_sections(rec.sections, cue_table=cues)
        result = extract_sections(located, cues, diagnostics)
        ids: set[str] = set()
        unresolved: set[str] = set()
        for m in result.mentions:
            if m.support is not Support.FINANCIAL:
                continue
            hit = resolve(m.surface, aliases)
            key = funder_key(hit)
            if isinstance(hit, CanonicalFunder):
                ids.add(hit.id)
            elif hit.normal_form:
                unresolved.add(hit.normal_form)
            else:
                continue
            labels.setdefault(key, " ".join(m.surface.split()))
            text = f"{m.surface} ({m.country_hint})" if m.country_hint else m.surface
            votes[key][assign_country(hit, rec, text=text)] += 1
        unresolved_counts.update(unresolved)
        surfaces = tuple(sorted(result.surfaces, key=lambda s: (s.casefold(), s)))
        pubs.append(CodedPublication(rec.id, surfaces, frozenset(ids), tuple(sorted(unresolved)),
                                     classify_cohort(rec, surfaces, located)))

    registry: dict[str, FunderInfo] = {}
    for key in sorted(votes):
        funder = aliases.funders.get(key)
        if funder is not None and funder.country != countries.UNKNOWN:
            country = funder.country
        else:
            country = min(votes[key].items(), key=lambda kv: (-kv[1], kv[0]))[0]
        registry[key] = FunderInfo(
            key,
            funder.canonical_name if funder else labels[key],
            country,
            funder.sector if funder else Sector.UNKNOWN,
        )
    return CodingResult(pubs, registry, unresolved_counts, diagnostics)


def coded_records(records: Sequence[PublicationRecord],
                  coding: CodingResult) -> list[CodedRecord]:
    return [CodedRecord(r.id, p.funder_keys, r.mesh_descriptors)
            for r, p in zip(records, coding.publications)]


def _harmonized_keys(names: Iterable[str], aliases: AliasTable) -> frozenset[str]:
    keys = set()
    for name in names:
        hit = resolve(name, aliases)
        if isinstance(hit, CanonicalFunder) or hit.normal_form:
            keys.add(funder_key(hit))
    return frozenset(keys)


def system_funders(record: PublicationRecord, system: str, aliases: AliasTable,
                   coding: CodedPublication | None = None,
                   diagnostics: Diagnostics | None = None) -> frozenset[str] | None:
    """Harmonised funder set a source reports for ``record``.

    ``None`` means the source does not cover the record at all, which is not
    the same as covering it with no funders.
    """
    if system == "extractor":
        if coding is None:
            raise ValidationError("extractor system needs coded publications")
        return coding.funder_keys
    if system == "wos":
        if record.wos_fu_raw is None:
            return None
        entries = parse_wos_fu(record.wos_fu_raw, diagnostics)
    elif system == "medline":
        if record.medline_grants_raw is None:
            return None
        entries = [parse_medline_grant(g) for g in record.medline_grants_raw if g.strip()]
    else:
        raise ValidationError(f"unknown system {system!r}; expected one of {', '.join(SYSTEMS)}")
    return _harmonized_keys((e.name_raw for e in entries), aliases)


def reference_funders(record: PublicationRecord, aliases: AliasTable) -> frozenset[str] | None:
    """Reference ids; entries that are not table ids are harmonised as names."""
    if record.reference is None:
        return None
    keys = {f for f in record.reference.funders if f in aliases.funders}
    keys |= _harmonized_keys((f for f in record.reference.funders if f not in aliases.funders),
                             aliases)
    return frozenset(keys)


def evaluation_pairs(records: Sequence[PublicationRecord], system: str, aliases: AliasTable,
                     coding: CodingResult | None = None,
                     diagnostics: Diagnostics | None = None
                     ) -> tuple[list[tuple[frozenset, frozenset]], int]:
    """Aligned (system, reference) sets plus the number of excluded records."""
    diagnostics = diagnostics if diagnostics is not None else Diagnostics()
    coded = coding.publications if coding is not None else [None] * len(records)
    pairs, excluded = [], 0
    for rec, pub in zip(records, coded):
        ref = reference_funders(rec, aliases)
        if ref is None:
            excluded += 1
            diagnostics.add("no-reference", f"{rec.id}: no reference annotation")
            continue
        sys_set = system_funders(rec, system, aliases, pub, diagnostics)
        if sys_set is None:
            excluded += 1
            diagnostics.add("not-covered", f"{rec.id}: not covered by {system}")
            continue
        pairs.append((sys_set, ref))
    return pairs, excluded
