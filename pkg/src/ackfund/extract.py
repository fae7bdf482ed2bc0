"""Funder mention extraction from acknowledgement statements.

The extractor is a deterministic rule system:

* a cue table (pattern, polarity, priority) locates wording that declares
  financial support, non-financial help, or the absence of funding;
* organisation names are capitalised token runs, with connectors
  (``of``, ``for``, ``and`` ...), parenthesised acronyms and company suffixes;
* each name takes the polarity of its nearest cue, within 120 characters after
  the cue or 60 characters before it.

Names with no cue are ``ambiguous``; :func:`resolve_support` turns them into
financial support only when they sit in a dedicated funding section.
"""
from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .errors import Diagnostics, ValidationError
from .paratext import ParatextSection, SectionKind, Statement, segment_statements
from . import countries

FORWARD_WINDOW = 120
BACKWARD_WINDOW = 60
GAP_WORDS = 4


class Polarity(str, Enum):
    FINANCIAL = "financial"
    NON_FINANCIAL = "non_financial"
    NEGATION = "negation"


class Support(str, Enum):
    FINANCIAL = "financial"
    NON_FINANCIAL = "non_financial"
    AMBIGUOUS = "ambiguous"


@dataclass(frozen=True)
class CueRule:
    pattern: str
    polarity: Polarity
    priority: int = 0

    def __post_init__(self) -> None:
        if not self.pattern.strip():
            raise ValidationError("cue pattern must be non-empty")
        object.__setattr__(self, "polarity", Polarity(self.polarity))

    @property
    def forward_only(self) -> bool:
        # "funded by X", "gift of X": the funder can only follow the cue.
        last = self.pattern.split()[-1].lower()
        return last in {"by", "from", "of", "to", "with"}


@dataclass(frozen=True)
class CueMatch:
    rule: CueRule
    span: tuple[int, int]
    parts: tuple[tuple[int, int], ...]
    text: str

    @property
    def length(self) -> int:
        return self.span[1] - self.span[0]


@dataclass(frozen=True)
class FunderMention:
    surface: str
    statement_span: tuple[int, int]
    cue: str
    support: Support
    grant_codes: tuple[str, ...] = ()
    negated: bool = False
    section_kind: SectionKind = SectionKind.OTHER
    country_hint: str | None = None


# ---------------------------------------------------------------- cue table

def _compile(pattern: str) -> re.Pattern:
    pieces: list[list[str]] = [[]]
    for word in pattern.lower().split():
        if word == "...":
            pieces.append([])
        else:
            pieces[-1].append(re.escape(word).replace(r"\(s\)", "s?"))
    groups = [r"(" + r"\s+".join(p) + r")" for p in pieces if p]
    gap = r"\s+(?:\S+\s+){0,%d}?" % GAP_WORDS
    return re.compile(r"(?<![\w-])" + gap.join(groups) + r"(?!\w)", re.IGNORECASE)


class CueTable:
    """Ordered, immutable list of cue rules with compiled matchers."""

    def __init__(self, rules: Iterable[CueRule]):
        self.rules = tuple(sorted(rules, key=lambda r: r.priority))
        self._compiled = [(r, _compile(r.pattern), self._anchor(r.pattern)) for r in self.rules]

    @staticmethod
    def _anchor(pattern: str) -> str:
        # Cheap substring prefilter: longest literal word of the pattern.
        words = [w.replace("(s)", "") for w in pattern.lower().split() if w != "..."]
        return max(words, key=len)

    def with_rule(self, rule: CueRule) -> CueTable:
        return CueTable(self.rules + (rule,))

    def raw_matches(self, text: str) -> list[CueMatch]:
        low = text.lower()
        out = []
        for rule, rx, anchor in self._compiled:
            if anchor not in low:
                continue
            for m in rx.finditer(text):
                parts = tuple(m.span(g) for g in range(1, (rx.groups or 0) + 1))
                out.append(CueMatch(rule, m.span(), parts, m.group(0)))
        return out

    def __len__(self) -> int:
        return len(self.rules)

    @classmethod
    def from_tsv(cls, source: str | Path | io.TextIOBase) -> CueTable:
        if isinstance(source, (str, Path)):
            with open(source, encoding="utf-8") as fh:
                return cls._parse(fh.read())
        return cls._parse(source.read())

    @classmethod
    def _parse(cls, content: str) -> CueTable:
        rules = []
        for lineno, row in enumerate(csv.reader(io.StringIO(content), delimiter="\t"), 1):
            if not row or not row[0].strip() or row[0].lstrip().startswith("#"):
                continue
            if len(row) < 2:
                raise ValidationError(f"cue table line {lineno}: expected pattern<TAB>polarity")
            priority = int(row[2]) if len(row) > 2 and row[2].strip() else lineno
            try:
                rules.append(CueRule(row[0].strip(), Polarity(row[1].strip()), priority))
            except ValueError as exc:
                raise ValidationError(f"cue table line {lineno}: {exc}") from exc
        return cls(rules)


@lru_cache(maxsize=1)
def default_cue_table() -> CueTable:
    content = resources.files("ackfund.data").joinpath("cues.tsv").read_text(encoding="utf-8")
    return CueTable._parse(content)


def _overlaps(a: tuple[int, int], b: tuple[int, int]) -> bool:
    return a[0] < b[1] and b[0] < a[1]


def detect_cues(statement: Statement | str, table: CueTable | None = None) -> list[CueMatch]:
    """Cue matches in a statement, ordered by position.

    A financial match is discarded when a strictly longer non-financial or
    negation match overlaps it ("has received funding from" is past support, not
    "funding from"). Non-financial and negation matches are never discarded, so
    adding a non-financial rule can only remove financial evidence.
    """
    table = table or default_cue_table()
    text = statement.text if isinstance(statement, Statement) else statement
    raw = table.raw_matches(text)
    blockers = [m for m in raw if m.rule.polarity is not Polarity.FINANCIAL]
    kept = list(blockers)
    financial = [m for m in raw if m.rule.polarity is Polarity.FINANCIAL]
    financial.sort(key=lambda m: (-m.length, m.rule.priority, m.span[0]))
    chosen: list[CueMatch] = []
    for m in financial:
        if not any(_overlaps(m.span, c.span) for c in chosen):
            chosen.append(m)
    # Overlaps are settled before blocking, so a new blocker can never revive
    # a financial match that had lost to a longer one.
    kept.extend(m for m in chosen
                if not any(_overlaps(m.span, b.span) and b.length > m.length for b in blockers))
    kept.sort(key=lambda m: (m.span[0], -m.length, m.rule.priority))
    return kept


def has_financial_cue(text: str, table: CueTable | None = None) -> bool:
    return any(m.rule.polarity is Polarity.FINANCIAL for m in detect_cues(text, table))


# ------------------------------------------------------------ tokenisation

_TOKEN = re.compile(r"[^\s(),;:\[\]\"“”]+|[(),;:\[\]]")
_INITIALS = re.compile(r"^(?:[A-Z]\.)+$")
_GRANT_CODE = re.compile(
    r"^(?=.*\d)(?:[A-Za-z0-9]+[/\-][A-Za-z0-9/\-]*[A-Za-z0-9]"
    r"|[A-Z]{1,4}\d{2,}[A-Za-z0-9]*"
    r"|\d+[A-Z]+\d+[A-Za-z0-9]*)$"
)
_ROMAN = re.compile(r"^[IVX]+$")
_SHORT_TITLE = re.compile(r"^[A-Z][a-z]{1,2}$")

KEEP_PERIOD = {"inc.", "ltd.", "corp.", "co.", "st.", "jr.", "dr.", "mr.", "ms.", "mrs.",
               "prof.", "s.p.a.", "e.g.", "i.e.", "al.", "u.k.", "u.s.", "u.s.a."}
HONORIFICS = {"dr", "dr.", "mr", "mr.", "ms", "ms.", "mrs", "mrs.", "prof", "prof.",
              "professor", "sir", "dame", "miss"}
CONNECTORS = {"of", "for", "and", "&", "the", "on", "de", "du", "des", "la", "le", "del",
              "della", "der", "für", "zur", "y", "e"}
OF_CONNECTORS = {"of", "for", "de", "du", "des", "del", "della", "der", "für", "zur", "on"}
HEAD_NOUNS = {"project", "programme", "program"}
COMPANY_SUFFIXES = {"inc", "inc.", "ltd", "ltd.", "llc", "gmbh", "spa", "s.p.a.", "plc", "ag",
                    "sa", "corp", "corp.", "co.", "bv", "nv", "ab", "as", "kk"}
SHORT_ACRONYMS = {"EU", "EC"}
# Capitalised words that open a sentence or clause but never an organisation name.
STOPWORDS = {
    "the", "this", "these", "that", "those", "their", "our", "we", "i", "they", "he", "she",
    "it", "its", "his", "her", "in", "at", "on", "for", "from", "by", "with", "and", "all",
    "both", "each", "any", "some", "no", "work", "portions", "part", "funding", "support",
    "financial", "authors", "author", "acknowledgements", "acknowledgments", "additionally",
    "also", "finally", "furthermore", "moreover", "however", "thanks", "many", "a", "an", "as",
    "funded", "supported", "disclosure", "open", "we", "you", "there", "here",
}
# Lone capitalised words that open a sentence but cannot be a funder by themselves.
GENERIC_SINGLE = {"grant", "grants", "funding", "support", "award", "fellowship", "study",
                  "project", "research", "funds"}
RECIPIENT_VERBS = {"funding", "grant", "grants", "award", "awarded", "support", "fellowship",
                   "fellowships", "studentship", "funds"}

# Rough organisational level of a name's head word, used to collapse
# "sub-unit, Parent" appositions to the highest level.
ORG_RANK = {
    "laboratory": 1, "laboratories": 1, "lab": 1, "unit": 1, "group": 1, "team": 1,
    "services": 1, "facility": 1, "core": 1,
    "department": 2, "division": 2, "school": 2, "faculty": 2, "institute": 2,
    "institutes": 2, "centre": 2, "center": 2, "college": 2, "hospital": 2, "clinic": 2,
    "university": 3, "agency": 3, "council": 3, "councils": 3, "foundation": 3,
    "trust": 3, "society": 3, "association": 3, "academy": 3, "board": 3, "fund": 3,
    "charity": 3, "campaign": 3, "organisation": 3, "organization": 3,
    "ministry": 4, "government": 4, "commission": 4,
}


@dataclass
class _Tok:
    text: str
    start: int
    end: int
    kind: str = "word"

    @property
    def low(self) -> str:
        return self.text.lower()


def is_grant_code(token: str) -> bool:
    return len(token) >= 3 and bool(_GRANT_CODE.match(token))


def _is_acronym(tok: _Tok) -> bool:
    core = tok.text.replace("&", "")
    return len(core) >= 2 and core.isalnum() and core.upper() == core and any(c.isalpha() for c in core)


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    for m in _TOKEN.finditer(text):
        word, start, end = m.group(0), m.start(), m.end()
        if len(word) > 1 and word.endswith(".") and word.lower() not in KEEP_PERIOD \
                and not _INITIALS.match(word):
            stripped = word.rstrip(".")
            if stripped:
                toks.append(_Tok(stripped, start, start + len(stripped)))
            toks.append(_Tok(".", start + len(stripped), end, "punct"))
            continue
        toks.append(_Tok(word, start, end))

    for t in toks:
        if t.kind == "punct":
            continue
        if t.text in "(),;:[]":
            t.kind = "punct"
        elif is_grant_code(t.text):
            t.kind = "code"
        elif t.low in CONNECTORS and not t.text[0].isupper():
            t.kind = "conn"
        elif t.text == "&":
            t.kind = "conn"
        elif t.text in HEAD_NOUNS:
            t.kind = "head"
        elif t.text[0].isupper():
            t.kind = "cap"
    # DFG-style codes such as "Gu 1170/1-1" carry a short alphabetic prefix.
    for a, b in zip(toks, toks[1:]):
        if a.kind == "cap" and b.kind == "code" and _SHORT_TITLE.match(a.text):
            a.kind = "code"
    return toks


# ----------------------------------------------------------- name spans

@dataclass
class _Span:
    first: int
    last: int
    country_hint: str | None = None


def _org_rank(toks: Sequence[_Tok]) -> int:
    for t in toks:
        rank = ORG_RANK.get(t.low)
        if rank:
            return rank
    return 0


def _cap_run(toks: list[_Tok], k: int) -> int:
    """Index one past the run of capitalised tokens starting at k."""
    while k < len(toks) and toks[k].kind == "cap":
        k += 1
    return k


def _orgish(run: Sequence[_Tok]) -> bool:
    return any(ORG_RANK.get(t.low, 0) >= 2 or _is_acronym(t) for t in run)


def _enumeration_end(toks: list[_Tok], k: int) -> int | None:
    """For ", A, B and C" starting at comma index k, the index of C's last token."""
    n = len(toks)
    while k < n and toks[k].text == ",":
        stop = _cap_run(toks, k + 1)
        if stop == k + 1 or _orgish(toks[k + 1:stop]):
            return None
        k = stop
        if k < n and toks[k].low == "and":
            stop = _cap_run(toks, k + 1)
            if stop == k + 1 or _orgish(toks[k + 1:stop]):
                return None
            if stop < n and toks[stop].kind in ("conn", "cap"):
                return None
            return stop - 1
    return None


def _build_spans(toks: list[_Tok]) -> list[_Span]:
    spans: list[_Span] = []
    n = len(toks)
    i = 0
    while i < n:
        if toks[i].kind != "cap":
            i += 1
            continue
        last, has_of, hint = i, False, None
        k = i + 1
        while k < n:
            t = toks[k]
            if t.kind == "cap":
                last, k = k, k + 1
                continue
            if t.kind == "conn":
                m = k
                while m < n and toks[m].kind == "conn":
                    m += 1
                if m >= n or toks[m].kind != "cap":
                    break
                words = [toks[x].low for x in range(k, m)]
                if "and" in words:
                    # "Ministry of Health and Welfare" joins; "X of Y and Breast
                    # Cancer Campaign" is two names.
                    after_and = words[words.index("and") + 1:]
                    cont = toks[m:_cap_run(toks, m)]
                    if not has_of or "the" in after_and or len(cont) > 1 or _orgish(cont):
                        break
                if OF_CONNECTORS & set(words):
                    has_of = True
                last, k = m, m + 1
                continue
            if t.text == "(":
                if k + 2 < n and toks[k + 2].text == ")" and _is_acronym(toks[k + 1]):
                    code = countries.lookup(toks[k + 1].text)
                    if code:
                        hint = toks[k + 1].text
                        k += 3
                        break
                    last, k = k + 2, k + 3
                    continue
                break
            if t.text == "," and k + 1 < n:
                nxt = toks[k + 1]
                if nxt.low in COMPANY_SUFFIXES:
                    last, k = k + 1, k + 2
                    break
                if has_of:
                    end = _enumeration_end(toks, k)
                    if end is not None:
                        last, k = end, end + 1
                        continue
                break
            if t.kind == "head":
                last, k = k, k + 1
                # "FW6 EU project MolDiag-Paca": the trailing label names the project.
                k = _cap_run(toks, k)
                break
            break
        spans.append(_Span(i, last, hint))
        i = max(k, last + 1)
    return spans


def _strip_leading(toks: list[_Tok], span: _Span) -> _Span | None:
    first = span.first
    while first <= span.last and (toks[first].low in STOPWORDS or toks[first].kind == "conn"):
        first += 1
    if first > span.last:
        return None
    return _Span(first, span.last, span.country_hint)


def _is_person_or_noise(toks: list[_Tok], span: _Span) -> bool:
    head = toks[span.first]
    words = [t for t in toks[span.first:span.last + 1] if t.kind == "cap"]
    if head.low in HONORIFICS or _INITIALS.match(head.text):
        return True
    if span.first == span.last:
        text = head.text
        if _ROMAN.match(text) or countries.lookup(text):
            return True
        if len(text) <= 2 and text not in SHORT_ACRONYMS:
            return True
        if head.low in GENERIC_SINGLE:
            return True
    if words and all(countries.lookup(t.text) for t in words):
        return True
    return False


def _is_recipient(toks: list[_Tok], span: _Span) -> bool:
    k = span.first - 1
    while k >= 0 and toks[k].low == "the":
        k -= 1
    if k < 0:
        return False
    if toks[k].low == "at":
        return True
    if toks[k].low == "to" and k > 0 and toks[k - 1].low in RECIPIENT_VERBS:
        return True
    return False


def _collapse_appositions(toks: list[_Tok], spans: list[_Span]) -> list[_Span]:
    """Reduce "sub-unit, Parent" chains to the highest-level organisation."""
    out: list[_Span] = []
    i = 0
    while i < len(spans):
        chain = [spans[i]]
        while i + 1 < len(spans):
            prev, nxt = chain[-1], spans[i + 1]
            between = toks[prev.last + 1:nxt.first]
            if len(between) == 1 and between[0].text == "," and prev.country_hint is None:
                chain.append(nxt)
                i += 1
            else:
                break
        i += 1
        ranks = [_org_rank(toks[s.first:s.last + 1]) for s in chain]
        if len(chain) > 1 and all(ranks) and ranks == sorted(ranks) and ranks[-1] > ranks[0]:
            out.append(chain[-1])
        else:
            out.extend(chain)
    return out


def find_names(text: str, cue_parts: Sequence[tuple[int, int]] = ()) -> list[tuple[int, int, str | None]]:
    """Organisation-name candidates in a statement: (start, end, country_hint)."""
    toks = _tokenize(text)
    spans = []
    for raw in _build_spans(toks):
        span = _strip_leading(toks, raw)
        if span is None or _is_person_or_noise(toks, span):
            continue
        spans.append(span)
    spans = _collapse_appositions(toks, spans)
    out = []
    for span in spans:
        start, end = toks[span.first].start, toks[span.last].end
        if any(_overlaps((start, end), p) for p in cue_parts):
            continue
        if _is_recipient(toks, span):
            continue
        out.append((start, end, span.country_hint))
    return out


def find_grant_codes(text: str) -> list[tuple[int, int]]:
    toks = _tokenize(text)
    runs: list[tuple[int, int]] = []
    prev_end = None
    for t in toks:
        if t.kind == "code":
            if prev_end is not None and text[prev_end:t.start].isspace() and runs:
                runs[-1] = (runs[-1][0], t.end)
            else:
                runs.append((t.start, t.end))
            prev_end = t.end
        else:
            prev_end = None
    return runs


# ------------------------------------------------------------- mentions

def _nearest_cue(start: int, end: int, cues: Sequence[CueMatch]) -> CueMatch | None:
    best_key, best = None, None
    for c in cues:
        if c.rule.polarity is Polarity.NEGATION:
            continue
        if c.span[0] <= start and end <= c.span[1]:
            dist, direction = 0, 0
        elif c.span[1] <= start and start - c.span[1] <= FORWARD_WINDOW:
            dist, direction = start - c.span[1], 0
        elif (c.span[0] >= end and c.span[0] - end <= BACKWARD_WINDOW
              and not c.rule.forward_only):
            dist, direction = c.span[0] - end, 1
        else:
            continue
        # Ties go to the non-financial reading.
        key = (dist, direction, c.rule.polarity is Polarity.FINANCIAL, c.rule.priority)
        if best_key is None or key < best_key:
            best_key, best = key, c
    return best


def extract_mentions(
    statements: Sequence[Statement],
    cues: Sequence[Sequence[CueMatch]] | None = None,
    table: CueTable | None = None,
    diagnostics: Diagnostics | None = None,
) -> list[FunderMention]:
    table = table or default_cue_table()
    if cues is None:
        cues = [detect_cues(s, table) for s in statements]
    mentions: list[FunderMention] = []
    for stmt, stmt_cues in zip(statements, cues):
        text = stmt.text
        raw = table.raw_matches(text)
        negated = any(m.rule.polarity is Polarity.NEGATION for m in raw)
        literal_parts = [p for m in raw for p in m.parts]
        names = find_names(text, literal_parts)
        if not names:
            if diagnostics is not None and any(
                    c.rule.polarity is Polarity.FINANCIAL for c in stmt_cues):
                diagnostics.add("cue-without-name", f"no funder name near cue in: {text[:80]!r}")
            continue

        offset = stmt.char_span[0]
        local = []
        for start, end, hint in names:
            cue = _nearest_cue(start, end, stmt_cues)
            if cue is None:
                support, cue_text = Support.AMBIGUOUS, ""
            elif cue.rule.polarity is Polarity.FINANCIAL:
                support, cue_text = Support.FINANCIAL, cue.text
            else:
                support, cue_text = Support.NON_FINANCIAL, cue.text
            local.append([start, end, hint, support, cue_text, []])

        for cstart, cend in find_grant_codes(text):
            before = [m for m in local if m[1] <= cstart]
            target = before[-1] if before else next((m for m in local if m[0] >= cend), None)
            if target is not None:
                target[5].append(text[cstart:cend])

        for start, end, hint, support, cue_text, codes in local:
            mentions.append(FunderMention(
                surface=text[start:end],
                statement_span=(offset + start, offset + end),
                cue=cue_text,
                support=support,
                grant_codes=tuple(codes),
                negated=negated,
                section_kind=stmt.section_kind,
                country_hint=hint,
            ))
    return mentions


def resolve_support(mentions: Iterable[FunderMention]) -> list[FunderMention]:
    out = []
    for m in mentions:
        if m.negated:
            continue
        if m.support is Support.AMBIGUOUS:
            support = (Support.FINANCIAL if m.section_kind is SectionKind.FUNDING
                       else Support.NON_FINANCIAL)
            m = replace(m, support=support)
        out.append(m)
    return out


def _surface_key(surface: str) -> str:
    return " ".join(surface.split()).casefold()


def dedupe(mentions: Iterable[FunderMention]) -> set[str]:
    """Distinct financial surface forms; first spelling wins for each key."""
    seen: dict[str, str] = {}
    for m in mentions:
        if m.support is Support.FINANCIAL:
            seen.setdefault(_surface_key(m.surface), " ".join(m.surface.split()))
    return set(seen.values())


@dataclass
class Extraction:
    surfaces: set[str]
    mentions: list[FunderMention] = field(default_factory=list)
    sections: list[ParatextSection] = field(default_factory=list)


def extract_sections(
    sections: Sequence[ParatextSection],
    table: CueTable | None = None,
    diagnostics: Diagnostics | None = None,
) -> Extraction:
    """Full extraction over sections already returned by ``locate_sections``."""
    table = table or default_cue_table()
    mentions: list[FunderMention] = []
    for sec in sections:
        stmts = segment_statements(sec)
        mentions.extend(extract_mentions(stmts, None, table, diagnostics))
    resolved = resolve_support(mentions)
    return Extraction(dedupe(resolved), resolved, list(sections))
