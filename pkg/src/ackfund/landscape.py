"""Funding-landscape analytics over harmonised per-publication funder sets."""
from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from itertools import combinations
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .corpus import MeshAssignment
from .errors import NotFoundError, UsageError, ValidationError

DEFAULT_MAJOR_THRESHOLD = 0.02
DEFAULT_MIN_PUBS = 2


@dataclass(frozen=True)
class CodedRecord:
    """A publication reduced to what the analytics need."""

    id: str
    funders: frozenset[str]
    mesh_descriptors: tuple[MeshAssignment, ...] = ()


# ----------------------------------------------------------------- tallies

@dataclass(frozen=True)
class FunderTally:
    funder_id: str
    pub_count: int
    n_funded: int

    @property
    def share_of_funded(self) -> float:
        return self.pub_count / self.n_funded


def tally_funders(funder_sets: Iterable[Iterable[str]]) -> list[FunderTally]:
    """Publications per funder, most acknowledged first (ties by id)."""
    counts: Counter = Counter()
    n_funded = 0
    for s in funder_sets:
        s = set(s)
        if s:
            n_funded += 1
            counts.update(s)
    return [FunderTally(fid, n, n_funded)
            for fid, n in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))]


def single_publication_share(tallies: Sequence[FunderTally]) -> float:
    """Fraction of funders acknowledged in exactly one publication."""
    if not tallies:
        return 0.0
    return sum(t.pub_count == 1 for t in tallies) / len(tallies)


def top_by_sector(tallies: Iterable[FunderTally], sector_of: Callable[[str], str],
                  n: int = 10) -> dict[str, list[FunderTally]]:
    """The ``n`` most acknowledged funders of each sector, keeping tally order."""
    out: dict[str, list[FunderTally]] = {}
    for t in tallies:
        bucket = out.setdefault(sector_of(t.funder_id), [])
        if len(bucket) < n:
            bucket.append(t)
    return dict(sorted(out.items()))


def split_major_minor(tallies: Iterable[FunderTally],
                      threshold: float = DEFAULT_MAJOR_THRESHOLD) -> tuple[set[str], set[str]]:
    """Major funders reach ``threshold`` of funded publications ("at least")."""
    if not 0.0 <= threshold <= 1.0:
        raise ValidationError(f"threshold {threshold!r} outside [0, 1]")
    # Exact rational comparison so that e.g. 7/350 sits on the 0.02 boundary.
    cut = Fraction(repr(float(threshold)))
    major, minor = set(), set()
    for t in tallies:
        (major if Fraction(t.pub_count, t.n_funded) >= cut else minor).add(t.funder_id)
    return major, minor


@dataclass(frozen=True)
class Coverage:
    funded: int
    any_major: int
    any_minor: int
    major_and_minor: int


def major_minor_coverage(funder_sets: Iterable[Iterable[str]], major: set[str],
                         minor: set[str]) -> Coverage:
    funded = any_major = any_minor = both = 0
    for s in funder_sets:
        s = set(s)
        if not s:
            continue
        funded += 1
        has_major, has_minor = bool(s & major), bool(s & minor)
        any_major += has_major
        any_minor += has_minor
        both += has_major and has_minor
    return Coverage(funded, any_major, any_minor, both)


# ----------------------------------------------------------------- co-funding

@dataclass(frozen=True)
class CoFundingMatrix:
    funder_ids: tuple[str, ...]
    counts: np.ndarray
    pub_counts: Mapping[str, int] = field(default_factory=dict)

    def cell(self, a: str, b: str) -> int:
        i, j = self.funder_ids.index(a), self.funder_ids.index(b)
        return int(self.counts[i, j])

    def __len__(self) -> int:
        return len(self.funder_ids)


def cofunding_matrix(funder_sets: Iterable[Iterable[str]],
                     scope: Callable[[str], bool] | None = None,
                     min_pubs: int = DEFAULT_MIN_PUBS,
                     top_n: int | None = None) -> CoFundingMatrix:
    """Joint-acknowledgement counts between in-scope funders.

    Funders are kept when ``scope`` accepts them and they appear in at least
    ``min_pubs`` publications; ``top_n`` keeps only the most acknowledged.
    Rows are ordered by publication count (descending) then id. The diagonal
    is zero.
    """
    sets = [frozenset(s) for s in funder_sets]
    pub_counts: Counter = Counter()
    for s in sets:
        pub_counts.update(s)
    keep = [f for f, n in pub_counts.items() if n >= min_pubs and (scope is None or scope(f))]
    keep.sort(key=lambda f: (-pub_counts[f], f))
    if top_n is not None:
        keep = keep[:top_n]
    index = {f: i for i, f in enumerate(keep)}
    counts = np.zeros((len(keep), len(keep)), dtype=np.int64)
    for s in sets:
        members = sorted(index[f] for f in s if f in index)
        for i, j in combinations(members, 2):
            counts[i, j] += 1
            counts[j, i] += 1
    return CoFundingMatrix(tuple(keep), counts, {f: pub_counts[f] for f in keep})


def matrix_to_tsv(matrix: CoFundingMatrix, labels: Mapping[str, str] | None = None) -> str:
    labels = labels or {}
    out = io.StringIO()
    ids = matrix.funder_ids
    out.write("funder\tpub_count\t" + "\t".join(ids) + "\n")
    for i, fid in enumerate(ids):
        row = [labels.get(fid, fid), str(matrix.pub_counts.get(fid, 0))]
        row += [str(int(v)) for v in matrix.counts[i]]
        out.write("\t".join(row) + "\n")
    return out.getvalue()


def _dot_quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", " ") + '"'


def export_graph(matrix: CoFundingMatrix, format: str = "dot",
                 funders: Mapping | None = None) -> str:
    """Serialise a co-funding matrix as an undirected DOT or GraphML graph.

    Nodes and edges are emitted in id order so identical inputs give identical
    bytes. ``funders`` maps ids to objects with ``canonical_name`` and ``sector``.
    """
    funders = funders or {}
    ids = sorted(matrix.funder_ids)
    pos = {f: i for i, f in enumerate(matrix.funder_ids)}

    def attrs(fid: str) -> tuple[str, int, str]:
        f = funders.get(fid)
        label = getattr(f, "canonical_name", fid) if f is not None else fid
        sector = getattr(getattr(f, "sector", None), "value", "unknown") if f is not None else "unknown"
        return label, int(matrix.pub_counts.get(fid, 0)), sector

    edges = []
    for a, b in combinations(ids, 2):
        w = int(matrix.counts[pos[a], pos[b]])
        if w > 0:
            edges.append((a, b, w))

    if format == "dot":
        lines = ["graph cofunding {"]
        for fid in ids:
            label, n, sector = attrs(fid)
            lines.append(f"  {_dot_quote(fid)} [label={_dot_quote(label)}, pub_count={n}, "
                         f"sector={_dot_quote(sector)}];")
        for a, b, w in edges:
            lines.append(f"  {_dot_quote(a)} -- {_dot_quote(b)} [weight={w}];")
        lines.append("}")
        return "\n".join(lines) + "\n"
    if format == "graphml":
        lines = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            '<graphml xmlns="http://graphml.graphdrawing.org/xmlns">',
            '  <key id="label" for="node" attr.name="label" attr.type="string"/>',
            '  <key id="pub_count" for="node" attr.name="pub_count" attr.type="int"/>',
            '  <key id="sector" for="node" attr.name="sector" attr.type="string"/>',
            '  <key id="weight" for="edge" attr.name="weight" attr.type="int"/>',
            '  <graph id="cofunding" edgedefault="undirected">',
        ]
        for fid in ids:
            label, n, sector = attrs(fid)
            lines += [
                f"    <node id={quoteattr(fid)}>",
                f'      <data key="label">{escape(label)}</data>',
                f'      <data key="pub_count">{n}</data>',
                f'      <data key="sector">{escape(sector)}</data>',
                "    </node>",
            ]
        for a, b, w in edges:
            lines += [
                f"    <edge source={quoteattr(a)} target={quoteattr(b)}>",
                f'      <data key="weight">{w}</data>',
                "    </edge>",
            ]
        lines += ["  </graph>", "</graphml>"]
        return "\n".join(lines) + "\n"
    raise UsageError(f"unknown graph format {format!r} (expected 'dot' or 'graphml')")


# ----------------------------------------------------------------- MeSH areas

def _tree_key(tree_number: str) -> tuple[str, ...]:
    # "C04.588.033" and "C04.588.33" denote the same node.
    head, *rest = tree_number.strip().split(".")
    letter, digits = head[:1], head[1:]
    key = [letter + (str(int(digits)) if digits.isdigit() else digits)]
    key += [str(int(seg)) if seg.isdigit() else seg for seg in rest]
    return tuple(key)


@dataclass(frozen=True)
class MeshArea:
    label: str
    descriptor: str
    tree_number: str


@dataclass
class MeshTree:
    nodes: dict[str, str]
    areas: list[MeshArea]

    def __post_init__(self) -> None:
        seen = set()
        for a in self.areas:
            key = _tree_key(a.tree_number)
            if key in seen:
                raise ValidationError(f"duplicate area prefix {a.tree_number}")
            seen.add(key)
            if a.tree_number not in self.nodes:
                raise ValidationError(f"area prefix {a.tree_number} missing from tree nodes")
        self._areas_by_key = {_tree_key(a.tree_number): a.label for a in self.areas}
        self._ancestors = {key[:k] for key in self._areas_by_key for k in range(1, len(key))}

    @property
    def labels(self) -> list[str]:
        return [a.label for a in self.areas]

    def area_for(self, tree_number: str) -> str | None:
        key = _tree_key(tree_number)
        for k in range(len(key), 0, -1):
            label = self._areas_by_key.get(key[:k])
            if label is not None:
                return label
        return None

    def is_above_area_level(self, tree_number: str) -> bool:
        return _tree_key(tree_number) in self._ancestors

    @classmethod
    def from_rows(cls, rows: Iterable[Sequence[str]]) -> MeshTree:
        nodes: dict[str, str] = {}
        areas: list[MeshArea] = []
        for lineno, row in enumerate(rows, 1):
            if not row or row[0].startswith("#"):
                continue
            if [c.strip().lower() for c in row[:3]] == ["label", "abbreviation", "tree_number"]:
                continue
            if len(row) < 3:
                raise ValidationError(f"area table row {lineno}: expected 3 columns")
            label, abbrev, tn = (c.strip() for c in row[:3])
            nodes[tn] = label
            if abbrev and abbrev != "-":
                areas.append(MeshArea(abbrev, label, tn))
        return cls(nodes, areas)

    @classmethod
    def from_tsv(cls, path: str | Path) -> MeshTree:
        with open(path, encoding="utf-8", newline="") as fh:
            return cls.from_rows(csv.reader(fh, delimiter="\t"))


def default_mesh_tree() -> MeshTree:
    text = resources.files("ackfund.data").joinpath("mesh_areas.tsv").read_text(encoding="utf-8")
    return MeshTree.from_rows(csv.reader(io.StringIO(text), delimiter="\t"))


def roll_up(assignments: Iterable[MeshAssignment], tree: MeshTree) -> frozenset[str]:
    """Area labels carried by a publication (each area at most once)."""
    labels = set()
    for a in assignments:
        for tn in a.tree_numbers:
            label = tree.area_for(tn)
            if label is not None:
                labels.add(label)
    return frozenset(labels)


@dataclass(frozen=True)
class AreaSummary:
    counts: dict[str, int]
    classified: int
    unclassified_at_level: int
    outside_tree: int


def summarize_areas(records: Iterable[CodedRecord], tree: MeshTree) -> AreaSummary:
    """Publications per area, plus those stuck above the area level.

    A publication whose tree numbers are all ancestors of the area prefixes
    (e.g. only "C04") has no area and counts as ``unclassified_at_level``.
    Publications with no area and no such ancestor fall ``outside_tree``.
    """
    counts = {label: 0 for label in tree.labels}
    classified = unclassified = outside = 0
    for rec in records:
        areas = roll_up(rec.mesh_descriptors, tree)
        for label in areas:
            counts[label] += 1
        if areas:
            classified += 1
        elif any(tree.is_above_area_level(tn) for m in rec.mesh_descriptors
                 for tn in m.tree_numbers):
            unclassified += 1
        else:
            outside += 1
    return AreaSummary(counts, classified, unclassified, outside)


@dataclass(frozen=True)
class PortfolioProfile:
    funder_id: str
    n_publications: int
    shares: dict[str, float]


def portfolio_profile(funder_id: str, records: Iterable[CodedRecord],
                      tree: MeshTree) -> PortfolioProfile:
    """Share of a funder's publications that fall in each area."""
    hits = Counter()
    n = 0
    for rec in records:
        if funder_id not in rec.funders:
            continue
        n += 1
        hits.update(roll_up(rec.mesh_descriptors, tree))
    if n == 0:
        raise NotFoundError(f"funder {funder_id!r} is not acknowledged in any publication")
    return PortfolioProfile(funder_id, n, {label: hits[label] / n for label in tree.labels})


def profiles_to_tsv(profiles: Sequence[PortfolioProfile], tree: MeshTree) -> str:
    out = io.StringIO()
    out.write("funder\tn_publications\t" + "\t".join(tree.labels) + "\n")
    for p in profiles:
        out.write(f"{p.funder_id}\t{p.n_publications}\t"
                  + "\t".join(f"{p.shares[label]:.4f}" for label in tree.labels) + "\n")
    return out.getvalue()
