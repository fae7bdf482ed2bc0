"""Command-line entry point: ``ackfund {extract,evaluate,landscape,profile}``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from . import countries
from .corpus import PublicationRecord, load_corpus
from .errors import (Diagnostics, NotFoundError, UndefinedMetricError, UsageError,
                     ValidationError, logger)
from .evaluate import evaluate_pairs
from .extract import CueTable, default_cue_table
from .harmonize import AliasTable, resolve
from .landscape import (DEFAULT_MAJOR_THRESHOLD, DEFAULT_MIN_PUBS, MeshTree, cofunding_matrix,
                        default_mesh_tree, export_graph, major_minor_coverage, matrix_to_tsv,
                        portfolio_profile, profiles_to_tsv, single_publication_share,
                        split_major_minor, summarize_areas, tally_funders, top_by_sector)
from .pipeline import (SYSTEMS, CodingResult, code_corpus, coded_records, evaluation_pairs,
                       funder_key)

EXIT_OK, EXIT_VALIDATION, EXIT_IO = 0, 1, 2
GRAPH_FORMATS = ("dot", "graphml")


@dataclass(frozen=True)
class RunConfig:
    corpus_path: Path
    alias_table_path: Path
    output_dir: Path
    cue_table_path: Path | None = None
    mesh_area_path: Path | None = None
    threshold_major: float = DEFAULT_MAJOR_THRESHOLD
    min_pubs_network: int = DEFAULT_MIN_PUBS

    def validate(self) -> None:
        for label, path in (("corpus", self.corpus_path), ("alias table", self.alias_table_path),
                            ("cue table", self.cue_table_path),
                            ("area table", self.mesh_area_path)):
            if path is not None and not path.is_file():
                raise ValidationError(f"{label} not found: {path}")
        if not 0.0 <= self.threshold_major <= 1.0:
            raise ValidationError(f"--threshold-major {self.threshold_major} outside [0, 1]")
        if self.min_pubs_network < 1:
            raise ValidationError("--min-pubs must be at least 1")


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _tsv(header: Sequence[str], rows: Sequence[Sequence[object]]) -> str:
    lines = ["\t".join(header)]
    lines += ["\t".join(str(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------- loading

@dataclass
class Loaded:
    config: RunConfig
    records: list[PublicationRecord]
    aliases: AliasTable
    cues: CueTable
    diagnostics: Diagnostics
    _coding: CodingResult | None = None

    @property
    def coding(self) -> CodingResult:
        if self._coding is None:
            self._coding = code_corpus(self.records, self.aliases, self.cues, self.diagnostics)
        return self._coding

    def tree(self) -> MeshTree:
        if self.config.mesh_area_path is None:
            return default_mesh_tree()
        return MeshTree.from_tsv(self.config.mesh_area_path)


def load(config: RunConfig) -> Loaded:
    config.validate()
    diagnostics = Diagnostics()
    aliases = AliasTable.from_tsv(config.alias_table_path)
    cues = CueTable.from_tsv(config.cue_table_path) if config.cue_table_path else default_cue_table()
    records = load_corpus(config.corpus_path, diagnostics)
    logger.info("loaded %d records, %d aliases", len(records), len(aliases))
    return Loaded(config, records, aliases, cues, diagnostics)


def _diagnostics_tsv(diagnostics: Diagnostics) -> str:
    counts = diagnostics.counts()
    return _tsv(("code", "count"), sorted(counts.items()))


# ----------------------------------------------------------------- commands

def cmd_extract(config: RunConfig) -> list[Path]:
    run = load(config)
    coding = run.coding
    out = config.output_dir
    rows = [(p.id, p.cohort.value, ";".join(sorted(p.funder_ids)), ";".join(p.unresolved),
             " | ".join(p.surfaces)) for p in coding.publications]
    cohort_counts = coding.cohort_counts()
    n = len(coding.publications)
    cohort_rows = [(c.value, k, f"{k / n:.4f}" if n else "0.0000") for c, k in cohort_counts.items()]
    unresolved_rows = sorted(coding.unresolved_counts.items(), key=lambda kv: (-kv[1], kv[0]))
    files = {
        "funders.tsv": _tsv(("id", "cohort", "funder_ids", "unresolved", "surfaces"), rows),
        "cohorts.tsv": _tsv(("cohort", "count", "share"), cohort_rows),
        "unresolved.tsv": _tsv(("normal_form", "occurrence_count"), unresolved_rows),
        "diagnostics.tsv": _diagnostics_tsv(run.diagnostics),
    }
    return _write_all(out, files)


def cmd_evaluate(config: RunConfig, system: str) -> list[Path]:
    if system not in SYSTEMS:
        raise UsageError(f"unknown system {system!r}")
    run = load(config)
    coding = run.coding if system == "extractor" else None
    pairs, excluded = evaluation_pairs(run.records, system, run.aliases, coding, run.diagnostics)
    if excluded:
        logger.warning("%d records excluded from evaluation", excluded)
    report = evaluate_pairs(pairs, system=system, excluded=excluded)
    files = {
        f"evaluation_{system}.tsv": report.to_tsv(),
        f"evaluation_{system}.json": report.to_json(),
        f"diagnostics_{system}.tsv": _diagnostics_tsv(run.diagnostics),
    }
    return _write_all(config.output_dir, files)


def cmd_landscape(config: RunConfig, scope_country: str | None = None,
                  graph_format: str = "dot", top_n: int | None = None) -> list[Path]:
    if graph_format not in GRAPH_FORMATS:
        raise UsageError(f"unknown graph format {graph_format!r}")
    if scope_country is not None:
        code = countries.lookup(scope_country)
        if code is None:
            raise ValidationError(f"unknown country {scope_country!r}")
        scope_country = code
    run = load(config)
    coding = run.coding
    registry = coding.registry
    sets = [p.funder_keys for p in coding.publications]

    tallies = tally_funders(sets)
    major, minor = split_major_minor(tallies, config.threshold_major)
    coverage = major_minor_coverage(sets, major, minor)

    info = registry.__getitem__

    tally_rows = [(t.funder_id, info(t.funder_id).label, info(t.funder_id).country,
                   info(t.funder_id).sector.value, t.pub_count, f"{t.share_of_funded:.4f}",
                   "major" if t.funder_id in major else "minor") for t in tallies]
    summary_rows = [
        ("funded_publications", coverage.funded),
        ("distinct_funders", len(tallies)),
        ("single_publication_funder_share", f"{single_publication_share(tallies):.4f}"),
        ("threshold_major", f"{config.threshold_major:g}"),
        ("major_funders", len(major)),
        ("minor_funders", len(minor)),
        ("pubs_with_major", coverage.any_major),
        ("pubs_with_minor", coverage.any_minor),
        ("pubs_with_major_and_minor", coverage.major_and_minor),
    ]

    sector_rows = [(sector, rank, t.funder_id, info(t.funder_id).label, t.pub_count,
                    f"{t.share_of_funded:.4f}")
                   for sector, top in top_by_sector(tallies, lambda k: info(k).sector.value).items()
                   for rank, t in enumerate(top, 1)]

    scope = None
    if scope_country is not None:
        scope = lambda key: info(key).country == scope_country  # noqa: E731
    matrix = cofunding_matrix(sets, scope=scope, min_pubs=config.min_pubs_network, top_n=top_n)
    labels = {k: info(k).label for k in matrix.funder_ids}
    graph_funders = {k: _GraphNode(info(k).label, info(k).sector) for k in matrix.funder_ids}

    tree = run.tree()
    records = coded_records(run.records, coding)
    areas = summarize_areas(records, tree)
    area_rows = [(a.descriptor, a.label, a.tree_number, areas.counts[a.label]) for a in tree.areas]
    area_rows += [("(unclassified at area level)", "-", "-", areas.unclassified_at_level),
                  ("(outside area tree)", "-", "-", areas.outside_tree)]
    profiled = [t.funder_id for t in tallies if t.funder_id in major
                and (scope is None or scope(t.funder_id))]
    profiles = [portfolio_profile(f, records, tree) for f in profiled]

    files = {
        "tallies.tsv": _tsv(("funder_id", "label", "country", "sector", "pub_count",
                             "share_of_funded", "class"), tally_rows),
        "sectors.tsv": _tsv(("sector", "rank", "funder_id", "label", "pub_count",
                             "share_of_funded"), sector_rows),
        "summary.tsv": _tsv(("indicator", "value"), summary_rows),
        "cofunding.tsv": matrix_to_tsv(matrix, labels),
        f"cofunding.{graph_format}": export_graph(matrix, graph_format, graph_funders),
        "areas.tsv": _tsv(("area", "abbreviation", "tree_number", "publications"), area_rows),
        "profiles.tsv": profiles_to_tsv(profiles, tree),
    }
    return _write_all(config.output_dir, files)


@dataclass(frozen=True)
class _GraphNode:
    canonical_name: str
    sector: object


def cmd_profile(config: RunConfig, funder: str) -> list[Path]:
    run = load(config)
    records = coded_records(run.records, run.coding)
    key = funder
    if key not in run.aliases.funders and key not in run.coding.registry:
        key = funder_key(resolve(funder, run.aliases))
    tree = run.tree()
    profile = portfolio_profile(key, records, tree)
    safe = "".join(c if c.isalnum() or c in "-_" else "_" for c in key)
    return _write_all(config.output_dir, {f"profile_{safe}.tsv": profiles_to_tsv([profile], tree)})


def _write_all(out: Path, files: dict[str, str]) -> list[Path]:
    paths = []
    for name in sorted(files):
        path = out / name
        write_atomic(path, files[name])
        paths.append(path)
    return paths


# ----------------------------------------------------------------- argparse

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--corpus", type=Path, help="corpus JSON Lines file")
    common.add_argument("--aliases", type=Path, help="funder alias table (TSV)")
    common.add_argument("--cues", type=Path, help="cue table (TSV); built-in table if omitted")
    common.add_argument("--areas", type=Path, help="MeSH area table (TSV); built-in if omitted")
    common.add_argument("--out", type=Path, default=Path("ackfund-out"),
                        help="output directory (ACKFUND_OUT overrides)")
    common.add_argument("--threshold-major", type=float, default=DEFAULT_MAJOR_THRESHOLD,
                        help="share of funded publications that makes a funder major")
    common.add_argument("--min-pubs", type=int, default=DEFAULT_MIN_PUBS,
                        help="fewest publications for a co-funding network node")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(prog="ackfund",
                                     description="Funding acknowledgement extraction and analytics.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("extract", parents=[common], help="per-publication funder sets and cohorts")
    ev = sub.add_parser("evaluate", parents=[common], help="recall/precision against reference")
    ev.add_argument("--system", choices=SYSTEMS, default="extractor",
                    help="source to score against the reference sets")
    ls = sub.add_parser("landscape", parents=[common], help="tallies, co-funding, areas")
    ls.add_argument("--scope-country", help="restrict the co-funding network to one country")
    ls.add_argument("--format", choices=GRAPH_FORMATS, default="dot", help="graph export format")
    ls.add_argument("--top", type=int, default=None, help="keep only the N most acknowledged")
    pr = sub.add_parser("profile", parents=[common], help="area profile of one funder")
    pr.add_argument("--funder", required=True, help="funder id or name")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    if args.corpus is None:
        raise ValidationError("--corpus is required")
    if args.aliases is None:
        raise ValidationError("--aliases is required")
    env_out = os.environ.get("ACKFUND_OUT")
    return RunConfig(
        corpus_path=args.corpus,
        alias_table_path=args.aliases,
        output_dir=Path(env_out) if env_out else args.out,
        cue_table_path=args.cues,
        mesh_area_path=args.areas,
        threshold_major=args.threshold_major,
        min_pubs_network=args.min_pubs,
    )


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage; here 2 is reserved for I/O failures.
        return EXIT_OK if exc.code in (0, None) else EXIT_VALIDATION
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = config_from_args(args)
        if args.command == "extract":
            paths = cmd_extract(config)
        elif args.command == "evaluate":
            paths = cmd_evaluate(config, args.system)
        elif args.command == "landscape":
            paths = cmd_landscape(config, args.scope_country, args.format, args.top)
        else:
            paths = cmd_profile(config, args.funder)
    except (ValidationError, UndefinedMetricError, NotFoundError, UsageError) as exc:
        logger.error("%s", exc)
        return EXIT_VALIDATION
    except (OSError, UnicodeDecodeError) as exc:
        logger.error("I/O error: %s", exc)
        return EXIT_IO
    for p in paths:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
