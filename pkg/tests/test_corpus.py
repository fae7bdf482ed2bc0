import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ackfund.corpus import (Cohort, DocType, ExternalFunderEntry, MeshAssignment,
                            PublicationRecord, ReferenceAnnotation, classify_cohort,
                            dump_corpus, join_by_id, load_corpus, parse_corpus_lines,
                            parse_medline_grant, parse_wos_fu, record_from_dict, serialize_fu,
                            serialize_record)
from ackfund.errors import Diagnostics, ValidationError
from ackfund.paratext import ParatextSection


def rec(id_, **kw):
    kw.setdefault("pub_year", 2011)
    return PublicationRecord(id=id_, **kw)


# ------------------------------------------------------------ validation

class TestRecordValidation:
    def test_empty_id_rejected(self):
        with pytest.raises(ValidationError):
            rec(" ")

    @pytest.mark.parametrize("year", [1799, 2101, True, "2011"])
    def test_bad_year(self, year):
        with pytest.raises(ValidationError):
            PublicationRecord(id="1", pub_year=year)

    @pytest.mark.parametrize("code", ["gb", "GBR", "G1", ""])
    def test_bad_author_country(self, code):
        with pytest.raises(ValidationError):
            rec("1", author_countries=(code,))

    def test_tree_number_pattern(self):
        MeshAssignment("Breast Neoplasms", ("C04.588.180",))
        with pytest.raises(ValidationError):
            MeshAssignment("x", ("C04..588",))
        with pytest.raises(ValidationError):
            MeshAssignment("x", ())

    def test_reference_without_ack_cannot_list_funders(self):
        ReferenceAnnotation(frozenset(), False)
        with pytest.raises(ValidationError):
            ReferenceAnnotation(frozenset({"cruk"}), False)

    def test_external_entry_needs_name(self):
        with pytest.raises(ValidationError):
            ExternalFunderEntry("  ")

    def test_unknown_doc_type_maps_to_other(self):
        diag = Diagnostics()
        r = record_from_dict({"id": "1", "pub_year": 2011, "doc_type": "poster"}, diag)
        assert r.doc_type is DocType.OTHER
        assert diag.counts()["unknown-doc-type"] == 1


# ------------------------------------------------------------ loading

class TestLoadCorpus:
    def test_empty_file(self, tmp_path):
        p = tmp_path / "c.jsonl"
        p.write_text("")
        assert load_corpus(p) == []

    def test_three_lines_in_order(self, tmp_path):
        p = tmp_path / "c.jsonl"
        p.write_text("".join(json.dumps({"id": i, "pub_year": 2010}) + "\n" for i in "bca"))
        assert [r.id for r in load_corpus(p)] == ["b", "c", "a"]

    def test_malformed_line_skipped_with_diagnostic(self, tmp_path):
        p = tmp_path / "c.jsonl"
        p.write_text('{"id": "1", "pub_year": 2010}\n{"id": "2", "pub_year": \n')
        diag = Diagnostics()
        records = load_corpus(p, diag)
        assert [r.id for r in records] == ["1"]
        assert diag.counts() == {"malformed-line": 1}
        assert ":2:" in diag.messages[0][1]

    def test_invalid_record_is_a_malformed_line(self):
        diag = Diagnostics()
        out = parse_corpus_lines(['{"id": "1", "pub_year": 3000}'], diag)
        assert out == [] and len(diag) == 1

    def test_duplicate_id_fatal(self):
        lines = ['{"id": "1", "pub_year": 2010}', '{"id": "1", "pub_year": 2011}']
        with pytest.raises(ValidationError):
            parse_corpus_lines(lines)

    def test_missing_file_is_io_error(self, tmp_path):
        with pytest.raises(OSError):
            load_corpus(tmp_path / "nope.jsonl")

    def test_fixture_loads(self, table2_records):
        assert len(table2_records) == 7
        assert table2_records[0].sections[1].heading == "Funding"


# ------------------------------------------------------------ round trip

_text = st.text(st.characters(blacklist_categories=("Cs",)), max_size=30)
_name = st.text(st.characters(whitelist_categories=("Lu", "Ll", "Nd", "Zs")), min_size=1,
                max_size=20).filter(lambda s: s.strip() == s and s)
_tree = st.from_regex(r"\A[A-Z][0-9]{2}(\.[0-9]{1,3}){0,3}\Z")

records_strategy = st.builds(
    PublicationRecord,
    id=st.from_regex(r"\A[0-9]{1,9}\Z"),
    pub_year=st.integers(1800, 2100),
    journal=_text,
    doc_type=st.sampled_from(list(DocType)),
    author_countries=st.lists(st.sampled_from(["GB", "US", "DE", "JP"]), max_size=4).map(tuple),
    mesh_descriptors=st.lists(st.builds(MeshAssignment, _name, st.lists(_tree, min_size=1,
                                                                         max_size=3).map(tuple)),
                              max_size=3).map(tuple),
    sections=st.lists(st.builds(ParatextSection, st.sampled_from(["acknowledgements", "other"]),
                                _text, _text), max_size=2).map(tuple),
    wos_fu_raw=st.none() | _text,
    medline_grants_raw=st.none() | st.lists(_text, max_size=3).map(tuple),
    reference=st.none() | st.builds(ReferenceAnnotation,
                                    st.frozensets(st.sampled_from(["a", "b", "c"])),
                                    st.just(True)),
)


@settings(max_examples=150, deadline=None)
@given(st.lists(records_strategy, max_size=5, unique_by=lambda r: r.id))
def test_serialize_load_round_trip(tmp_path_factory, records):
    path = tmp_path_factory.mktemp("rt") / "c.jsonl"
    dump_corpus(records, path)
    loaded = load_corpus(path)
    assert loaded == records
    dump_corpus(loaded, path)
    assert load_corpus(path) == records


def test_serialized_record_is_one_line():
    r = rec("1", sections=(ParatextSection("other", "Funding", "a\nb"),))
    assert "\n" not in serialize_record(r)


# ------------------------------------------------------------ join

class TestJoin:
    def test_match_rate_example(self):
        primary = [rec(str(i)) for i in range(100)]
        secondary = [rec(str(i), author_countries=("GB",), doc_type="review")
                     for i in range(98)]
        joined, unmatched = join_by_id(primary, secondary)
        assert len(joined) == 98 and unmatched == ["98", "99"]
        assert joined[0].author_countries == ("GB",)
        assert joined[0].doc_type is DocType.REVIEW

    def test_identity(self):
        r = rec("1")
        assert join_by_id([r], [r]) == ([r], [])

    def test_disjoint(self):
        assert join_by_id([rec("1"), rec("2")], [rec("3")]) == ([], ["1", "2"])

    def test_duplicate_fatal(self):
        with pytest.raises(ValidationError):
            join_by_id([rec("1")], [rec("2"), rec("2")])

    @given(st.sets(st.integers(0, 30)), st.sets(st.integers(0, 30)))
    def test_joined_size_commutes(self, a, b):
        ra = [rec(str(i)) for i in sorted(a)]
        rb = [rec(str(i)) for i in sorted(b)]
        assert len(join_by_id(ra, rb)[0]) == len(join_by_id(rb, ra)[0]) == len(a & b)


# ------------------------------------------------------------ WoS FU

class TestWosFu:
    def test_case1_example(self):
        got = parse_wos_fu("Cancer Research UK [C355/A6253]; Breast Cancer Campaign")
        assert got == [ExternalFunderEntry("Cancer Research UK", ("C355/A6253",)),
                       ExternalFunderEntry("Breast Cancer Campaign", ())]

    def test_empty(self):
        assert parse_wos_fu("") == [] and parse_wos_fu(None) == []

    def test_multiple_codes(self):
        assert parse_wos_fu("A [1, 2]; B [3]") == [ExternalFunderEntry("A", ("1", "2")),
                                                   ExternalFunderEntry("B", ("3",))]

    def test_separator_inside_brackets(self):
        got = parse_wos_fu("NIH [R01 ES014403; P30 ES006096]; CRUK")
        assert got[0].name_raw == "NIH" and len(got) == 2

    def test_unbalanced_bracket_kept_with_diagnostic(self):
        diag = Diagnostics()
        got = parse_wos_fu("A [1, 2; B [3]", diag)
        assert got[0] == ExternalFunderEntry("A [1, 2", ())
        assert got[1] == ExternalFunderEntry("B", ("3",))
        assert diag.counts()["unbalanced-bracket"] == 1

    @given(st.lists(st.builds(
        ExternalFunderEntry,
        st.text(st.characters(whitelist_categories=("Lu", "Ll", "Nd")), min_size=1, max_size=15),
        st.lists(st.text(st.characters(whitelist_categories=("Lu", "Nd"), whitelist_characters="/-"),
                         min_size=1, max_size=10), max_size=3).map(tuple),
    ), max_size=6))
    def test_round_trip_on_unambiguous_subset(self, entries):
        assert parse_wos_fu(serialize_fu(entries)) == entries


# ------------------------------------------------------------ MEDLINE

class TestMedline:
    def test_four_fields(self):
        assert parse_medline_grant("R01 ES014403/ES/NIEHS NIH HHS/United States") == \
            ExternalFunderEntry("NIEHS NIH HHS", ("R01 ES014403",))

    def test_no_slashes(self):
        assert parse_medline_grant("NO-SLASHES") == ExternalFunderEntry("NO-SLASHES", ())

    def test_empty_code(self):
        assert parse_medline_grant("/X/Agency/Country") == ExternalFunderEntry("Agency", ())

    def test_three_fields_code_agency_country(self):
        assert parse_medline_grant("C355/Cancer Research UK/United Kingdom") == \
            ExternalFunderEntry("Cancer Research UK", ("C355",))

    def test_slash_in_code(self):
        got = parse_medline_grant("G0601/A12/MRC/Medical Research Council/United Kingdom")
        assert got == ExternalFunderEntry("Medical Research Council", ("G0601/A12",))


# ------------------------------------------------------------ cohorts

class TestCohort:
    def test_funded(self):
        assert classify_cohort(rec("1"), {"a", "b"}) is Cohort.FUNDED

    def test_ack_without_funder(self):
        r = rec("1", sections=(ParatextSection("other", "Acknowledgements",
                                               "We thank Dr. Smith."),))
        assert classify_cohort(r, set()) is Cohort.ACK_NO_FUNDER

    def test_no_sections(self):
        assert classify_cohort(rec("1"), set()) is Cohort.NO_ACK

    def test_irrelevant_section_is_no_ack(self):
        r = rec("1", sections=(ParatextSection("other", "Methods", "We did things."),))
        assert classify_cohort(r, set()) is Cohort.NO_ACK

    @given(st.lists(st.tuples(st.booleans(), st.sampled_from(
        ["", "Acknowledgements", "Funding", "Methods"])), max_size=20))
    def test_partition_total(self, specs):
        counts = {c: 0 for c in Cohort}
        for i, (funded, heading) in enumerate(specs):
            secs = (ParatextSection("other", heading, "Some text."),) if heading else ()
            counts[classify_cohort(rec(str(i), sections=secs), {"x"} if funded else set())] += 1
        assert sum(counts.values()) == len(specs)
