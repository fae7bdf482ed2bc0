import itertools
import xml.etree.ElementTree as ET
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ackfund.corpus import MeshAssignment
from ackfund.errors import NotFoundError, UsageError, ValidationError
from ackfund.harmonize import CanonicalFunder
from ackfund.landscape import (CodedRecord, MeshArea, MeshTree, cofunding_matrix,
                               default_mesh_tree, export_graph, major_minor_coverage,
                               matrix_to_tsv, portfolio_profile, roll_up,
                               single_publication_share, split_major_minor, summarize_areas,
                               tally_funders, top_by_sector)

TREE = default_mesh_tree()


def mesh(*tree_numbers):
    return (MeshAssignment("d", tuple(tree_numbers)),)


def pairwise_oracle(sets, ids):
    out = {}
    for a, b in itertools.permutations(ids, 2):
        out[a, b] = sum(1 for s in sets if a in s and b in s)
    return out


# ------------------------------------------------------------ tallies

class TestTallies:
    def test_nih_share(self):
        sets = [{"nih"}] * 450 + [{"other"}] * (3914 - 450)
        nih = next(t for t in tally_funders(sets) if t.funder_id == "nih")
        assert nih.share_of_funded == pytest.approx(0.115, abs=5e-4)

    def test_empty(self):
        assert tally_funders([]) == []

    def test_hand_count(self):
        got = [(t.funder_id, t.pub_count) for t in tally_funders([{"A"}, {"A", "B"}, {"B"}])]
        assert got == [("A", 2), ("B", 2)]

    def test_unfunded_publications_ignored(self):
        [t] = tally_funders([{"A"}, set(), set()])
        assert t.n_funded == 1 and t.share_of_funded == 1.0

    def test_single_publication_share(self):
        tallies = tally_funders([{"A", "B"}, {"A", "C"}, {"D"}])
        assert single_publication_share(tallies) == 0.75

    @given(st.lists(st.frozensets(st.sampled_from("ABCDEF")), max_size=30))
    def test_shares_in_unit_interval_and_sorted(self, sets):
        tallies = tally_funders(sets)
        assert all(0 < t.share_of_funded <= 1 for t in tallies)
        keys = [(-t.pub_count, t.funder_id) for t in tallies]
        assert keys == sorted(keys)

    @given(st.lists(st.frozensets(st.sampled_from("ABCDEF")), max_size=30), st.integers(0, 30))
    def test_partition_merge(self, sets, k):
        whole = {t.funder_id: t.pub_count for t in tally_funders(sets)}
        parts = Counter()
        for chunk in (sets[:k], sets[k:]):
            parts.update({t.funder_id: t.pub_count for t in tally_funders(chunk)})
        assert dict(parts) == whole


class TestMajorMinor:
    def test_boundary_exact(self):
        tallies = tally_funders([{"A"}] * 7 + [{"B"}] * 343)
        major, minor = split_major_minor(tallies, 0.02)
        assert "A" in major

    def test_below(self):
        tallies = tally_funders([{"A"}] * 19 + [{"B"}] * 981)
        assert "A" in split_major_minor(tallies)[1]

    def test_threshold_zero(self):
        tallies = tally_funders([{"A"}, {"B", "C"}])
        assert split_major_minor(tallies, 0.0) == ({"A", "B", "C"}, set())

    def test_bad_threshold(self):
        with pytest.raises(ValidationError):
            split_major_minor([], 1.5)

    def test_coverage(self):
        sets = [{"A"}, {"A", "b"}, {"b"}, set()]
        cov = major_minor_coverage(sets, {"A"}, {"b"})
        assert (cov.funded, cov.any_major, cov.any_minor, cov.major_and_minor) == (3, 2, 2, 1)

    def test_top_by_sector(self):
        tallies = tally_funders([{"a1", "b1"}, {"a1", "a2"}, {"a3"}])
        top = top_by_sector(tallies, lambda f: f[0], n=2)
        assert [t.funder_id for t in top["a"]] == ["a1", "a2"]
        assert [t.funder_id for t in top["b"]] == ["b1"]


# ------------------------------------------------------------ co-funding

class TestCofunding:
    def test_table4_corner(self):
        sets = [{"cruk", "doh"}] * 315 + [{"cruk"}] * 100 + [{"doh", "mrc"}] * 3
        m = cofunding_matrix(sets)
        assert m.funder_ids[:2] == ("cruk", "doh")
        assert m.counts[0, 1] == m.counts[1, 0] == 315

    def test_two_joint_pubs(self):
        assert cofunding_matrix([{"A", "B"}, {"A", "B"}]).cell("A", "B") == 2

    def test_six_publication_oracle(self):
        sets = [{"A", "B", "C"}, {"A", "B"}, {"B", "C", "D"}, {"A"}, {"C", "D"}, {"A", "D", "B"}]
        m = cofunding_matrix(sets, min_pubs=1)
        oracle = pairwise_oracle(sets, m.funder_ids)
        for (a, b), n in oracle.items():
            assert m.cell(a, b) == n
        assert np.all(np.diag(m.counts) == 0)

    def test_min_pubs_filter(self):
        m = cofunding_matrix([{"A", "B"}, {"A"}], min_pubs=2)
        assert m.funder_ids == ("A",)

    def test_scope_filter(self):
        country = {"A": "GB", "B": "US", "C": "GB"}
        m = cofunding_matrix([{"A", "B", "C"}] * 2, scope=lambda f: country[f] == "GB")
        assert m.funder_ids == ("A", "C") and m.cell("A", "C") == 2

    def test_top_n(self):
        m = cofunding_matrix([{"A", "B"}, {"A", "C"}, {"A", "B"}], min_pubs=1, top_n=2)
        assert m.funder_ids == ("A", "B")

    def test_tsv(self):
        m = cofunding_matrix([{"A", "B"}] * 2)
        assert matrix_to_tsv(m, {"A": "Alpha"}) == ("funder\tpub_count\tA\tB\n"
                                                     "Alpha\t2\t0\t2\nB\t2\t2\t0\n")

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.frozensets(st.sampled_from("ABCDEFGH")), max_size=50))
    def test_invariants(self, sets):
        m = cofunding_matrix(sets, min_pubs=1)
        assert np.array_equal(m.counts, m.counts.T)
        for i, a in enumerate(m.funder_ids):
            for j, b in enumerate(m.funder_ids):
                if i != j:
                    bound = min(m.pub_counts[a], m.pub_counts[b])
                    assert m.counts[i, j] <= bound
                    # The bound is reached iff one funder never appears without the other.
                    a_in_b = all(b in s for s in sets if a in s)
                    b_in_a = all(a in s for s in sets if b in s)
                    assert (m.counts[i, j] == bound) == (a_in_b or b_in_a)
        assert np.all(np.diag(m.counts) == 0)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.frozensets(st.sampled_from("ABCDE")), max_size=30), st.integers(0, 30))
    def test_partition_merge(self, sets, k):
        whole = cofunding_matrix(sets, min_pubs=1)
        left = cofunding_matrix(sets[:k], min_pubs=1)
        right = cofunding_matrix(sets[k:], min_pubs=1)
        for a, b in itertools.permutations(whole.funder_ids, 2):
            part = sum(m.cell(a, b) for m in (left, right)
                       if a in m.funder_ids and b in m.funder_ids)
            assert whole.cell(a, b) == part


class TestExportGraph:
    FUNDERS = {"A": CanonicalFunder("A", "Alpha", "GB", "industry")}

    def test_one_edge(self):
        m = cofunding_matrix([{"A", "B"}], min_pubs=1)
        dot = export_graph(m, "dot", self.FUNDERS)
        assert dot.count(" -- ") == 1 and '"A" -- "B" [weight=1]' in dot
        assert 'label="Alpha"' in dot and 'sector="industry"' in dot

    def test_empty_is_header_only(self):
        m = cofunding_matrix([])
        assert export_graph(m, "dot") == "graph cofunding {\n}\n"
        root = ET.fromstring(export_graph(m, "graphml"))
        ns = "{http://graphml.graphdrawing.org/xmlns}"
        assert root.find(f"{ns}graph") is not None
        assert list(root.iter(f"{ns}node")) == []

    def test_single_funder_zero_edges(self):
        m = cofunding_matrix([{"A"}], min_pubs=1)
        assert m.counts.shape == (1, 1) and " -- " not in export_graph(m)

    def test_unknown_format(self):
        with pytest.raises(UsageError):
            export_graph(cofunding_matrix([]), "gexf")

    @pytest.mark.parametrize("fmt", ["dot", "graphml"])
    def test_golden(self, fixtures_dir, fmt):
        sets = [{"cruk", "doh"}, {"cruk", "doh", "mrc"}, {"mrc", "wellcome"}, {"cruk"},
                {"wellcome", "cruk"}, {"acme"}]
        funders = {
            "cruk": CanonicalFunder("cruk", "Cancer Research UK", "GB", "uk_public_charity"),
            "doh": CanonicalFunder("doh", "Departments of Health", "GB", "uk_public_charity"),
            "mrc": CanonicalFunder("mrc", "Medical Research Council", "GB", "uk_public_charity"),
            "wellcome": CanonicalFunder("wellcome", 'Wellcome Trust & "Friends" <UK>', "GB",
                                        "uk_public_charity"),
        }
        got = export_graph(cofunding_matrix(sets, min_pubs=1), fmt, funders)
        golden = (fixtures_dir / "golden" / f"graph_small.{fmt}").read_text(encoding="utf-8")
        assert got == golden

    def test_graphml_is_well_formed(self):
        m = cofunding_matrix([{"A", "B"}, {"B", "C"}], min_pubs=1)
        root = ET.fromstring(export_graph(m, "graphml"))
        ns = "{http://graphml.graphdrawing.org/xmlns}"
        assert len(list(root.iter(f"{ns}edge"))) == 2


# ------------------------------------------------------------ MeSH

class TestMeshTree:
    def test_defaults(self):
        assert len(TREE.areas) == 31
        assert sum(a.tree_number.startswith("C04.588.") for a in TREE.areas) == 17
        assert sum(a.tree_number.startswith("C04.557.") for a in TREE.areas) == 14

    def test_duplicate_prefix(self):
        with pytest.raises(ValidationError):
            MeshTree({"C04.1": "x"}, [MeshArea("a", "x", "C04.1"), MeshArea("b", "x", "C04.01")])

    def test_prefix_must_be_node(self):
        with pytest.raises(ValidationError):
            MeshTree({}, [MeshArea("a", "x", "C04.1")])

    def test_custom_tree_from_tsv(self, tmp_path):
        p = tmp_path / "areas.tsv"
        p.write_text("label\tabbreviation\ttree_number\nHeart Diseases\tHeart\tC14.280\n")
        tree = MeshTree.from_tsv(p)
        assert roll_up(mesh("C14.280.647"), tree) == {"Heart"}


class TestRollUp:
    def test_exact(self):
        assert roll_up(mesh("C04.588.274"), TREE) == {"Digestive System"}

    def test_descendant(self):
        assert roll_up(mesh("C04.588.274.120"), TREE) == {"Digestive System"}

    def test_two_areas(self):
        assert roll_up(mesh("C04.557.470", "C04.588.180"), TREE) == {
            "Glandular & Epithelial", "Breast"}

    def test_prefix_is_segment_wise(self):
        # C04.588.27 is not an ancestor of C04.588.274.
        tree = MeshTree({"C04.588.27": "x"}, [MeshArea("X", "x", "C04.588.27")])
        assert roll_up(mesh("C04.588.274"), tree) == frozenset()

    def test_zero_padded_segments(self):
        assert roll_up(mesh("C04.588.033.500"), TREE) == {"Abdominal"}

    def test_top_level_only(self):
        assert roll_up(mesh("C04"), TREE) == frozenset()

    @given(st.lists(st.sampled_from([a.tree_number for a in TREE.areas] + ["C04", "E02.815"]),
                    max_size=4),
           st.sampled_from([a.tree_number for a in TREE.areas] + ["C04.588", "A01"]))
    def test_monotone(self, numbers, extra):
        before = roll_up(mesh(*numbers), TREE) if numbers else frozenset()
        after = roll_up(mesh(*(numbers + [extra])), TREE)
        assert before <= after


class TestSummaryAndProfiles:
    RECORDS = [
        CodedRecord("1", frozenset({"cruk"}), mesh("C04.588.180")),
        CodedRecord("2", frozenset({"cruk", "mrc"}), mesh("C04.588.180", "C04.557.470")),
        CodedRecord("3", frozenset({"cruk"}), mesh("C04.588.274.120")),
        CodedRecord("4", frozenset({"cruk"}), mesh("C04")),
        CodedRecord("5", frozenset({"mrc"}), mesh("E02.815")),
        CodedRecord("6", frozenset(), mesh("C04.557.337")),
        CodedRecord("7", frozenset({"mrc"}), mesh("C04.557.337.100", "C04.588.448")),
        CodedRecord("8", frozenset({"wellcome"}), ()),
        CodedRecord("9", frozenset({"mrc", "wellcome"}), mesh("C04.588.180.260")),
        CodedRecord("10", frozenset({"mrc"}), mesh("C04")),
    ]

    def test_four_pubs_two_breast(self):
        p = portfolio_profile("cruk", self.RECORDS, TREE)
        assert p.n_publications == 4 and p.shares["Breast"] == 0.5

    def test_every_pub_in_area(self):
        recs = [CodedRecord(str(i), frozenset({"x"}), mesh("C04.588.180")) for i in range(3)]
        assert portfolio_profile("x", recs, TREE).shares["Breast"] == 1.0

    def test_ten_publication_oracle(self):
        p = portfolio_profile("mrc", self.RECORDS, TREE)
        # mrc: pubs 2, 5, 7, 9, 10
        expected = {"Breast": 2 / 5, "Glandular & Epithelial": 1 / 5, "Leukemia": 1 / 5,
                    "Hematologic": 1 / 5}
        assert p.n_publications == 5
        assert {k: v for k, v in p.shares.items() if v} == pytest.approx(expected)

    def test_unknown_funder(self):
        with pytest.raises(NotFoundError):
            portfolio_profile("nobody", self.RECORDS, TREE)

    def test_summary_counts_unclassified(self):
        s = summarize_areas(self.RECORDS, TREE)
        assert s.unclassified_at_level == 2
        assert s.outside_tree == 2
        assert s.classified == 6
        assert s.counts["Breast"] == 3 and s.counts["Leukemia"] == 2
