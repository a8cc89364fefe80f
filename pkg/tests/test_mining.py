"""Hard-negative mining against a hand-built index, and the rank filter."""

from __future__ import annotations

import pytest

from tinysparse.core import DataFormatError, SparseVector, Vocabulary
from tinysparse.distill.mining import (
    MinedCandidates,
    consistency_filter,
    mine_hard_negatives,
    read_mined,
    write_mined,
)
from tinysparse.index import build_index
from tinysparse.scoring import ScoreMode


@pytest.fixture
def small_index():
    # Scores for query {a}: d1=5, d2=4, d3=3, d4=2, d5=1. Fully predictable.
    vocab = Vocabulary(("a", "b"))
    docs = [
        ("d1", {"a": 5.0}),
        ("d2", {"a": 4.0}),
        ("d3", {"a": 3.0}),
        ("d4", {"a": 2.0}),
        ("d5", {"a": 1.0}),
        ("d6", {"b": 9.0}),
    ]
    return build_index(docs, vocab)


QUERY_A = SparseVector(((0, 1.0),))


class TestMinedCandidates:
    def test_empty_candidates_rejected(self):
        with pytest.raises(ValueError, match="empty candidate list"):
            MinedCandidates("q1", (), None)

    def test_rank_is_one_based(self):
        with pytest.raises(ValueError, match="1-based"):
            MinedCandidates("q1", ("d1",), 0)


class TestMining:
    def test_positive_moved_to_front_keeps_rank(self, small_index):
        mined = mine_hard_negatives(
            small_index, [("q1", QUERY_A)], {"q1": "d3"}, m=4
        )
        assert len(mined) == 1
        row = mined[0]
        assert row.doc_ids == ("d3", "d1", "d2", "d4")
        assert row.positive_rank == 3

    def test_positive_already_first(self, small_index):
        row = mine_hard_negatives(small_index, [("q1", QUERY_A)], {"q1": "d1"}, m=3)[0]
        assert row.doc_ids == ("d1", "d2", "d3")
        assert row.positive_rank == 1

    def test_unretrieved_positive_has_no_rank(self, small_index):
        # d6 never matches query {a}; it still leads the candidate list.
        row = mine_hard_negatives(small_index, [("q1", QUERY_A)], {"q1": "d6"}, m=3)[0]
        assert row.doc_ids == ("d6", "d1", "d2")
        assert row.positive_rank is None

    def test_cap_includes_positive(self, small_index):
        row = mine_hard_negatives(small_index, [("q1", QUERY_A)], {"q1": "d5"}, m=2)[0]
        assert len(row.doc_ids) == 2
        assert row.doc_ids == ("d5", "d1")

    def test_missing_positive_mapping(self, small_index):
        with pytest.raises(DataFormatError, match="no positive for query q1"):
            mine_hard_negatives(small_index, [("q1", QUERY_A)], {}, m=3)

    def test_m_must_be_positive(self, small_index):
        with pytest.raises(ValueError, match="m must be positive"):
            mine_hard_negatives(small_index, [], {}, m=0)

    def test_idf_weighted_mode(self, small_index):
        idf = small_index.idf()
        row = mine_hard_negatives(
            small_index,
            [("q1", QUERY_A)],
            {"q1": "d2"},
            m=3,
            mode=ScoreMode.IDF_WEIGHTED,
            idf=idf,
        )[0]
        # One query token: idf weighting rescales all scores equally, so the
        # order cannot change.
        assert row.doc_ids == ("d2", "d1", "d3")
        assert row.positive_rank == 2


class TestConsistencyFilter:
    def rows(self):
        return [
            MinedCandidates("q1", ("d1", "d2"), 1),
            MinedCandidates("q5", ("d3", "d4"), 5),
            MinedCandidates("q10", ("d5", "d6"), 10),
            MinedCandidates("q11", ("d7", "d8"), 11),
            MinedCandidates("q50", ("d9", "da"), 50),
            MinedCandidates("qnone", ("db", "dc"), None),
        ]

    def test_default_keeps_rank_at_most_10(self):
        kept = consistency_filter(self.rows())
        assert [r.query_id for r in kept] == ["q1", "q5", "q10"]

    def test_k_zero_drops_everything(self):
        assert consistency_filter(self.rows(), k=0) == []

    def test_unranked_always_dropped(self):
        kept = consistency_filter(self.rows(), k=10**9)
        assert all(r.query_id != "qnone" for r in kept)

    def test_negative_k_rejected(self):
        with pytest.raises(ValueError, match=">= 0"):
            consistency_filter(self.rows(), k=-1)


class TestMinedIO:
    def test_round_trip(self, tmp_path):
        rows = [
            MinedCandidates("q1", ("d1", "d2"), 2),
            MinedCandidates("q2", ("d3",), None),
        ]
        path = tmp_path / "mined.jsonl"
        write_mined(path, rows)
        assert read_mined(path) == rows

    def test_bad_line_reported(self, tmp_path):
        path = tmp_path / "mined.jsonl"
        path.write_text('{"query_id": "q1"}\n')
        with pytest.raises(DataFormatError, match="line 1"):
            read_mined(path)
