"""Index construction, statistics, and the binary file format."""

from __future__ import annotations

import struct

import numpy as np
import pytest

from tinysparse.core import DataFormatError, SparseVector, Vocabulary
from tinysparse.index import (
    FORMAT_VERSION,
    MAGIC,
    IndexChecksumMismatch,
    IndexFileError,
    NotAnIndexFile,
    Posting,
    TruncatedIndexFile,
    UnsupportedIndexVersion,
    build_index,
    load_index,
    save_index,
)

VOCAB = Vocabulary(("a", "b", "c"))


def small_index():
    docs = [
        ("d1", {"a": 1.0, "b": 2.0}),
        ("d2", {"b": 0.5}),
        ("d3", {}),  # empty vector, still a corpus member
    ]
    return build_index(docs, VOCAB)


class TestBuildIndex:
    def test_postings_sorted_and_df(self):
        index = small_index()
        assert index.corpus_size == 3
        assert index.df(VOCAB.id_of("b")) == 2
        ordinals = [p.doc_ordinal for p in index.postings_for(VOCAB.id_of("b"))]
        assert ordinals == sorted(ordinals)

    def test_duplicate_doc_id(self):
        with pytest.raises(ValueError, match="duplicate doc_id: d1"):
            build_index([("d1", {"a": 1.0}), ("d1", {"b": 1.0})], VOCAB)

    def test_nonpositive_weight_rejects_document(self):
        index = build_index(
            [("good", {"a": 1.0}), ("bad", {"a": -2.0}), ("good2", {"b": 1.0})], VOCAB
        )
        assert index.corpus_size == 2
        assert "bad" not in index.doc_ids
        assert len(index.diagnostics) == 1
        assert "bad" in index.diagnostics[0]

    def test_empty_document_registered(self):
        index = small_index()
        assert "d3" in index.doc_ids
        assert index.stats()["corpus_size"] == 3

    def test_unknown_token_is_data_error(self):
        with pytest.raises(DataFormatError, match="not in vocabulary"):
            build_index([("d1", {"zzz": 1.0})], VOCAB)

    def test_accepts_sparse_vectors(self):
        vector = SparseVector(((0, 1.5),))
        index = build_index([("d1", vector)], VOCAB)
        assert index.postings_for(0) == [Posting(0, 1.5)]

    def test_weights_snap_to_float32(self):
        weight = 0.1  # not representable in f32
        index = build_index([("d1", {"a": weight})], VOCAB)
        assert index.postings_for(0)[0].weight == float(np.float32(weight))

    def test_stats_fields(self):
        stats = small_index().stats()
        assert stats == {
            "corpus_size": 3,
            "distinct_tokens": 2,
            "total_postings": 3,
            "mean_nnz_per_doc": 1.0,
        }


class TestRoundTrip:
    def test_load_preserves_everything(self, tmp_path):
        index = small_index()
        path = tmp_path / "idx.bin"
        save_index(index, path)
        loaded = load_index(path)
        assert loaded.doc_ids == index.doc_ids
        assert loaded.vocabulary.terms == index.vocabulary.terms
        for token_id in range(len(VOCAB)):
            assert loaded.postings_for(token_id) == index.postings_for(token_id)

    def test_save_is_deterministic(self, tmp_path):
        index = small_index()
        p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
        save_index(index, p1)
        save_index(index, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_save_load_save_byte_identical(self, tmp_path):
        p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
        save_index(small_index(), p1)
        save_index(load_index(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()


class TestFileErrors:
    def make_file(self, tmp_path):
        path = tmp_path / "idx.bin"
        save_index(small_index(), path)
        return path

    def test_not_an_index_file(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"PNG\x00 definitely not an index")
        with pytest.raises(NotAnIndexFile, match="not an index file"):
            load_index(path)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.bin"
        path.write_bytes(b"")
        with pytest.raises(NotAnIndexFile):
            load_index(path)

    def test_unsupported_version(self, tmp_path):
        path = self.make_file(tmp_path)
        blob = bytearray(path.read_bytes())
        blob[len(MAGIC) : len(MAGIC) + 4] = struct.pack("<I", FORMAT_VERSION + 9)
        path.write_bytes(bytes(blob))
        with pytest.raises(UnsupportedIndexVersion, match="unsupported version"):
            load_index(path)

    def test_truncated(self, tmp_path):
        path = self.make_file(tmp_path)
        blob = path.read_bytes()
        path.write_bytes(blob[: len(blob) // 2])
        with pytest.raises(TruncatedIndexFile):
            load_index(path)

    def test_checksum_mismatch(self, tmp_path):
        path = self.make_file(tmp_path)
        blob = bytearray(path.read_bytes())
        # Flip one payload byte without touching the section framing: the
        # last byte before the checksum is posting data.
        blob[-5] ^= 0xFF
        path.write_bytes(bytes(blob))
        with pytest.raises(IndexChecksumMismatch, match="checksum mismatch"):
            load_index(path)

    def test_trailing_garbage(self, tmp_path):
        path = self.make_file(tmp_path)
        blob = path.read_bytes()
        path.write_bytes(blob + b"extra")
        with pytest.raises(IndexFileError):
            load_index(path)

    def test_error_family_is_data_format(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"nope")
        with pytest.raises(DataFormatError):
            load_index(path)
