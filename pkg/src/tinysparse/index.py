"""Inverted index over sparse document vectors, with a checksummed binary format."""

from __future__ import annotations

import io
import logging
import struct
import zlib
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from .core import (
    DataFormatError,
    IdfTable,
    SparseVector,
    TokenId,
    Vocabulary,
    idf_from_document_frequencies,
)

logger = logging.getLogger(__name__)

MAGIC = b"TSPINDEX"
FORMAT_VERSION = 1


class IndexFileError(DataFormatError):
    """Base for anything wrong with an index file."""


class NotAnIndexFile(IndexFileError):
    pass


class UnsupportedIndexVersion(IndexFileError):
    pass


class TruncatedIndexFile(IndexFileError):
    pass


class IndexChecksumMismatch(IndexFileError):
    pass


class Posting(NamedTuple):
    doc_ordinal: int
    weight: float


class InvertedIndex:
    """Postings per token, kept sorted by doc ordinal so scoring can stream."""

    def __init__(
        self,
        vocabulary: Vocabulary,
        doc_ids: tuple[str, ...],
        postings: list[list[Posting]],
        diagnostics: tuple[str, ...] = (),
    ) -> None:
        if len(postings) != len(vocabulary):
            raise ValueError("postings list must cover the whole vocabulary")
        self.vocabulary = vocabulary
        self.doc_ids = doc_ids
        self._postings = postings
        self.diagnostics = diagnostics
        self._ordinals = {doc_id: i for i, doc_id in enumerate(doc_ids)}
        if len(self._ordinals) != len(doc_ids):
            raise ValueError("doc_ids contain duplicates")

    @property
    def corpus_size(self) -> int:
        return len(self.doc_ids)

    def postings_for(self, token_id: TokenId) -> list[Posting]:
        return self._postings[token_id]

    def df(self, token_id: TokenId) -> int:
        return len(self._postings[token_id])

    def document_frequencies(self) -> dict[TokenId, int]:
        return {t: len(p) for t, p in enumerate(self._postings) if p}

    def idf(self, *, source: str = "index") -> IdfTable:
        return idf_from_document_frequencies(
            self.document_frequencies(), self.corpus_size, source=source
        )

    @property
    def total_postings(self) -> int:
        return sum(len(p) for p in self._postings)

    def stats(self) -> dict[str, float | int]:
        n = self.corpus_size
        total = self.total_postings
        return {
            "corpus_size": n,
            "distinct_tokens": sum(1 for p in self._postings if p),
            "total_postings": total,
            "mean_nnz_per_doc": (total / n) if n else 0.0,
        }


def build_index(
    docs: Iterable[tuple[str, SparseVector | Mapping[str, float]]],
    vocabulary: Vocabulary,
) -> InvertedIndex:
    """Build an index from (doc_id, vector) pairs.

    Raw string-keyed mappings are validated here; a document carrying any
    non-positive or non-finite weight is rejected whole, with a diagnostic.
    Empty documents still occupy an ordinal: corpus statistics count them.
    Weights are rounded to float32, matching what the on-disk format holds.
    """
    doc_ids: list[str] = []
    postings: list[list[Posting]] = [[] for _ in range(len(vocabulary))]
    seen: set[str] = set()
    diagnostics: list[str] = []
    for doc_id, vector in docs:
        if doc_id in seen:
            raise ValueError(f"duplicate doc_id: {doc_id}")
        seen.add(doc_id)
        if isinstance(vector, SparseVector):
            items = list(vector.entries)
        else:
            bad = None
            items = []
            for term, weight in vector.items():
                token_id = vocabulary.get(term)
                if token_id is None:
                    raise DataFormatError(f"doc {doc_id}: token {term!r} not in vocabulary")
                if not (np.isfinite(weight) and weight > 0.0):
                    bad = f"rejected doc {doc_id}: bad weight {weight} for token {term!r}"
                    break
                items.append((token_id, float(weight)))
            if bad is not None:
                diagnostics.append(bad)
                logger.warning("%s", bad)
                continue
            items.sort()
        # Weights live as float32 on disk; a positive value that rounds to
        # zero would leave a dead posting, so the document is rejected too.
        rounded = [(t, float(np.float32(w))) for t, w in items]
        if any(w <= 0.0 for _, w in rounded):
            msg = f"rejected doc {doc_id}: weight underflows float32"
            diagnostics.append(msg)
            logger.warning("%s", msg)
            continue
        ordinal = len(doc_ids)
        doc_ids.append(doc_id)
        for token_id, weight in rounded:
            postings[token_id].append(Posting(ordinal, weight))
    # Ordinals were assigned in insertion order, so each list is already sorted.
    return InvertedIndex(vocabulary, tuple(doc_ids), postings, tuple(diagnostics))


# --- binary format ---------------------------------------------------------
#
# magic "TSPINDEX" | u32 version | 4 length-prefixed sections | u32 crc32
# sections: vocabulary, doc table, df array, postings
# all integers little-endian fixed width; weights are f32


def _pack_str_table(items: Iterable[str]) -> bytes:
    buf = io.BytesIO()
    items = list(items)
    buf.write(struct.pack("<I", len(items)))
    for item in items:
        raw = item.encode("utf-8")
        buf.write(struct.pack("<I", len(raw)))
        buf.write(raw)
    return buf.getvalue()


def save_index(index: InvertedIndex, path: str | Path) -> None:
    sections: list[bytes] = []
    sections.append(_pack_str_table(index.vocabulary.terms))
    sections.append(_pack_str_table(index.doc_ids))

    df_buf = io.BytesIO()
    df_buf.write(struct.pack("<I", len(index.vocabulary)))
    for token_id in range(len(index.vocabulary)):
        df_buf.write(struct.pack("<I", index.df(token_id)))
    sections.append(df_buf.getvalue())

    post_buf = io.BytesIO()
    post_buf.write(struct.pack("<I", len(index.vocabulary)))
    for token_id in range(len(index.vocabulary)):
        plist = index.postings_for(token_id)
        post_buf.write(struct.pack("<I", len(plist)))
        for ordinal, weight in plist:
            post_buf.write(struct.pack("<If", ordinal, weight))
    sections.append(post_buf.getvalue())

    payload = io.BytesIO()
    for section in sections:
        payload.write(struct.pack("<Q", len(section)))
        payload.write(section)
    body = payload.getvalue()

    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(body)
        fh.write(struct.pack("<I", zlib.crc32(body)))


class _Cursor:
    """Bounds-checked little-endian reader; running past the end means truncation."""

    def __init__(self, buf: bytes) -> None:
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise TruncatedIndexFile("truncated index file")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    @property
    def exhausted(self) -> bool:
        return self.pos == len(self.buf)


def _unpack_str_table(cur: _Cursor) -> list[str]:
    count = cur.u32()
    out = []
    for _ in range(count):
        n = cur.u32()
        out.append(cur.take(n).decode("utf-8"))
    return out


def load_index(path: str | Path) -> InvertedIndex:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(MAGIC) or blob[: len(MAGIC)] != MAGIC:
        raise NotAnIndexFile(f"{path}: not an index file")
    if len(blob) < len(MAGIC) + 8:
        raise TruncatedIndexFile(f"{path}: truncated index file")
    (version,) = struct.unpack_from("<I", blob, len(MAGIC))
    if version != FORMAT_VERSION:
        raise UnsupportedIndexVersion(f"{path}: unsupported version: {version}")
    body = blob[len(MAGIC) + 4 : -4]
    (declared_crc,) = struct.unpack_from("<I", blob, len(blob) - 4)

    # Walk the section framing first so a chopped file reports as truncated,
    # not as a checksum failure.
    frame = _Cursor(body)
    sections: list[bytes] = []
    for _ in range(4):
        length = frame.u64()
        sections.append(frame.take(length))
    if not frame.exhausted:
        raise IndexFileError(f"{path}: trailing bytes after postings section")

    if zlib.crc32(body) != declared_crc:
        raise IndexChecksumMismatch(f"{path}: checksum mismatch")

    try:
        terms = _unpack_str_table(_Cursor(sections[0]))
        doc_ids = _unpack_str_table(_Cursor(sections[1]))

        df_cur = _Cursor(sections[2])
        df = [df_cur.u32() for _ in range(df_cur.u32())]

        post_cur = _Cursor(sections[3])
        token_count = post_cur.u32()
        postings: list[list[Posting]] = []
        for _ in range(token_count):
            n = post_cur.u32()
            plist = []
            prev = -1
            for _ in range(n):
                ordinal = post_cur.u32()
                (weight,) = struct.unpack("<f", post_cur.take(4))
                if ordinal <= prev:
                    raise IndexFileError(f"{path}: postings out of order")
                prev = ordinal
                plist.append(Posting(ordinal, float(weight)))
            postings.append(plist)
    except TruncatedIndexFile:
        # Sections passed the checksum, so short interior data is corruption
        # from a broken writer rather than a chopped file.
        raise IndexFileError(f"{path}: section data inconsistent with framing") from None

    if len(terms) != token_count or len(df) != token_count:
        raise IndexFileError(f"{path}: section sizes disagree")
    for token_id, plist in enumerate(postings):
        if df[token_id] != len(plist):
            raise IndexFileError(f"{path}: df does not match postings length")
        for ordinal, _ in plist:
            if ordinal >= len(doc_ids):
                raise IndexFileError(f"{path}: posting points past doc table")

    return InvertedIndex(Vocabulary(tuple(terms)), tuple(doc_ids), postings)
