"""Core types for sparse lexical retrieval: vocabulary, sparse vectors, IDF tables."""

from __future__ import annotations

import bisect
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

logger = logging.getLogger(__name__)

TokenId = int


class DataFormatError(ValueError):
    """Malformed input artifact (bad JSON line, broken header, negative weight, ...)."""


@dataclass(frozen=True)
class Vocabulary:
    """Bijective term <-> id mapping with dense ids 0..len-1."""

    terms: tuple[str, ...]
    _ids: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        ids: dict[str, int] = {}
        for i, term in enumerate(self.terms):
            if term in ids:
                raise ValueError(f"duplicate term: {term!r}")
            ids[term] = i
        object.__setattr__(self, "_ids", ids)

    @classmethod
    def from_terms(cls, terms: Iterable[str]) -> "Vocabulary":
        return cls(tuple(terms))

    def __len__(self) -> int:
        return len(self.terms)

    def __contains__(self, term: str) -> bool:
        return term in self._ids

    def id_of(self, term: str) -> TokenId:
        return self._ids[term]

    def get(self, term: str) -> TokenId | None:
        return self._ids.get(term)

    def term_of(self, token_id: TokenId) -> str:
        return self.terms[token_id]


@dataclass(frozen=True)
class SparseVector:
    """Sorted sparse activation vector.

    Entries are (token_id, weight) pairs, strictly increasing by id, every
    weight finite and > 0. Zero entries are simply absent.
    """

    entries: tuple[tuple[TokenId, float], ...] = ()

    def __post_init__(self) -> None:
        prev = -1
        for token_id, weight in self.entries:
            if token_id <= prev:
                raise ValueError("token ids must be strictly increasing")
            if token_id < 0:
                raise ValueError(f"negative token id: {token_id}")
            if not math.isfinite(weight) or weight <= 0.0:
                raise ValueError(f"non-positive weight for token {token_id}: {weight}")
            prev = token_id

    @classmethod
    def from_dict(cls, weights: Mapping[TokenId, float]) -> "SparseVector":
        return cls(tuple(sorted((int(t), float(w)) for t, w in weights.items())))

    @property
    def nnz(self) -> int:
        return len(self.entries)

    @property
    def l1(self) -> float:
        return sum(w for _, w in self.entries)

    @property
    def token_ids(self) -> tuple[TokenId, ...]:
        return tuple(t for t, _ in self.entries)

    def weight(self, token_id: TokenId) -> float:
        """Weight for token_id, 0.0 if absent."""
        i = bisect.bisect_left(self.entries, (token_id,))
        if i < len(self.entries) and self.entries[i][0] == token_id:
            return self.entries[i][1]
        return 0.0

    def to_dict(self) -> dict[TokenId, float]:
        return dict(self.entries)


@dataclass(frozen=True)
class IdfTable:
    """IDF lookup with a fixed default for tokens absent from the source corpus."""

    values: Mapping[TokenId, float]
    default: float = 1.0
    source: str = ""

    def __post_init__(self) -> None:
        if not (math.isfinite(self.default) and self.default > 0.0):
            raise ValueError(f"non-positive default idf: {self.default}")
        for token_id, value in self.values.items():
            if not (math.isfinite(value) and value > 0.0):
                raise ValueError(f"non-positive idf for token {token_id}: {value}")

    def lookup(self, token_id: TokenId) -> float:
        return self.values.get(token_id, self.default)


@dataclass(frozen=True)
class ScoredDoc:
    """One ranked hit. Sorting puts higher scores first, ties broken by doc_id."""

    doc_id: str
    score: float

    def __lt__(self, other: "ScoredDoc") -> bool:
        if self.score != other.score:
            return self.score > other.score
        return self.doc_id < other.doc_id


def tokenize(text: str) -> list[str]:
    """Lowercase whitespace tokenizer. Fixture-grade only, not a real analyzer."""
    return text.lower().split()


def idf_from_document_frequencies(
    df: Mapping[TokenId, int], corpus_size: int, *, source: str = ""
) -> IdfTable:
    """Smoothed inverse document frequency from raw df counts.

    idf(t) = ln((N - df + 0.5) / (df + 0.5) + 1), which stays positive even
    when a token appears in every document.
    """
    if corpus_size <= 0:
        raise ValueError("empty corpus")
    values = {}
    for token_id, count in df.items():
        if count <= 0:
            continue
        values[token_id] = math.log((corpus_size - count + 0.5) / (count + 0.5) + 1.0)
    return IdfTable(values=values, source=source)


def compute_idf(
    corpus: Iterable[SparseVector | Iterable[TokenId]], *, source: str = ""
) -> IdfTable:
    """IDF table over a corpus of sparse vectors or plain token-id lists.

    df counts distinct tokens per document; order of documents does not matter.
    """
    df: Counter[TokenId] = Counter()
    n = 0
    for doc in corpus:
        n += 1
        ids = doc.token_ids if isinstance(doc, SparseVector) else set(doc)
        df.update(ids)
    if n == 0:
        raise ValueError("empty corpus")
    return idf_from_document_frequencies(df, n, source=source)


def binarize_query(tokens: Iterable[str], vocabulary: Vocabulary) -> tuple[SparseVector, int]:
    """Map query tokens to a binary vector over the vocabulary.

    Distinct in-vocabulary tokens get weight 1.0; out-of-vocabulary tokens are
    dropped. Returns (vector, dropped_count).
    """
    ids: set[TokenId] = set()
    dropped = 0
    for token in tokens:
        token_id = vocabulary.get(token)
        if token_id is None:
            dropped += 1
        else:
            ids.add(token_id)
    return SparseVector(tuple((t, 1.0) for t in sorted(ids))), dropped


# --- file formats ---------------------------------------------------------
#
# vectors: JSON lines, {"id": "...", "vector": {"<token>": <weight>, ...}}
# idf:     single JSON object {"source": "...", "default": 1.0, "values": {...}}


def iter_raw_vectors(path: str | Path) -> Iterator[tuple[str, dict[str, float]]]:
    """Stream (doc_id, token->weight) pairs from a vectors file.

    Raises DataFormatError with the offending line number on malformed input.
    Weight validation is left to the consumer so it can reject per document.
    """
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"{path}: line {lineno}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict) or "id" not in obj or "vector" not in obj:
                raise DataFormatError(f"{path}: line {lineno}: expected id and vector fields")
            doc_id, vector = obj["id"], obj["vector"]
            if not isinstance(doc_id, str) or not isinstance(vector, dict):
                raise DataFormatError(f"{path}: line {lineno}: bad id or vector type")
            out: dict[str, float] = {}
            for term, weight in vector.items():
                if not isinstance(weight, (int, float)) or isinstance(weight, bool):
                    raise DataFormatError(
                        f"{path}: line {lineno}: non-numeric weight for {term!r}"
                    )
                out[term] = float(weight)
            yield doc_id, out


def derive_vocabulary(raw_docs: Iterable[tuple[str, Mapping[str, float]]]) -> Vocabulary:
    """Vocabulary over every token mentioned, sorted so ids are input-order free."""
    terms: set[str] = set()
    for _, vector in raw_docs:
        terms.update(vector)
    return Vocabulary(tuple(sorted(terms)))


def write_vectors(
    path: str | Path,
    docs: Iterable[tuple[str, SparseVector]],
    vocabulary: Vocabulary,
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc_id, vector in docs:
            obj = {
                "id": doc_id,
                "vector": {vocabulary.term_of(t): w for t, w in vector.entries},
            }
            fh.write(json.dumps(obj) + "\n")


def write_idf(path: str | Path, table: IdfTable, vocabulary: Vocabulary) -> None:
    obj = {
        "source": table.source,
        "default": table.default,
        "values": {
            vocabulary.term_of(t): v
            for t, v in sorted(table.values.items())
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def read_idf(path: str | Path, vocabulary: Vocabulary) -> IdfTable:
    """Load an IDF table, rebinding token strings to this vocabulary.

    Tokens unknown to the vocabulary are skipped: they cannot occur in any
    query built against it. This is what makes swapping IDF sources safe.
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(obj, dict) or "values" not in obj:
        raise DataFormatError(f"{path}: expected an object with a values field")
    values: dict[TokenId, float] = {}
    skipped = 0
    for term, value in obj["values"].items():
        token_id = vocabulary.get(term)
        if token_id is None:
            skipped += 1
            continue
        values[token_id] = float(value)
    if skipped:
        logger.info("idf source %s: %d tokens not in vocabulary, skipped", path, skipped)
    try:
        return IdfTable(
            values=values,
            default=float(obj.get("default", 1.0)),
            source=str(obj.get("source", "")),
        )
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from exc


def read_token_docs(path: str | Path) -> list[tuple[str, list[str]]]:
    """Read a corpus of raw token documents.

    JSON lines with {"id": ..., "tokens": [...]} or {"id": ..., "text": "..."};
    text is run through the fixture tokenizer.
    """
    docs: list[tuple[str, list[str]]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"{path}: line {lineno}: invalid JSON: {exc}") from exc
            if not isinstance(obj, dict) or "id" not in obj:
                raise DataFormatError(f"{path}: line {lineno}: missing id")
            if "tokens" in obj:
                tokens = obj["tokens"]
                if not isinstance(tokens, list) or any(not isinstance(t, str) for t in tokens):
                    raise DataFormatError(f"{path}: line {lineno}: tokens must be strings")
            elif "text" in obj:
                tokens = tokenize(str(obj["text"]))
            else:
                raise DataFormatError(f"{path}: line {lineno}: need tokens or text")
            docs.append((str(obj["id"]), tokens))
    return docs
