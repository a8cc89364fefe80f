"""Additive match scoring and the activation-density penalty."""

from __future__ import annotations

import enum
from typing import Iterable, Mapping, Sequence

from .core import IdfTable, SparseVector, TokenId


class ScoreMode(enum.Enum):
    PLAIN = "plain"
    IDF_WEIGHTED = "idf_weighted"

    @classmethod
    def parse(cls, name: str) -> "ScoreMode":
        try:
            return cls(name)
        except ValueError:
            raise ValueError(
                f"unknown score mode {name!r}; expected one of "
                f"{[m.value for m in cls]}"
            ) from None


def match_score(
    query: SparseVector,
    doc: SparseVector,
    mode: ScoreMode = ScoreMode.PLAIN,
    idf: IdfTable | None = None,
) -> float:
    """Dot product of query and document over shared tokens.

    PLAIN:         sum_t q_t * d_t
    IDF_WEIGHTED:  sum_t idf(t) * q_t * d_t

    Accumulation is float64 regardless of how weights are stored.
    """
    if mode is ScoreMode.IDF_WEIGHTED and idf is None:
        raise ValueError("idf table required for idf-weighted scoring")
    score = 0.0
    qi, di = 0, 0
    q_entries, d_entries = query.entries, doc.entries
    while qi < len(q_entries) and di < len(d_entries):
        qt, qw = q_entries[qi]
        dt, dw = d_entries[di]
        if qt == dt:
            term = qw * dw
            if mode is ScoreMode.IDF_WEIGHTED:
                term *= idf.lookup(qt)
            score += term
            qi += 1
            di += 1
        elif qt < dt:
            qi += 1
        else:
            di += 1
    return score


def flops_regularizer(batch: Sequence[SparseVector]) -> float:
    """Expected multiplication count proxy: sum_j (mean_i w_j(d_i))^2.

    Penalizes tokens whose mean activation across the batch is high, which is
    what drives posting lists long.
    """
    if len(batch) == 0:
        raise ValueError("empty batch")
    sums: dict[TokenId, float] = {}
    for vector in batch:
        for token_id, weight in vector.entries:
            sums[token_id] = sums.get(token_id, 0.0) + weight
    n = float(len(batch))
    return sum((s / n) ** 2 for s in sums.values())


def theoretical_flops(
    queries: Iterable[SparseVector],
    df: Mapping[TokenId, int],
    corpus_size: int,
) -> float:
    """Mean per-document overlap cost of a query workload against a corpus.

    For one query this is sum_{t in q} df(t) / N, i.e. the expected number of
    token intersections a scorer must multiply out per document. Averaged
    uniformly over the queries.
    """
    if corpus_size <= 0:
        raise ValueError("empty corpus")
    totals = []
    for query in queries:
        totals.append(sum(df.get(t, 0) for t in query.token_ids) / corpus_size)
    if not totals:
        raise ValueError("empty query set")
    return sum(totals) / len(totals)
