"""Hard-negative mining and the rank-based consistency filter."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from ..core import DataFormatError, IdfTable, SparseVector
from ..index import InvertedIndex
from ..retrieval import SearchParams, search
from ..scoring import ScoreMode


@dataclass(frozen=True)
class MinedCandidates:
    """Candidate list for one query: positive first, then retrieved negatives.

    positive_rank is where the positive actually landed in the raw top-M
    (1-based), or None if it was not retrieved at all.
    """

    query_id: str
    doc_ids: tuple[str, ...]
    positive_rank: int | None

    def __post_init__(self) -> None:
        if not self.doc_ids:
            raise ValueError("empty candidate list")
        if self.positive_rank is not None and self.positive_rank < 1:
            raise ValueError("positive_rank is 1-based")


def mine_hard_negatives(
    index: InvertedIndex,
    queries: Sequence[tuple[str, SparseVector]],
    positives: Mapping[str, str],
    m: int,
    mode: ScoreMode = ScoreMode.PLAIN,
    idf: IdfTable | None = None,
) -> list[MinedCandidates]:
    """Top-m exact search per query, with the known positive moved to front.

    Negatives keep their retrieval order. The list is capped at m entries
    including the positive, so at most m-1 negatives survive.
    """
    if m < 1:
        raise ValueError("m must be positive")
    mined = []
    for query_id, query in queries:
        if query_id not in positives:
            raise DataFormatError(f"no positive for query {query_id}")
        positive_id = positives[query_id]
        hits = search(index, query, SearchParams(k=m, mode=mode), idf)
        rank = None
        for i, hit in enumerate(hits):
            if hit.doc_id == positive_id:
                rank = i + 1
                break
        negatives = [h.doc_id for h in hits if h.doc_id != positive_id]
        doc_ids = (positive_id, *negatives[: m - 1])
        mined.append(MinedCandidates(query_id, doc_ids, rank))
    return mined


def consistency_filter(
    mined: Iterable[MinedCandidates], k: int = 10
) -> list[MinedCandidates]:
    """Keep only queries whose positive ranked within the top k.

    A positive the current index cannot even retrieve is as likely a labeling
    artifact as a hard example; dropping it keeps the teacher from being
    asked to explain noise. k=0 therefore drops everything.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    return [m for m in mined if m.positive_rank is not None and m.positive_rank <= k]


def write_mined(path: str | Path, mined: Iterable[MinedCandidates]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in mined:
            fh.write(
                json.dumps(
                    {
                        "query_id": row.query_id,
                        "doc_ids": list(row.doc_ids),
                        "positive_rank": row.positive_rank,
                    }
                )
                + "\n"
            )


def read_mined(path: str | Path) -> list[MinedCandidates]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                rank = obj.get("positive_rank")
                rows.append(
                    MinedCandidates(
                        query_id=str(obj["query_id"]),
                        doc_ids=tuple(str(d) for d in obj["doc_ids"]),
                        positive_rank=None if rank is None else int(rank),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise DataFormatError(f"{path}: line {lineno}: {exc}") from exc
    return rows
