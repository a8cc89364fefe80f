"""Top-k search over an inverted index, exact and two-phase."""

from __future__ import annotations

import bisect
import heapq
import logging
import statistics
from dataclasses import dataclass, field

from .core import IdfTable, ScoredDoc, SparseVector, TokenId
from .index import InvertedIndex
from .scoring import ScoreMode

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TwoPhaseParams:
    """First pass keeps only query tokens at or above an IDF threshold.

    window is how many candidates the first pass hands to the rescorer.
    idf_threshold of None means: median IDF of the query's own tokens.
    """

    window: int
    idf_threshold: float | None = None


@dataclass(frozen=True)
class SearchParams:
    k: int
    mode: ScoreMode = ScoreMode.PLAIN
    two_phase: TwoPhaseParams | None = None

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be positive")
        if self.two_phase is not None and self.two_phase.window < self.k:
            raise ValueError("two-phase window must be at least k")


@dataclass
class SearchStats:
    two_phase_fallbacks: int = 0
    queries: int = 0


class _Kept:
    """Heap entry where __lt__ means strictly worse: lower score, then higher doc_id."""

    __slots__ = ("score", "doc_id", "ordinal")

    def __init__(self, score: float, doc_id: str, ordinal: int) -> None:
        self.score = score
        self.doc_id = doc_id
        self.ordinal = ordinal

    def __lt__(self, other: "_Kept") -> bool:
        if self.score != other.score:
            return self.score < other.score
        return self.doc_id > other.doc_id


def _weighted_tokens(
    query: SparseVector,
    mode: ScoreMode,
    idf: IdfTable | None,
    tokens: tuple[TokenId, ...] | None = None,
) -> list[tuple[TokenId, float]]:
    if mode is ScoreMode.IDF_WEIGHTED and idf is None:
        raise ValueError("idf table required for idf-weighted scoring")
    keep = set(tokens) if tokens is not None else None
    out = []
    for token_id, weight in query.entries:
        if keep is not None and token_id not in keep:
            continue
        if mode is ScoreMode.IDF_WEIGHTED:
            weight = weight * idf.lookup(token_id)
        out.append((token_id, weight))
    return out


def _daat_top(
    index: InvertedIndex,
    weighted: list[tuple[TokenId, float]],
    k: int,
) -> list[_Kept]:
    """Stream all matching documents once, keeping the best k in a bounded heap.

    Cursors advance in doc-ordinal order; contributions for one document are
    summed in ascending token order, so scores are bit-identical to a
    term-at-a-time dot product over sorted entries.
    """
    cursors: list[tuple[list, float]] = []
    heads: list[tuple[int, int, int]] = []  # (ordinal, cursor_idx, position)
    for token_id, qweight in weighted:
        plist = index.postings_for(token_id)
        if plist:
            cursors.append((plist, qweight))
            heads.append((plist[0].doc_ordinal, len(cursors) - 1, 0))
    heapq.heapify(heads)

    kept: list[_Kept] = []
    doc_ids = index.doc_ids
    while heads:
        ordinal = heads[0][0]
        score = 0.0
        while heads and heads[0][0] == ordinal:
            _, ci, pos = heapq.heappop(heads)
            plist, qweight = cursors[ci]
            score += qweight * plist[pos].weight
            if pos + 1 < len(plist):
                heapq.heappush(heads, (plist[pos + 1].doc_ordinal, ci, pos + 1))
        entry = _Kept(score, doc_ids[ordinal], ordinal)
        if len(kept) < k:
            heapq.heappush(kept, entry)
        else:
            heapq.heappushpop(kept, entry)
    return kept


def search(
    index: InvertedIndex,
    query: SparseVector,
    params: SearchParams,
    idf: IdfTable | None = None,
) -> list[ScoredDoc]:
    """Exact top-k by additive match score.

    Only documents sharing at least one token with the query can score, so
    fewer than k results means fewer than k documents matched at all.
    """
    if query.nnz == 0:
        return []
    weighted = _weighted_tokens(query, params.mode, idf)
    kept = _daat_top(index, weighted, params.k)
    return sorted(ScoredDoc(e.doc_id, e.score) for e in kept)


def _posting_weight(plist: list, ordinal: int) -> float:
    i = bisect.bisect_left(plist, (ordinal,))
    if i < len(plist) and plist[i].doc_ordinal == ordinal:
        return plist[i].weight
    return 0.0


def search_two_phase(
    index: InvertedIndex,
    query: SparseVector,
    params: SearchParams,
    idf: IdfTable,
    stats: SearchStats | None = None,
) -> list[ScoredDoc]:
    """Candidate generation on high-IDF tokens, then full rescoring.

    Phase 1 scores only the query tokens whose IDF clears the threshold and
    keeps the top `window` documents. Phase 2 rescores exactly those
    candidates with every query token. If no token clears the threshold the
    search falls back to the exact path and counts the event.

    A window covering the whole corpus cannot prune, but the high-IDF filter
    still could: a document matching only low-IDF query tokens never enters
    the candidate heap. The exhaustive window is therefore served by the
    exact path directly, which keeps window >= corpus_size identical to
    search() for every query.
    """
    if params.two_phase is None:
        raise ValueError("two-phase parameters missing")
    if idf is None:
        raise ValueError("idf table required for two-phase search")
    if stats is not None:
        stats.queries += 1
    if query.nnz == 0:
        return []
    if params.two_phase.window >= index.corpus_size:
        return search(index, query, SearchParams(k=params.k, mode=params.mode), idf)

    tokens = query.token_ids
    threshold = params.two_phase.idf_threshold
    if threshold is None:
        threshold = statistics.median(idf.lookup(t) for t in tokens)
    phase1 = tuple(t for t in tokens if idf.lookup(t) >= threshold)
    if not phase1:
        logger.warning(
            "two-phase fallback: no query token meets idf threshold %.6g", threshold
        )
        if stats is not None:
            stats.two_phase_fallbacks += 1
        return search(index, query, SearchParams(k=params.k, mode=params.mode), idf)

    first = _daat_top(
        index, _weighted_tokens(query, params.mode, idf, tokens=phase1), params.two_phase.window
    )

    weighted = _weighted_tokens(query, params.mode, idf)
    rescored = []
    for entry in first:
        score = 0.0
        for token_id, qweight in weighted:
            score += qweight * _posting_weight(index.postings_for(token_id), entry.ordinal)
        if score > 0.0:
            rescored.append(ScoredDoc(entry.doc_id, score))
    return sorted(rescored)[: params.k]
