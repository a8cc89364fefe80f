"""Ranking metrics over TREC-style qrels and run files."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Iterable, Mapping

from .core import DataFormatError, ScoredDoc, SparseVector

# qrels: dict query_id -> {doc_id: grade}; run: dict query_id -> ranked hits
Qrels = dict[str, dict[str, int]]
Run = dict[str, list[ScoredDoc]]


def read_qrels(path: str | Path) -> Qrels:
    """Parse `<query_id> 0 <doc_id> <grade>` lines."""
    qrels: Qrels = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise DataFormatError(f"{path}: line {lineno}: expected 4 fields")
            query_id, _, doc_id, grade = parts
            try:
                grade_val = int(grade)
            except ValueError:
                raise DataFormatError(f"{path}: line {lineno}: bad grade {grade!r}") from None
            if grade_val < 0:
                raise DataFormatError(f"{path}: line {lineno}: negative grade")
            by_doc = qrels.setdefault(query_id, {})
            if doc_id in by_doc:
                raise DataFormatError(f"{path}: line {lineno}: duplicate qrels entry")
            by_doc[doc_id] = grade_val
    return qrels


def read_run(path: str | Path) -> Run:
    """Parse `<query_id> Q0 <doc_id> <rank> <score> <tag>` lines.

    Ranks must be contiguous from 1 per query and scores non-increasing.
    """
    staged: dict[str, list[tuple[int, str, float]]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 6:
                raise DataFormatError(f"{path}: line {lineno}: expected 6 fields")
            query_id, _, doc_id, rank, score, _tag = parts
            try:
                rank_val = int(rank)
                score_val = float(score)
            except ValueError:
                raise DataFormatError(f"{path}: line {lineno}: bad rank or score") from None
            staged.setdefault(query_id, []).append((rank_val, doc_id, score_val))
    run: Run = {}
    for query_id, rows in staged.items():
        rows.sort(key=lambda r: r[0])
        seen_docs = set()
        prev_score = math.inf
        for i, (rank_val, doc_id, score_val) in enumerate(rows, start=1):
            if rank_val != i:
                raise DataFormatError(f"{path}: query {query_id}: ranks not contiguous from 1")
            if score_val > prev_score:
                raise DataFormatError(f"{path}: query {query_id}: scores increase with rank")
            if doc_id in seen_docs:
                raise DataFormatError(f"{path}: query {query_id}: duplicate doc {doc_id}")
            seen_docs.add(doc_id)
            prev_score = score_val
        run[query_id] = [ScoredDoc(doc_id, score) for _, doc_id, score in rows]
    return run


def write_run(path: str | Path, run: Mapping[str, Iterable[ScoredDoc]], tag: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for query_id in run:
            for rank, hit in enumerate(run[query_id], start=1):
                fh.write(f"{query_id} Q0 {hit.doc_id} {rank} {hit.score!r} {tag}\n")


def _judged(qrels: Qrels) -> dict[str, dict[str, int]]:
    return {
        q: rels for q, rels in qrels.items() if any(g > 0 for g in rels.values())
    }


def _check_overlap(run: Run, judged: Mapping[str, dict[str, int]]) -> None:
    if not judged or not any(q in run for q in judged):
        raise ValueError("no overlap between run and qrels")


def ndcg_at_k(run: Run, qrels: Qrels, k: int) -> float:
    """Mean NDCG@k with gain 2^grade - 1 and log2(rank + 1) discount.

    Queries with no relevant document are excluded from the mean; judged
    queries missing from the run count as zero.
    """
    if k < 1:
        raise ValueError("k must be positive")
    judged = _judged(qrels)
    _check_overlap(run, judged)
    total = 0.0
    for query_id, rels in judged.items():
        ideal = sorted((g for g in rels.values() if g > 0), reverse=True)[:k]
        idcg = sum((2.0**g - 1.0) / math.log2(i + 2.0) for i, g in enumerate(ideal))
        dcg = 0.0
        for i, hit in enumerate(run.get(query_id, ())[:k]):
            grade = rels.get(hit.doc_id, 0)
            if grade > 0:
                dcg += (2.0**grade - 1.0) / math.log2(i + 2.0)
        total += dcg / idcg
    return total / len(judged)


def mrr_at_k(run: Run, qrels: Qrels, k: int) -> float:
    """Mean reciprocal rank of the first relevant hit within the top k."""
    if k < 1:
        raise ValueError("k must be positive")
    judged = _judged(qrels)
    _check_overlap(run, judged)
    total = 0.0
    for query_id, rels in judged.items():
        for i, hit in enumerate(run.get(query_id, ())[:k]):
            if rels.get(hit.doc_id, 0) > 0:
                total += 1.0 / (i + 1.0)
                break
    return total / len(judged)


def recall_at_k(run: Run, qrels: Qrels, k: int) -> float:
    """Mean fraction of each query's relevant documents found in the top k."""
    if k < 1:
        raise ValueError("k must be positive")
    judged = _judged(qrels)
    _check_overlap(run, judged)
    total = 0.0
    for query_id, rels in judged.items():
        relevant = {d for d, g in rels.items() if g > 0}
        found = sum(1 for hit in run.get(query_id, ())[:k] if hit.doc_id in relevant)
        total += found / len(relevant)
    return total / len(judged)


def expansion_rate(vectors: Iterable[SparseVector]) -> float:
    """Mean number of active tokens per vector."""
    count = 0
    total = 0
    for vector in vectors:
        count += 1
        total += vector.nnz
    if count == 0:
        raise ValueError("empty vector stream")
    return total / count
