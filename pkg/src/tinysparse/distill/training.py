"""Gradient-descent training loop over query/positive pairs.

Plain full-gradient steps with a fixed learning rate: at desk scale the
point is determinism and inspectability, not wall-clock speed.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from ..core import (
    DataFormatError,
    IdfTable,
    SparseVector,
    Vocabulary,
    binarize_query,
    compute_idf,
)
from .encoder import EncoderParams, encode_batch
from .losses import LossConfig, TeacherOutput, TeacherScores, TrainingBatch, total_loss_and_grad

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class TokenCorpus:
    """Documents as raw token counts over a fixed vocabulary."""

    vocabulary: Vocabulary
    doc_ids: tuple[str, ...]
    counts: np.ndarray  # (D, V) float64

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts, dtype=np.float64)
        if self.counts.shape != (len(self.doc_ids), len(self.vocabulary)):
            raise ValueError("counts shape does not match doc_ids x vocabulary")
        self._ordinals = {doc_id: i for i, doc_id in enumerate(self.doc_ids)}
        if len(self._ordinals) != len(self.doc_ids):
            raise ValueError("duplicate doc ids in corpus")

    @classmethod
    def from_token_docs(
        cls,
        docs: Sequence[tuple[str, Sequence[str]]],
        vocabulary: Vocabulary | None = None,
    ) -> "TokenCorpus":
        if vocabulary is None:
            terms = sorted({t for _, tokens in docs for t in tokens})
            vocabulary = Vocabulary(tuple(terms))
        counts = np.zeros((len(docs), len(vocabulary)))
        for i, (_, tokens) in enumerate(docs):
            for token in tokens:
                token_id = vocabulary.get(token)
                if token_id is None:
                    raise DataFormatError(f"token {token!r} not in vocabulary")
                counts[i, token_id] += 1.0
        return cls(vocabulary, tuple(doc_id for doc_id, _ in docs), counts)

    def ordinal(self, doc_id: str) -> int:
        try:
            return self._ordinals[doc_id]
        except KeyError:
            raise KeyError(f"unknown doc_id: {doc_id}") from None

    def idf(self, *, source: str = "train-corpus") -> IdfTable:
        token_lists = [np.nonzero(row > 0)[0].tolist() for row in self.counts]
        return compute_idf(token_lists, source=source)

    @property
    def size(self) -> int:
        return len(self.doc_ids)


@dataclass(frozen=True)
class TrainingPair:
    query_id: str
    query_tokens: tuple[str, ...]
    positive_id: str


def read_pairs(path: str | Path) -> list[TrainingPair]:
    pairs = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"{path}: line {lineno}: invalid JSON: {exc}") from exc
            try:
                pairs.append(
                    TrainingPair(
                        query_id=str(obj["query_id"]),
                        query_tokens=tuple(str(t) for t in obj["query_tokens"]),
                        positive_id=str(obj["positive_id"]),
                    )
                )
            except (KeyError, TypeError) as exc:
                raise DataFormatError(f"{path}: line {lineno}: {exc}") from exc
    return pairs


def write_pairs(path: str | Path, pairs: Iterable[TrainingPair]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for pair in pairs:
            fh.write(
                json.dumps(
                    {
                        "query_id": pair.query_id,
                        "query_tokens": list(pair.query_tokens),
                        "positive_id": pair.positive_id,
                    }
                )
                + "\n"
            )


def read_teacher_scores(
    path: str | Path,
) -> dict[str, tuple[tuple[str, ...], TeacherScores]]:
    """Per-query candidate lists with raw scores from each teacher."""
    table: dict[str, tuple[tuple[str, ...], TeacherScores]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                query_id = str(obj["query_id"])
                doc_ids = tuple(str(d) for d in obj["doc_ids"])
                outputs = tuple(
                    TeacherOutput(
                        teacher_id=str(t["id"]),
                        scores=tuple(float(s) for s in t["scores"]),
                        weight=float(t.get("weight", 1.0)),
                    )
                    for t in obj["teachers"]
                )
                table[query_id] = (doc_ids, TeacherScores(outputs))
            except (KeyError, TypeError, ValueError) as exc:
                raise DataFormatError(f"{path}: line {lineno}: {exc}") from exc
    return table


def write_teacher_scores(
    path: str | Path,
    table: Mapping[str, tuple[tuple[str, ...], TeacherScores]],
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for query_id, (doc_ids, teacher) in table.items():
            obj = {
                "query_id": query_id,
                "doc_ids": list(doc_ids),
                "teachers": [
                    {"id": o.teacher_id, "weight": o.weight, "scores": list(o.scores)}
                    for o in teacher.outputs
                ],
            }
            fh.write(json.dumps(obj) + "\n")


def synthetic_teachers(
    rng: np.random.Generator,
    query_counts: np.ndarray,
    candidates: np.ndarray,
    positive_index: int,
) -> TeacherScores:
    """Two stand-in teachers with deliberately mismatched score ranges.

    The first mimics a dense reranker: noisy relevance on a scale of tens.
    The second scores raw token overlap, landing near single digits. Feeding
    both through the ensemble exercises the range mismatch the normalization
    is there to absorb.
    """
    overlap = candidates @ query_counts
    n = candidates.shape[0]
    onehot = np.zeros(n)
    onehot[positive_index] = 1.0
    dense_like = 40.0 + 12.0 * overlap + 9.0 * onehot + rng.normal(0.0, 2.5, size=n)
    overlap_like = overlap + 0.5 * onehot + rng.normal(0.0, 0.05, size=n)
    return TeacherScores(
        (
            TeacherOutput("dense-proxy", tuple(dense_like.tolist()), 1.0),
            TeacherOutput("overlap-proxy", tuple(overlap_like.tolist()), 1.0),
        )
    )


@dataclass(frozen=True)
class TrainSchedule:
    steps: int = 100
    batch_size: int = 8
    negatives_per_query: int = 7
    learning_rate: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if self.batch_size < 1 or self.negatives_per_query < 1:
            raise ValueError("batch_size and negatives_per_query must be >= 1")
        if not self.learning_rate > 0.0:
            raise ValueError("learning_rate must be positive")


class LogRow(NamedTuple):
    step: int
    loss_total: float
    loss_rank: float
    loss_flops: float
    mean_nnz: float


LOG_FIELDS = ("step", "loss_total", "loss_rank", "loss_flops", "mean_nnz")


def write_training_log(path: str | Path, rows: Iterable[LogRow]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(LOG_FIELDS)
        for row in rows:
            writer.writerow(
                [row.step, repr(row.loss_total), repr(row.loss_rank),
                 repr(row.loss_flops), repr(row.mean_nnz)]
            )


def read_training_log(path: str | Path) -> list[LogRow]:
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != LOG_FIELDS:
            raise DataFormatError(f"{path}: unexpected training log header")
        for rec in reader:
            rows.append(
                LogRow(
                    int(rec["step"]),
                    float(rec["loss_total"]),
                    float(rec["loss_rank"]),
                    float(rec["loss_flops"]),
                    float(rec["mean_nnz"]),
                )
            )
    return rows


@dataclass(frozen=True)
class _PreparedPair:
    query_vec: SparseVector
    query_counts: np.ndarray
    positive_ordinal: int
    fixed_candidates: np.ndarray | None
    fixed_positive_index: int | None
    fixed_teacher: TeacherScores | None


def _prepare_pairs(
    corpus: TokenCorpus,
    pairs: Sequence[TrainingPair],
    teacher_table: Mapping[str, tuple[tuple[str, ...], TeacherScores]] | None,
) -> list[_PreparedPair]:
    prepared = []
    for pair in pairs:
        query_vec, dropped = binarize_query(pair.query_tokens, corpus.vocabulary)
        if query_vec.nnz == 0:
            raise DataFormatError(
                f"query {pair.query_id}: no in-vocabulary tokens ({dropped} dropped)"
            )
        try:
            positive = corpus.ordinal(pair.positive_id)
        except KeyError:
            raise DataFormatError(
                f"query {pair.query_id}: positive {pair.positive_id!r} not in corpus"
            ) from None
        query_counts = np.zeros(len(corpus.vocabulary))
        for token_id in query_vec.token_ids:
            query_counts[token_id] = 1.0

        fixed_candidates = fixed_positive = fixed_teacher = None
        if teacher_table is not None:
            if pair.query_id not in teacher_table:
                raise DataFormatError(f"no teacher scores for query {pair.query_id}")
            doc_ids, fixed_teacher = teacher_table[pair.query_id]
            if pair.positive_id not in doc_ids:
                raise DataFormatError(
                    f"query {pair.query_id}: positive missing from teacher candidates"
                )
            fixed_positive = doc_ids.index(pair.positive_id)
            fixed_candidates = np.stack([corpus.counts[corpus.ordinal(d)] for d in doc_ids])
        prepared.append(
            _PreparedPair(
                query_vec, query_counts, positive, fixed_candidates, fixed_positive,
                fixed_teacher,
            )
        )
    return prepared


def train(
    corpus: TokenCorpus,
    pairs: Sequence[TrainingPair],
    config: LossConfig,
    schedule: TrainSchedule,
    idf: IdfTable | None = None,
    teacher_table: Mapping[str, tuple[tuple[str, ...], TeacherScores]] | None = None,
) -> tuple[EncoderParams, list[LogRow]]:
    """Run the distillation loop and return final parameters plus the log.

    Without a teacher_table, negatives are resampled each step and scored by
    the synthetic teacher pair; with one, each query trains against its fixed
    candidate list. Identical inputs and seed give bitwise-identical output.
    """
    if not pairs:
        raise ValueError("no training pairs")
    if idf is None:
        idf = corpus.idf()
    prepared = _prepare_pairs(corpus, pairs, teacher_table)
    params = EncoderParams.initial(len(corpus.vocabulary))
    rng = np.random.default_rng(schedule.seed)
    rows: list[LogRow] = []

    for step in range(schedule.steps):
        take = min(schedule.batch_size, len(prepared))
        chosen = rng.choice(len(prepared), size=take, replace=False)
        grad_e = np.zeros_like(params.expansion)
        grad_b = np.zeros_like(params.bias)
        loss_sum = rank_sum = flops_sum = nnz_sum = 0.0
        for qi in chosen:
            prep = prepared[qi]
            if prep.fixed_candidates is not None:
                batch = TrainingBatch(
                    query=prep.query_vec,
                    candidates=prep.fixed_candidates,
                    positive_index=prep.fixed_positive_index,
                    teacher=prep.fixed_teacher,
                )
            else:
                pool = np.delete(np.arange(corpus.size), prep.positive_ordinal)
                n_neg = min(schedule.negatives_per_query, len(pool))
                negatives = rng.choice(pool, size=n_neg, replace=False)
                ordinals = np.concatenate(([prep.positive_ordinal], negatives))
                candidates = corpus.counts[ordinals]
                teacher = synthetic_teachers(rng, prep.query_counts, candidates, 0)
                batch = TrainingBatch(
                    query=prep.query_vec,
                    candidates=candidates,
                    positive_index=0,
                    teacher=teacher,
                )
            out = total_loss_and_grad(params, batch, idf, config)
            grad_e += out.grad_expansion
            grad_b += out.grad_bias
            loss_sum += out.loss
            rank_sum += out.rank_loss
            flops_sum += out.flops_value
            nnz_sum += out.mean_nnz
        params = EncoderParams(
            params.expansion - schedule.learning_rate * grad_e / take,
            params.bias - schedule.learning_rate * grad_b / take,
        )
        rows.append(
            LogRow(step, loss_sum / take, rank_sum / take, flops_sum / take, nnz_sum / take)
        )
    return params, rows


def corpus_activation_summary(
    params: EncoderParams, corpus: TokenCorpus
) -> tuple[float, float]:
    """(mean nnz per encoded document, density penalty) over the whole corpus."""
    w = encode_batch(params, corpus.counts)
    mean_nnz = float((w > 0.0).sum(axis=1).mean())
    flops = float((w.mean(axis=0) ** 2).sum())
    return mean_nnz, flops


def activation_share_by_idf_quartile(
    params: EncoderParams, corpus: TokenCorpus, idf: IdfTable
) -> float:
    """Share of total activation mass on the lowest-IDF quartile of tokens.

    Tokens are ranked by IDF; the bottom quarter (most common tokens) is the
    set whose activations an IDF-aware trainer should be most willing to
    sacrifice to the density penalty.
    """
    w = encode_batch(params, corpus.counts)
    mass = w.sum(axis=0)
    vocab_size = len(corpus.vocabulary)
    idfs = np.array([idf.lookup(t) for t in range(vocab_size)])
    order = np.argsort(idfs, kind="stable")
    bottom = order[: max(1, vocab_size // 4)]
    total = mass.sum()
    if total <= 0.0:
        return 0.0
    return float(mass[bottom].sum() / total)
