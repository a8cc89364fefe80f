"""Ranking distillation loss with an activation-density penalty.

The trainer matches the student's score distribution over a candidate list to
a teacher ensemble via KL divergence, while a quadratic penalty on mean token
activation keeps the learned vectors sparse.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import IdfTable, SparseVector
from .encoder import EncoderParams, encode_batch


@dataclass(frozen=True)
class TeacherOutput:
    """Raw candidate scores from one teacher, on whatever scale it produces."""

    teacher_id: str
    scores: tuple[float, ...]
    weight: float = 1.0

    def __post_init__(self) -> None:
        arr = np.asarray(self.scores, dtype=np.float64)
        if not np.isfinite(arr).all():
            raise ValueError(f"teacher {self.teacher_id}: non-finite scores")
        if not (np.isfinite(self.weight) and self.weight >= 0.0):
            raise ValueError(f"teacher {self.teacher_id}: bad weight {self.weight}")


@dataclass(frozen=True)
class TeacherScores:
    outputs: tuple[TeacherOutput, ...]

    def __post_init__(self) -> None:
        if not self.outputs:
            raise ValueError("no teachers")
        n = len(self.outputs[0].scores)
        if any(len(o.scores) != n for o in self.outputs):
            raise ValueError("teachers scored different candidate counts")
        if sum(o.weight for o in self.outputs) <= 0.0:
            raise ValueError("teacher weights sum to zero")

    @property
    def n_candidates(self) -> int:
        return len(self.outputs[0].scores)


def ensemble_teacher(
    teacher: TeacherScores, scale: float, normalize: bool = True
) -> np.ndarray:
    """Combine heterogeneous teachers into one target score list.

    Each teacher is min-max normalized into [0, 1] first (a constant teacher
    maps to 0.5), then the weighted mean is scaled by `scale`. Without the
    normalization a teacher with a wide score range simply drowns out the
    others, which is exactly the failure mode this exists to avoid;
    normalize=False keeps that naive behaviour available for comparison.
    """
    if not (np.isfinite(scale) and scale > 0.0):
        raise ValueError(f"scale must be positive, got {scale}")
    total_weight = sum(o.weight for o in teacher.outputs)
    combined = np.zeros(teacher.n_candidates)
    for output in teacher.outputs:
        scores = np.asarray(output.scores, dtype=np.float64)
        if normalize:
            lo, hi = scores.min(), scores.max()
            if hi == lo:
                scores = np.full_like(scores, 0.5)
            else:
                scores = (scores - lo) / (hi - lo)
        combined += (output.weight / total_weight) * scores
    return scale * combined


def _log_softmax(x: np.ndarray) -> np.ndarray:
    z = x - x.max()
    return z - np.log(np.exp(z).sum())


def ranking_loss(student: np.ndarray, teacher: np.ndarray) -> float:
    """KL divergence from the teacher's softmax to the student's.

    KL(p || q) = sum_i p_i (log p_i - log q_i) with p = softmax(teacher),
    q = softmax(student), computed via log-sum-exp so large scores are safe.
    """
    student = np.asarray(student, dtype=np.float64)
    teacher = np.asarray(teacher, dtype=np.float64)
    if student.shape != teacher.shape or student.ndim != 1:
        raise ValueError(f"score shape mismatch: {student.shape} vs {teacher.shape}")
    if student.shape[0] < 2:
        raise ValueError("need at least two candidates")
    log_p = _log_softmax(teacher)
    log_q = _log_softmax(student)
    p = np.exp(log_p)
    return float((p * (log_p - log_q)).sum())


@dataclass(frozen=True)
class LossConfig:
    lambda_d: float
    scale_s: float
    idf_aware: bool = True
    # normalize_teachers=False keeps the naive sum-of-raw-scores ensemble
    # available so the two can be compared end to end.
    normalize_teachers: bool = True

    def __post_init__(self) -> None:
        if not (np.isfinite(self.lambda_d) and self.lambda_d >= 0.0):
            raise ValueError(f"lambda_d must be >= 0, got {self.lambda_d}")
        if not (np.isfinite(self.scale_s) and self.scale_s > 0.0):
            raise ValueError(f"scale_s must be positive, got {self.scale_s}")

    @classmethod
    def pretrain(cls, idf_aware: bool = True) -> "LossConfig":
        return cls(lambda_d=1e-7, scale_s=10.0, idf_aware=idf_aware)

    @classmethod
    def finetune(cls, idf_aware: bool = True) -> "LossConfig":
        return cls(lambda_d=0.02, scale_s=30.0, idf_aware=idf_aware)


@dataclass(eq=False)
class TrainingBatch:
    """One query, its candidate documents as token counts, and teacher scores.

    candidates is an (N, V) count matrix; row positive_index is the positive.
    The query must be binary: matching is all-or-nothing on the query side.
    """

    query: SparseVector
    candidates: np.ndarray
    positive_index: int
    teacher: TeacherScores

    def __post_init__(self) -> None:
        self.candidates = np.asarray(self.candidates, dtype=np.float64)
        if self.candidates.ndim != 2:
            raise ValueError("candidates must be a 2-d count matrix")
        n = self.candidates.shape[0]
        if n < 2:
            raise ValueError("need at least two candidates")
        if not (0 <= self.positive_index < n):
            raise ValueError(f"positive_index {self.positive_index} out of range")
        if not np.isfinite(self.candidates).all() or (self.candidates < 0).any():
            raise ValueError("candidate counts must be finite and non-negative")
        if any(w != 1.0 for _, w in self.query.entries):
            raise ValueError("query must be binary")
        if self.teacher.n_candidates != n:
            raise ValueError("teacher scored a different candidate count")

    @property
    def n_candidates(self) -> int:
        return self.candidates.shape[0]


def _query_weights(
    batch: TrainingBatch, idf: IdfTable | None, idf_aware: bool, vocab_size: int
) -> np.ndarray:
    if idf_aware and idf is None:
        raise ValueError("idf table required when idf_aware is set")
    qw = np.zeros(vocab_size)
    for token_id, weight in batch.query.entries:
        qw[token_id] = weight * (idf.lookup(token_id) if idf_aware else 1.0)
    return qw


def student_scores(
    params: EncoderParams,
    batch: TrainingBatch,
    idf: IdfTable | None,
    idf_aware: bool,
) -> np.ndarray:
    """Additive match scores of the student against each candidate."""
    w = encode_batch(params, batch.candidates)
    return w @ _query_weights(batch, idf, idf_aware, params.vocab_size)


@dataclass(frozen=True)
class LossOutput:
    loss: float
    rank_loss: float
    flops_value: float  # raw density penalty, before lambda_d
    mean_nnz: float
    grad_expansion: np.ndarray
    grad_bias: np.ndarray


def _forward(
    params: EncoderParams,
    batch: TrainingBatch,
    idf: IdfTable | None,
    config: LossConfig,
):
    w = encode_batch(params, batch.candidates)
    qw = _query_weights(batch, idf, config.idf_aware, params.vocab_size)
    s_student = w @ qw
    target = ensemble_teacher(
        batch.teacher, config.scale_s, normalize=config.normalize_teachers
    )
    log_p = _log_softmax(target)
    log_q = _log_softmax(s_student)
    p = np.exp(log_p)
    q = np.exp(log_q)
    return w, qw, p, q, log_p, log_q


def activation_gradient_parts(
    params: EncoderParams,
    batch: TrainingBatch,
    idf: IdfTable | None,
    config: LossConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """Loss gradients with respect to the candidate activations, split in two.

    Returns (rank_part, density_part), each (N, V):
      rank_part[i, t]    = idf(t) * q_t * (softmax(student)_i - softmax(teacher)_i)
                           (idf factor only when idf_aware)
      density_part[i, t] = (2 / N^2) * sum_i' w[i', t], before lambda_d.

    The rank part scales linearly with the query weighting while the density
    part never sees it; that asymmetry is what shelters rare tokens.
    """
    w, qw, p, q, _, _ = _forward(params, batch, idf, config)
    n = batch.n_candidates
    rank_part = np.outer(q - p, qw)
    density_part = np.tile((2.0 / n**2) * w.sum(axis=0), (n, 1))
    return rank_part, density_part


def total_loss_and_grad(
    params: EncoderParams,
    batch: TrainingBatch,
    idf: IdfTable | None,
    config: LossConfig,
) -> LossOutput:
    """Distillation loss and its exact gradient for one batch.

    loss = KL(softmax(teacher) || softmax(student))
         + lambda_d * sum_j (mean_i w[i, j])^2

    Backprop through w = log1p(relu(z)), z = counts @ expansion + bias:
    dw/dz = 1/(1+z) where z > 0, else 0.
    """
    w, qw, p, q, log_p, log_q = _forward(params, batch, idf, config)
    n = batch.n_candidates

    rank = float((p * (log_p - log_q)).sum())
    col_means = w.mean(axis=0)
    flops = float((col_means**2).sum())
    loss = rank + config.lambda_d * flops

    dloss_dw = np.outer(q - p, qw) + config.lambda_d * (2.0 / n**2) * w.sum(axis=0)
    z = batch.candidates @ params.expansion + params.bias
    dw_dz = np.where(z > 0.0, 1.0 / (1.0 + np.maximum(z, 0.0)), 0.0)
    dloss_dz = dloss_dw * dw_dz
    grad_expansion = batch.candidates.T @ dloss_dz
    grad_bias = dloss_dz.sum(axis=0)

    if not (
        np.isfinite(loss)
        and np.isfinite(grad_expansion).all()
        and np.isfinite(grad_bias).all()
    ):
        raise ValueError("non-finite loss or gradient")

    return LossOutput(
        loss=loss,
        rank_loss=rank,
        flops_value=flops,
        mean_nnz=float((w > 0.0).sum(axis=1).mean()),
        grad_expansion=grad_expansion,
        grad_bias=grad_bias,
    )
