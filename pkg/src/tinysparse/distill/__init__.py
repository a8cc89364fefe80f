"""Distillation trainer: encoder, losses, training loop, negative mining."""

from .encoder import (
    EncoderParams,
    count_vector,
    encode_batch,
    encode_document,
    load_encoder,
    save_encoder,
)
from .losses import (
    LossConfig,
    LossOutput,
    TeacherOutput,
    TeacherScores,
    TrainingBatch,
    activation_gradient_parts,
    ensemble_teacher,
    ranking_loss,
    student_scores,
    total_loss_and_grad,
)
from .mining import MinedCandidates, consistency_filter, mine_hard_negatives, read_mined, write_mined
from .training import (
    LogRow,
    TokenCorpus,
    TrainingPair,
    TrainSchedule,
    activation_share_by_idf_quartile,
    corpus_activation_summary,
    read_pairs,
    read_teacher_scores,
    read_training_log,
    synthetic_teachers,
    train,
    write_pairs,
    write_teacher_scores,
    write_training_log,
)

__all__ = [
    "EncoderParams",
    "count_vector",
    "encode_batch",
    "encode_document",
    "load_encoder",
    "save_encoder",
    "LossConfig",
    "LossOutput",
    "TeacherOutput",
    "TeacherScores",
    "TrainingBatch",
    "activation_gradient_parts",
    "ensemble_teacher",
    "ranking_loss",
    "student_scores",
    "total_loss_and_grad",
    "MinedCandidates",
    "consistency_filter",
    "mine_hard_negatives",
    "read_mined",
    "write_mined",
    "LogRow",
    "TokenCorpus",
    "TrainingPair",
    "TrainSchedule",
    "activation_share_by_idf_quartile",
    "corpus_activation_summary",
    "read_pairs",
    "read_teacher_scores",
    "read_training_log",
    "synthetic_teachers",
    "train",
    "write_pairs",
    "write_teacher_scores",
    "write_training_log",
]
