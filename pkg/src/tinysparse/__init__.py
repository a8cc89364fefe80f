"""tinysparse: inference-free sparse retrieval with a desk-scale distillation trainer.

Documents are encoded offline into sparse token-weight vectors; queries stay
binary bags of tokens, so query latency is pure index arithmetic. The distill
subpackage trains the document encoder against a teacher ensemble while a
density penalty keeps posting lists short.
"""

from .core import (
    DataFormatError,
    IdfTable,
    ScoredDoc,
    SparseVector,
    TokenId,
    Vocabulary,
    binarize_query,
    compute_idf,
    idf_from_document_frequencies,
    read_idf,
    tokenize,
    write_idf,
)
from .evaluation import expansion_rate, mrr_at_k, ndcg_at_k, recall_at_k
from .index import InvertedIndex, Posting, build_index, load_index, save_index
from .retrieval import (
    SearchParams,
    SearchStats,
    TwoPhaseParams,
    search,
    search_two_phase,
)
from .scoring import ScoreMode, flops_regularizer, match_score, theoretical_flops

__version__ = "0.1.0"

__all__ = [
    "DataFormatError",
    "IdfTable",
    "ScoredDoc",
    "SparseVector",
    "TokenId",
    "Vocabulary",
    "binarize_query",
    "compute_idf",
    "idf_from_document_frequencies",
    "read_idf",
    "tokenize",
    "write_idf",
    "expansion_rate",
    "mrr_at_k",
    "ndcg_at_k",
    "recall_at_k",
    "InvertedIndex",
    "Posting",
    "build_index",
    "load_index",
    "save_index",
    "SearchParams",
    "SearchStats",
    "TwoPhaseParams",
    "search",
    "search_two_phase",
    "ScoreMode",
    "flops_regularizer",
    "match_score",
    "theoretical_flops",
    "__version__",
]
