"""Document-side encoder: token counts in, sparse activations out.

The query side is deliberately parameter-free, so everything learnable lives
in the document expansion matrix and bias.
"""

from __future__ import annotations

import hashlib
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ..core import DataFormatError, SparseVector, TokenId, Vocabulary


class EncoderFileError(DataFormatError):
    pass


class NotAnEncoderFile(EncoderFileError):
    pass


class UnsupportedEncoderVersion(EncoderFileError):
    pass


class TruncatedEncoderFile(EncoderFileError):
    pass


class EncoderChecksumMismatch(EncoderFileError):
    pass


MAGIC = b"TSPENCDR"
FORMAT_VERSION = 1


@dataclass(eq=False)
class EncoderParams:
    """Dense expansion matrix (vocab x vocab) plus per-token bias, float64."""

    expansion: np.ndarray
    bias: np.ndarray

    def __post_init__(self) -> None:
        self.expansion = np.asarray(self.expansion, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        v = self.bias.shape[0] if self.bias.ndim == 1 else -1
        if self.expansion.ndim != 2 or self.expansion.shape != (v, v):
            raise ValueError(
                f"expansion must be square and match bias: "
                f"{self.expansion.shape} vs {self.bias.shape}"
            )
        if not (np.isfinite(self.expansion).all() and np.isfinite(self.bias).all()):
            raise ValueError("non-finite encoder parameters")

    @classmethod
    def initial(cls, vocab_size: int) -> "EncoderParams":
        """Half-strength identity: each token expands to itself, nothing else."""
        return cls(0.5 * np.eye(vocab_size), np.zeros(vocab_size))

    @property
    def vocab_size(self) -> int:
        return self.bias.shape[0]

    def copy(self) -> "EncoderParams":
        return EncoderParams(self.expansion.copy(), self.bias.copy())


def count_vector(token_ids: Sequence[TokenId], vocab_size: int) -> np.ndarray:
    counts = np.zeros(vocab_size)
    for token_id in token_ids:
        counts[token_id] += 1.0
    return counts


def encode_batch(params: EncoderParams, counts: np.ndarray) -> np.ndarray:
    """Activations for a (N, V) count matrix: log1p(relu(counts @ expansion + bias))."""
    counts = np.asarray(counts, dtype=np.float64)
    z = counts @ params.expansion + params.bias
    return np.log1p(np.maximum(z, 0.0))


def encode_document(
    params: EncoderParams, counts: Mapping[TokenId, float] | np.ndarray
) -> SparseVector:
    """Encode one document's token counts into a sparse activation vector."""
    if isinstance(counts, Mapping):
        dense = np.zeros(params.vocab_size)
        for token_id, count in counts.items():
            dense[token_id] = count
    else:
        dense = np.asarray(counts, dtype=np.float64)
    w = encode_batch(params, dense[None, :])[0]
    nz = np.nonzero(w > 0.0)[0]
    return SparseVector(tuple((int(j), float(w[j])) for j in nz))


def _vocab_digest(vocabulary: Vocabulary) -> bytes:
    h = hashlib.sha256()
    for term in vocabulary.terms:
        raw = term.encode("utf-8")
        h.update(struct.pack("<I", len(raw)))
        h.update(raw)
    return h.digest()


def save_encoder(params: EncoderParams, vocabulary: Vocabulary, path: str | Path) -> None:
    if len(vocabulary) != params.vocab_size:
        raise ValueError("vocabulary size does not match encoder")
    body = struct.pack("<I", params.vocab_size)
    body += _vocab_digest(vocabulary)
    body += params.expansion.astype("<f8").tobytes(order="C")
    body += params.bias.astype("<f8").tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(body)
        fh.write(struct.pack("<I", zlib.crc32(body)))


def load_encoder(path: str | Path, vocabulary: Vocabulary | None = None) -> EncoderParams:
    """Load encoder parameters, optionally pinning them to a vocabulary.

    Passing the vocabulary catches the silent failure mode where an encoder is
    applied to a corpus whose token ids mean something else entirely.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < len(MAGIC) or blob[: len(MAGIC)] != MAGIC:
        raise NotAnEncoderFile(f"{path}: not an encoder file")
    if len(blob) < len(MAGIC) + 8:
        raise TruncatedEncoderFile(f"{path}: truncated encoder file")
    (version,) = struct.unpack_from("<I", blob, len(MAGIC))
    if version != FORMAT_VERSION:
        raise UnsupportedEncoderVersion(f"{path}: unsupported version: {version}")
    body = blob[len(MAGIC) + 4 : -4]
    (declared_crc,) = struct.unpack_from("<I", blob, len(blob) - 4)
    if len(body) < 4 + 32:
        raise TruncatedEncoderFile(f"{path}: truncated encoder file")
    (vocab_size,) = struct.unpack_from("<I", body, 0)
    expected = 4 + 32 + 8 * vocab_size * vocab_size + 8 * vocab_size
    if len(body) < expected:
        raise TruncatedEncoderFile(f"{path}: truncated encoder file")
    if len(body) > expected:
        raise EncoderFileError(f"{path}: trailing bytes")
    if zlib.crc32(body) != declared_crc:
        raise EncoderChecksumMismatch(f"{path}: checksum mismatch")
    digest = body[4 : 4 + 32]
    if vocabulary is not None and _vocab_digest(vocabulary) != digest:
        raise DataFormatError(f"{path}: encoder vocabulary does not match")
    off = 4 + 32
    expansion = np.frombuffer(
        body, dtype="<f8", count=vocab_size * vocab_size, offset=off
    ).reshape(vocab_size, vocab_size)
    off += 8 * vocab_size * vocab_size
    bias = np.frombuffer(body, dtype="<f8", count=vocab_size, offset=off)
    try:
        return EncoderParams(expansion.copy(), bias.copy())
    except ValueError as exc:
        raise EncoderFileError(f"{path}: {exc}") from exc
