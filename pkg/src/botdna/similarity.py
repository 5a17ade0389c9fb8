"""Block-frequency vectors and all-pairs cosine similarity."""

from __future__ import annotations

import csv
import struct
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .core import GAP, BehaviourSequence

BINARY_MAGIC = b"BDNASIM1"


class EmptySequence(ValueError):
    pass


class ZeroVector(ValueError):
    pass


class TooFewAccounts(ValueError):
    pass


@dataclass(frozen=True)
class BlockFrequencyVector:
    account_id: str
    counts: dict[str, int]

    @property
    def total(self):
        return sum(self.counts.values())


@dataclass
class SimilarityMatrix:
    account_ids: list[str]
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        m = len(self.account_ids)
        if self.values.shape != (m, m):
            raise ValueError("matrix shape does not match account list")

    def __len__(self):
        return len(self.account_ids)

    def index(self, account_id):
        return self.account_ids.index(account_id)

    def subset(self, account_ids):
        idx = [self.account_ids.index(a) for a in account_ids]
        return SimilarityMatrix(list(account_ids), self.values[np.ix_(idx, idx)])


def vectorize(seq: BehaviourSequence | Sequence[str], account_id=None) -> BlockFrequencyVector:
    """Count whole blocks (non-overlapping 7-mers) in a gap-free sequence."""
    blocks = seq.blocks if isinstance(seq, BehaviourSequence) else tuple(seq)
    if account_id is None:
        account_id = seq.account_id if isinstance(seq, BehaviourSequence) else ""
    if not blocks:
        raise EmptySequence(account_id)
    if any(GAP in b for b in blocks):
        raise ValueError("gap blocks cannot be vectorized")
    return BlockFrequencyVector(account_id, dict(sorted(Counter(blocks).items())))


def cosine(v1: BlockFrequencyVector, v2: BlockFrequencyVector) -> float:
    if v1.total == 0 or v2.total == 0:
        raise ZeroVector
    keys = sorted(set(v1.counts) | set(v2.counts))
    a = np.array([v1.counts.get(k, 0) for k in keys], dtype=np.float64)
    b = np.array([v2.counts.get(k, 0) for k in keys], dtype=np.float64)
    value = np.sum(a * b) / (np.sqrt(np.sum(a * a)) * np.sqrt(np.sum(b * b)))
    return float(min(max(value, 0.0), 1.0))


def count_matrix(vectors: Sequence[BlockFrequencyVector], vocabulary=None):
    """Dense ``(m, V)`` float64 count matrix and its (sorted) vocabulary."""
    if vocabulary is None:
        vocabulary = sorted({b for v in vectors for b in v.counts})
    col = {b: j for j, b in enumerate(vocabulary)}
    X = np.zeros((len(vectors), len(vocabulary)), dtype=np.float64)
    for i, v in enumerate(vectors):
        for b, c in v.counts.items():
            if b in col:
                X[i, col[b]] = c
    return X, list(vocabulary)


def _cosine_rows(X, norms, rows):
    # each cell is an independent contiguous reduction, so results do not
    # depend on how rows are distributed across workers
    out = []
    for i in rows:
        dots = np.sum(X[i] * X[i + 1:], axis=1)
        out.append((i, np.clip(dots / (norms[i] * norms[i + 1:]), 0.0, 1.0)))
    return out


def cosine_matrix(X: np.ndarray, n_jobs: int = 1) -> np.ndarray:
    """Cosine similarity of the rows of ``X``; upper triangle computed once."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    m = X.shape[0]
    norms = np.sqrt(np.sum(X * X, axis=1))
    if np.any(norms == 0):
        raise ZeroVector
    M = np.eye(m)
    n_jobs = max(1, int(n_jobs or 1))
    if n_jobs == 1:
        chunks = [_cosine_rows(X, norms, range(m))]
    else:
        with ThreadPoolExecutor(n_jobs) as pool:
            chunks = list(pool.map(lambda r: _cosine_rows(X, norms, r),
                                   [range(k, m, n_jobs) for k in range(n_jobs)]))
    for chunk in chunks:
        for i, row in chunk:
            M[i, i + 1:] = row
            M[i + 1:, i] = row
    return M


def similarity_matrix(vectors: Sequence[BlockFrequencyVector], n_jobs: int = 1) -> SimilarityMatrix:
    if len(vectors) < 2:
        raise TooFewAccounts(len(vectors))
    X, _ = count_matrix(vectors)
    return SimilarityMatrix([v.account_id for v in vectors], cosine_matrix(X, n_jobs))


def to_dissimilarity(M: SimilarityMatrix | np.ndarray) -> np.ndarray:
    values = M.values if isinstance(M, SimilarityMatrix) else np.asarray(M, dtype=np.float64)
    D = 1.0 - values
    np.fill_diagonal(D, 0.0)
    return D


def write_matrix_csv(M: SimilarityMatrix, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["account_id", *M.account_ids])
        for acc, row in zip(M.account_ids, M.values):
            w.writerow([acc, *(repr(float(x)) for x in row)])


def read_matrix_csv(path) -> SimilarityMatrix:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    ids = rows[0][1:]
    return SimilarityMatrix(ids, np.array([[float(x) for x in r[1:]] for r in rows[1:]]))


def write_matrix_binary(M: SimilarityMatrix, path):
    """Layout: 8-byte magic, little-endian u64 ``m``, then ``m*m`` f64 row-major."""
    values = np.ascontiguousarray(M.values, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(BINARY_MAGIC)
        fh.write(struct.pack("<Q", values.shape[0]))
        fh.write(values.tobytes(order="C"))


def read_matrix_binary(path, account_ids=None) -> SimilarityMatrix:
    raw = Path(path).read_bytes()
    if raw[:8] != BINARY_MAGIC:
        raise ValueError("not a similarity matrix file")
    (m,) = struct.unpack("<Q", raw[8:16])
    values = np.frombuffer(raw[16:], dtype="<f8").reshape(m, m).copy()
    ids = list(account_ids) if account_ids is not None else [str(i) for i in range(m)]
    return SimilarityMatrix(ids, values)


class BlockVectorizer(TransformerMixin, BaseEstimator):
    """Map behaviour sequences to block-count rows over a learned vocabulary.

    Parameters
    ----------
    normalize : bool
        L2-normalize each row in ``transform``.
    """

    def __init__(self, normalize=False):
        self.normalize = normalize

    def fit(self, X, y=None):
        vectors = [vectorize(s) for s in X]
        self.vocabulary_ = sorted({b for v in vectors for b in v.counts})
        return self

    def transform(self, X):
        check_is_fitted(self, "vocabulary_")
        counts, _ = count_matrix([vectorize(s) for s in X], self.vocabulary_)
        if self.normalize:
            norms = np.sqrt(np.sum(counts * counts, axis=1, keepdims=True))
            counts = counts / np.where(norms == 0, 1.0, norms)
        return counts

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "vocabulary_")
        return np.asarray(self.vocabulary_, dtype=object)
