"""Average-linkage (UPGMA) clustering of accounts into behavioural families."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.metrics import calinski_harabasz_score, davies_bouldin_score, silhouette_score
from sklearn.utils.validation import check_is_fitted

from .similarity import BlockVectorizer, SimilarityMatrix, cosine_matrix, to_dissimilarity


class InvalidMatrix(ValueError):
    pass


class BadK(ValueError):
    pass


class BadKRange(ValueError):
    pass


@dataclass
class Dendrogram:
    """Merge list in scipy order: node ``m + t`` is created by merge ``t``.

    Each merge is ``(left, right, height, size)``.
    """

    n_leaves: int
    merges: list[tuple[int, int, float, int]]

    @property
    def heights(self):
        return np.array([h for _, _, h, _ in self.merges])

    def to_linkage(self):
        return np.array([[a, b, h, s] for a, b, h, s in self.merges], dtype=np.float64)

    def to_newick(self, labels: Sequence[str] | None = None) -> str:
        m = self.n_leaves
        labels = [str(i) for i in range(m)] if labels is None else [str(x) for x in labels]
        if m == 1:
            return f"{_newick_label(labels[0])};"
        height = [0.0] * m + [h for _, _, h, _ in self.merges]
        text = [_newick_label(x) for x in labels]
        for t, (a, b, h, _) in enumerate(self.merges):
            text.append(
                f"({text[a]}:{_fmt(h - height[a])},{text[b]}:{_fmt(h - height[b])})"
            )
        return text[-1] + ";"


def _fmt(x):
    return format(max(x, 0.0), ".10g")


def _newick_label(label):
    if any(c in label for c in " ():;,[]'\t\n"):
        return "'" + label.replace("'", "''") + "'"
    return label


def check_dissimilarity(D) -> np.ndarray:
    D = np.asarray(D, dtype=np.float64)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise InvalidMatrix("dissimilarity matrix must be square")
    if not np.all(np.isfinite(D)):
        raise InvalidMatrix("dissimilarity matrix has non-finite entries")
    if not np.allclose(D, D.T, rtol=0, atol=1e-12):
        raise InvalidMatrix("dissimilarity matrix is not symmetric")
    if np.any(np.diag(D) != 0):
        raise InvalidMatrix("dissimilarity matrix diagonal must be zero")
    return D


def average_linkage(D) -> Dendrogram:
    """UPGMA on a precomputed dissimilarity matrix.

    The closest active pair is merged at each step; ties go to the smallest
    ``(i, j)`` slot pair, where the merged cluster keeps slot ``i``.
    """
    D = check_dissimilarity(D)
    m = D.shape[0]
    if m < 1:
        raise InvalidMatrix("empty matrix")
    W = D.copy()
    W[np.tril_indices(m)] = np.inf
    sizes = np.ones(m)
    node = list(range(m))
    full = D.copy()
    merges = []
    for t in range(m - 1):
        flat = int(np.argmin(W))
        i, j = divmod(flat, m)
        height = float(W[i, j])
        si, sj = sizes[i], sizes[j]
        merges.append((node[i], node[j], height, int(si + sj)))
        # Lance-Williams update for average linkage; kept in a full symmetric
        # copy so rows and columns can be read uniformly
        row = (si * full[i] + sj * full[j]) / (si + sj)
        full[i, :] = row
        full[:, i] = row
        full[i, i] = 0.0
        full[j, :] = np.inf
        full[:, j] = np.inf
        sizes[i] += sj
        node[i] = m + t
        W[i, i + 1:] = full[i, i + 1:]
        W[:i, i] = full[:i, i]
        W[j, :] = np.inf
        W[:, j] = np.inf
    return Dendrogram(m, merges)


def cut_tree(dg: Dendrogram, k: int) -> np.ndarray:
    """Labels ``1..k`` from undoing the last ``k - 1`` merges.

    Family 1 is the largest cluster; equal sizes are ordered by smallest member.
    """
    m = dg.n_leaves
    if not 1 <= k <= m:
        raise BadK(k)
    parent = list(range(2 * m - 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for t, (a, b, _, _) in enumerate(dg.merges[: m - k]):
        parent[find(a)] = m + t
        parent[find(b)] = m + t
    roots = [find(i) for i in range(m)]
    members: dict[int, list[int]] = {}
    for i, r in enumerate(roots):
        members.setdefault(r, []).append(i)
    order = sorted(members.values(), key=lambda g: (-len(g), g[0]))
    labels = np.zeros(m, dtype=int)
    for fam, group in enumerate(order, start=1):
        labels[group] = fam
    return labels


def wcss(X, labels) -> float:
    total = 0.0
    for lab in np.unique(labels):
        pts = X[labels == lab]
        total += float(np.sum((pts - pts.mean(axis=0)) ** 2))
    return total


def validation_metrics(D, X, dg: Dendrogram, k_range) -> dict[int, dict[str, float]]:
    """Per-k cluster-quality metrics for the cut dendrogram.

    Silhouette is computed on ``D`` directly (singletons score 0); WCSS,
    Calinski-Harabasz and Davies-Bouldin use the L2-normalized rows of ``X``.
    """
    D = check_dissimilarity(D)
    m = D.shape[0]
    ks = list(k_range)
    if not ks or min(ks) < 2 or max(ks) > m - 1:
        raise BadKRange(f"k must lie in [2, {m - 1}]")
    X = np.asarray(X, dtype=np.float64)
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    Xn = X / np.where(norms == 0, 1.0, norms)
    out = {}
    for k in ks:
        labels = cut_tree(dg, k)
        out[k] = {
            "wcss": wcss(Xn, labels),
            "silhouette": float(silhouette_score(D, labels, metric="precomputed")),
            "calinski_harabasz": float(calinski_harabasz_score(Xn, labels)),
            "davies_bouldin": float(davies_bouldin_score(Xn, labels)),
        }
    return out


@dataclass
class FamilyAssignment:
    account_ids: list[str]
    labels: np.ndarray
    k: int
    names: dict[int, str] = field(default_factory=dict)

    def members(self, family_id) -> list[str]:
        return [a for a, lab in zip(self.account_ids, self.labels) if lab == family_id]

    def family_of(self, account_id) -> int:
        return int(self.labels[self.account_ids.index(account_id)])

    @property
    def families(self):
        return list(range(1, self.k + 1))

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["account_id", "family_id"])
            for acc, lab in zip(self.account_ids, self.labels):
                w.writerow([acc, int(lab)])


class BehaviourFamilies(ClusterMixin, BaseEstimator):
    """Cluster behaviour sequences into families.

    Cosine similarity of block-frequency vectors, converted to dissimilarity,
    then average-linkage clustering cut at ``n_families``.

    Attributes
    ----------
    similarity_ : SimilarityMatrix
    dendrogram_ : Dendrogram
    labels_ : ndarray of int, family ids starting at 1
    """

    def __init__(self, n_families=4, n_jobs=1):
        self.n_families = n_families
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        seqs = list(X)
        if len(seqs) < 2:
            raise ValueError("need at least two sequences")
        if not 1 <= self.n_families <= len(seqs):
            raise BadK(self.n_families)
        self.vectorizer_ = BlockVectorizer().fit(seqs)
        self.counts_ = self.vectorizer_.transform(seqs)
        ids = [s.account_id for s in seqs]
        self.similarity_ = SimilarityMatrix(ids, cosine_matrix(self.counts_, self.n_jobs))
        self.dissimilarity_ = to_dissimilarity(self.similarity_)
        self.dendrogram_ = average_linkage(self.dissimilarity_)
        self.labels_ = cut_tree(self.dendrogram_, self.n_families)
        return self

    @property
    def assignment_(self) -> FamilyAssignment:
        check_is_fitted(self, "labels_")
        return FamilyAssignment(list(self.similarity_.account_ids), self.labels_, self.n_families)

    def validation_metrics(self, k_range):
        check_is_fitted(self, "labels_")
        return validation_metrics(self.dissimilarity_, self.counts_, self.dendrogram_, k_range)
