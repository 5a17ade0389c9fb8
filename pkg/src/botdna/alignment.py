"""Block-level progressive multiple sequence alignment within a family.

Sequences are split into length quartile groups, padded with trailing gap
blocks to the group maximum, and aligned group by group. Each block is one
alignment symbol, so a block is never split across columns.
"""

from __future__ import annotations

import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numba
import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .clustering import average_linkage
from .core import GAP_BLOCK, BehaviourSequence

log = logging.getLogger(__name__)

@dataclass(frozen=True)
class AlignmentScoring:
    match: int = 2
    partial: int = 1
    mismatch: int = -1
    gap: int = -2
    partial_min_equal: int = 4

    def pair(self, a: str, b: str) -> int:
        """Score of two aligned symbols (either may be the gap block)."""
        a_gap, b_gap = a == GAP_BLOCK, b == GAP_BLOCK
        if a_gap and b_gap:
            return 0
        if a_gap or b_gap:
            return self.gap
        if a == b:
            return self.match
        same = sum(x == y for x, y in zip(a, b))
        return self.partial if same >= self.partial_min_equal else self.mismatch


@dataclass
class LengthGroup:
    group_index: int
    members: list[BehaviourSequence]

    @property
    def L_max(self):
        return max((len(s) for s in self.members), default=0)


@dataclass
class AlignedGroup:
    group_index: int
    account_ids: list[str]
    rows: list[tuple[str, ...]]

    @property
    def width(self):
        return len(self.rows[0]) if self.rows else 0


@dataclass
class AlignedFamily:
    family_id: int
    groups: list[AlignedGroup] = field(default_factory=list)

    def __len__(self):
        return sum(len(g.rows) for g in self.groups)

    def rows(self):
        """Yield ``(group_index, account_id, aligned_row)``."""
        for g in self.groups:
            for acc, row in zip(g.account_ids, g.rows):
                yield g.group_index, acc, row

    @property
    def total_blocks(self):
        return sum(len(r) for _, _, r in self.rows())


def degap(row: Sequence[str]) -> tuple[str, ...]:
    return tuple(b for b in row if b != GAP_BLOCK)


def quartile_groups(sequences: Sequence[BehaviourSequence]) -> list[LengthGroup]:
    """Partition by block length at the family's Q1/Q2/Q3.

    Quartiles use linear interpolation between order statistics (numpy's
    default). Group 4 holds lengths ``>= Q3``. Fewer than four sequences all
    go into group 1.
    """
    sequences = list(sequences)
    if len(sequences) < 4:
        if sequences:
            log.warning("family with %d sequences aligned as one group", len(sequences))
        return [LengthGroup(1, sequences)] + [LengthGroup(k, []) for k in (2, 3, 4)]
    lengths = np.array([len(s) for s in sequences], dtype=float)
    q1, q2, q3 = np.percentile(lengths, [25, 50, 75])
    groups = [LengthGroup(k, []) for k in (1, 2, 3, 4)]
    for s, n in zip(sequences, lengths):
        if n < q1:
            groups[0].members.append(s)
        elif n < q2:
            groups[1].members.append(s)
        elif n < q3:
            groups[2].members.append(s)
        else:
            groups[3].members.append(s)
    return groups


def pad_group(group: LengthGroup) -> list[tuple[str, ...]]:
    if not group.members:
        raise ValueError("cannot pad an empty group")
    width = group.L_max
    return [tuple(s.blocks) + (GAP_BLOCK,) * (width - len(s)) for s in group.members]


@numba.njit(cache=True, nogil=True)
def _nw(C, up, left):
    """Global alignment DP over a precomputed column score matrix.

    Traceback moves: 0 diagonal, 1 up, 2 left; ties keep the earlier move.
    ``up[i]`` is the cost of aligning row-column ``i`` against a new gap
    column, ``left[j]`` likewise for the other profile. Returns the optimal
    score and the two index paths (-1 marks an inserted gap).
    """
    n, m = C.shape
    H = np.empty((n + 1, m + 1), dtype=np.int64)
    P = np.empty((n + 1, m + 1), dtype=np.int8)
    H[0, 0] = 0
    P[0, 0] = 0
    for i in range(1, n + 1):
        H[i, 0] = H[i - 1, 0] + up[i - 1]
        P[i, 0] = 1
    for j in range(1, m + 1):
        H[0, j] = H[0, j - 1] + left[j - 1]
        P[0, j] = 2
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            best = H[i - 1, j - 1] + C[i - 1, j - 1]
            move = 0
            u = H[i - 1, j] + up[i - 1]
            if u > best:
                best = u
                move = 1
            lf = H[i, j - 1] + left[j - 1]
            if lf > best:
                best = lf
                move = 2
            H[i, j] = best
            P[i, j] = move
    path_a = np.empty(n + m, dtype=np.int64)
    path_b = np.empty(n + m, dtype=np.int64)
    i, j, k = n, m, 0
    while i > 0 or j > 0:
        move = P[i, j]
        if move == 0:
            path_a[k] = i - 1
            path_b[k] = j - 1
            i -= 1
            j -= 1
        elif move == 1:
            path_a[k] = i - 1
            path_b[k] = -1
            i -= 1
        else:
            path_a[k] = -1
            path_b[k] = j - 1
            j -= 1
        k += 1
    return H[n, m], path_a[:k][::-1].copy(), path_b[:k][::-1].copy()


class _Encoded:
    """Integer symbol view of one padded group; symbol 0 is the gap block."""

    def __init__(self, rows, scoring: AlignmentScoring):
        vocab = sorted({b for r in rows for b in r if b != GAP_BLOCK})
        self.symbols = [GAP_BLOCK] + vocab
        index = {b: i for i, b in enumerate(self.symbols)}
        self.rows = [np.array([index[b] for b in r], dtype=np.int64) for r in rows]
        V = len(self.symbols)
        S = np.empty((V, V), dtype=np.int64)
        for x in range(V):
            for y in range(x, V):
                S[x, y] = S[y, x] = scoring.pair(self.symbols[x], self.symbols[y])
        self.S = S


class _Profile:
    def __init__(self, members, matrix):
        self.members = members  # original row indices
        self.matrix = matrix  # (n_members, width) symbol ids

    def counts(self, V):
        n, w = self.matrix.shape
        out = np.zeros((w, V), dtype=np.int64)
        for r in range(n):
            np.add.at(out, (np.arange(w), self.matrix[r]), 1)
        return out


def _align_profiles(pa: _Profile, pb: _Profile, S) -> _Profile:
    V = S.shape[0]
    ca, cb = pa.counts(V), pb.counts(V)
    na, nb = pa.matrix.shape[0], pb.matrix.shape[0]
    # sum-of-pairs scores, unnormalised: every term covers na * nb pairs
    C = ca @ S @ cb.T
    up = nb * (ca @ S[:, 0])
    left = na * (cb @ S[0, :])
    _, path_a, path_b = _nw(C, up, left)
    width = len(path_a)
    out = np.zeros((na + nb, width), dtype=np.int64)
    take_a, take_b = path_a >= 0, path_b >= 0
    out[:na, take_a] = pa.matrix[:, path_a[take_a]]
    out[na:, take_b] = pb.matrix[:, path_b[take_b]]
    return _Profile(pa.members + pb.members, out)


def pairwise_align(a: Sequence[str], b: Sequence[str], scoring=AlignmentScoring()):
    """Align two block sequences; returns ``(score, aligned_a, aligned_b)``."""
    enc = _Encoded([tuple(a), tuple(b)], scoring)
    ra, rb = enc.rows
    score, path_a, path_b = _nw(enc.S[ra][:, rb], enc.S[ra, 0], enc.S[0, rb])
    out_a = tuple(enc.symbols[ra[i]] if i >= 0 else GAP_BLOCK for i in path_a)
    out_b = tuple(enc.symbols[rb[j]] if j >= 0 else GAP_BLOCK for j in path_b)
    return int(score), out_a, out_b


def _distance(ra, rb, S):
    C = S[ra][:, rb]
    _, path_a, path_b = _nw(C, S[ra, 0], S[0, rb])
    sa = np.where(path_a >= 0, ra[np.maximum(path_a, 0)], 0)
    sb = np.where(path_b >= 0, rb[np.maximum(path_b, 0)], 0)
    informative = (sa != 0) | (sb != 0)
    same = (sa == sb) & (sa != 0)
    return 1.0 - same.sum() / max(int(informative.sum()), 1)


def progressive_msa(rows: Sequence[Sequence[str]], scoring=AlignmentScoring()) -> list[tuple[str, ...]]:
    """Align padded rows; output keeps the input row order.

    The guide tree is UPGMA over pairwise alignment distances (fraction of
    informative columns that are not identical blocks). Profiles merge in
    guide-tree order with sum-of-pairs scoring.
    """
    rows = [tuple(r) for r in rows]
    n = len(rows)
    if n == 0:
        raise ValueError("nothing to align")
    if n == 1:
        return [rows[0]]
    enc = _Encoded(rows, scoring)
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            D[i, j] = D[j, i] = _distance(enc.rows[i], enc.rows[j], enc.S)
    tree = average_linkage(D)
    nodes: list[_Profile] = [_Profile([i], enc.rows[i][None, :]) for i in range(n)]
    for a, b, _, _ in tree.merges:
        nodes.append(_align_profiles(nodes[a], nodes[b], enc.S))
    final = nodes[-1]
    mat = final.matrix[np.argsort(final.members, kind="stable")]
    return [tuple(enc.symbols[x] for x in r) for r in mat]


def merge_groups(family_id, groups: Sequence[AlignedGroup]) -> AlignedFamily:
    return AlignedFamily(family_id, [g for g in groups if g.rows])


def align_family(family_id, sequences, scoring=AlignmentScoring(), n_jobs=1) -> AlignedFamily:
    """Quartile-group, pad and align one family's sequences."""
    groups = [g for g in quartile_groups(sequences) if g.members]

    def run(g):
        return AlignedGroup(
            g.group_index, [s.account_id for s in g.members], progressive_msa(pad_group(g), scoring)
        )

    if n_jobs > 1 and len(groups) > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            aligned = list(pool.map(run, groups))
    else:
        aligned = [run(g) for g in groups]
    return merge_groups(family_id, aligned)


def consensus(rows: Sequence[Sequence[str]]) -> list[tuple[str, float]]:
    """Modal non-gap block and its share of non-gap entries, per column."""
    out = []
    for column in zip(*rows):
        counts = Counter(b for b in column if b != GAP_BLOCK)
        if not counts:
            out.append((GAP_BLOCK, 0.0))
            continue
        block, c = min(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        out.append((block, c / sum(counts.values())))
    return out


def write_fasta(families: Mapping[int, AlignedFamily], path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for fam in sorted(families):
            for group, acc, row in families[fam].rows():
                fh.write(f">{acc} family={fam} group={group}\n")
                fh.write("".join(row) + "\n")


def read_fasta(path) -> dict[int, AlignedFamily]:
    fams: dict[int, dict[int, AlignedGroup]] = {}
    header = None
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith(">"):
                acc, *tags = line[1:].split(" ")
                meta = dict(t.split("=") for t in tags)
                header = (acc, int(meta["family"]), int(meta["group"]))
            elif header is not None:
                acc, fam, grp = header
                groups = fams.setdefault(fam, {})
                g = groups.setdefault(grp, AlignedGroup(grp, [], []))
                g.account_ids.append(acc)
                g.rows.append(tuple(line[i:i + 7] for i in range(0, len(line), 7)))
                header = None
    return {
        f: AlignedFamily(f, [groups[k] for k in sorted(groups)]) for f, groups in sorted(fams.items())
    }


class FamilyAligner(BaseEstimator):
    """Align each family's sequences; ``fit(sequences, labels)``.

    Attributes
    ----------
    aligned_ : dict[int, AlignedFamily]
    """

    def __init__(self, match=2, partial=1, mismatch=-1, gap=-2, n_jobs=1):
        self.match = match
        self.partial = partial
        self.mismatch = mismatch
        self.gap = gap
        self.n_jobs = n_jobs

    def fit(self, X, y):
        seqs = list(X)
        labels = list(np.asarray(y).tolist())
        if len(seqs) != len(labels):
            raise ValueError("sequences and labels differ in length")
        scoring = AlignmentScoring(self.match, self.partial, self.mismatch, self.gap)
        members: dict[int, list] = {}
        for s, lab in zip(seqs, labels):
            members.setdefault(int(lab), []).append(s)
        self.aligned_ = {
            fam: align_family(fam, members[fam], scoring, self.n_jobs) for fam in sorted(members)
        }
        return self

    def transform(self, X=None):
        check_is_fitted(self, "aligned_")
        return self.aligned_
