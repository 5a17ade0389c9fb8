"""Classification of aligned block differences and mutation statistics."""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .alignment import AlignedFamily
from .core import GAP_BLOCK, hamming


class MutationType(str, Enum):
    MATCH = "Match"
    EMPTY = "Empty"
    INSERTION = "Insertion"
    DELETION = "Deletion"
    SUBSTITUTION = "Substitution"
    ALTERATION = "Alteration"
    IDENTITY = "Identity"
    UNCLASSIFIED = "Unclassified"

    def __str__(self):
        return self.value


PRIMARY_TYPES = (
    MutationType.INSERTION,
    MutationType.DELETION,
    MutationType.SUBSTITUTION,
    MutationType.ALTERATION,
)
# types that enter frequency, block-profile and hotspot statistics
COUNTED_TYPES = PRIMARY_TYPES + (MutationType.IDENTITY,)


class GroupMismatch(ValueError):
    pass


class NoMutations(ValueError):
    pass


@dataclass(frozen=True)
class MutationEvent:
    family_id: int
    source: str
    target: str
    group: int
    position: int
    type: MutationType
    block_a: str
    block_b: str
    sub_pair: tuple[str, str] | None = None

    @property
    def block(self) -> str:
        """The block the event is attributed to (the non-gap side, else ``block_a``)."""
        return self.block_b if self.block_a == GAP_BLOCK else self.block_a


def _first_positions(row):
    first = {}
    for k, b in enumerate(row):
        if b != GAP_BLOCK and b not in first:
            first[b] = k
    return first


def substitution_pair(a: str, b: str) -> tuple[str, str]:
    for x, y in zip(a, b):
        if x != y:
            return x, y
    raise ValueError("blocks are identical")


def classify_pair_position(row_i: Sequence[str], row_j: Sequence[str], k: int, min_equal: int = 4) -> MutationType:
    """Outcome for aligned position ``k`` of two rows from the same group.

    Rules, first match wins: both gap -> Empty; equal -> Match; one gap ->
    Deletion if the block occurred earlier in the gapped row, else Insertion;
    one letter differs -> Substitution; at least ``min_equal`` letters agree
    and either block occurred earlier in either row -> Alteration; either
    block occurs anywhere in the other row -> Identity; else Unclassified.
    """
    if len(row_i) != len(row_j):
        raise GroupMismatch("rows have different aligned lengths")
    a, b = row_i[k], row_j[k]
    a_gap, b_gap = a == GAP_BLOCK, b == GAP_BLOCK
    if a_gap and b_gap:
        return MutationType.EMPTY
    if a == b:
        return MutationType.MATCH
    if a_gap or b_gap:
        block, gapped = (b, row_i) if a_gap else (a, row_j)
        if block in gapped[:k]:
            return MutationType.DELETION
        return MutationType.INSERTION
    h = hamming(a, b)
    if h == 1:
        return MutationType.SUBSTITUTION
    if 7 - h >= min_equal:
        earlier = row_i[:k] + row_j[:k]
        if a in earlier or b in earlier:
            return MutationType.ALTERATION
    if a in row_j or b in row_i:
        return MutationType.IDENTITY
    return MutationType.UNCLASSIFIED


_CODES = [
    MutationType.MATCH, MutationType.EMPTY, MutationType.INSERTION, MutationType.DELETION,
    MutationType.SUBSTITUTION, MutationType.ALTERATION, MutationType.IDENTITY,
    MutationType.UNCLASSIFIED,
]


class _GroupIndex:
    """Integer view of one aligned group for vectorised classification."""

    def __init__(self, rows, min_equal):
        symbols = [GAP_BLOCK] + sorted({b for r in rows for b in r if b != GAP_BLOCK})
        index = {b: i for i, b in enumerate(symbols)}
        self.symbols = symbols
        self.rows = [np.array([index[b] for b in r], dtype=np.int64) for r in rows]
        V = len(symbols)
        width = len(rows[0]) if rows else 0
        never = width + 1
        self.first = np.full((len(rows), V), never, dtype=np.int64)
        for n, r in enumerate(self.rows):
            for k in range(len(r) - 1, -1, -1):
                self.first[n, r[k]] = k
            self.first[n, 0] = never
        letters = np.array([list(s) for s in symbols[1:]], dtype="U1").reshape(V - 1, 7)
        H = np.zeros((V, V), dtype=np.int64)
        if V > 1:
            H[1:, 1:] = (letters[:, None, :] != letters[None, :, :]).sum(axis=2)
        self.hamming = H
        self.min_equal = min_equal
        self.width = width

    def classify(self, i, j) -> np.ndarray:
        """Outcome codes (index into ``_CODES``) for every position of pair (i, j)."""
        a, b = self.rows[i], self.rows[j]
        fi, fj = self.first[i], self.first[j]
        k = np.arange(self.width)
        a_gap, b_gap = a == 0, b == 0
        out = np.zeros(self.width, dtype=np.int64)
        both = a_gap & b_gap
        one = a_gap ^ b_gap
        block = np.where(one, a + b, 0)
        gapped_first = np.where(a_gap, fi[block], fj[block])
        diff = ~a_gap & ~b_gap & (a != b)
        h = self.hamming[a, b]
        earlier = np.minimum(np.minimum(fi[a], fi[b]), np.minimum(fj[a], fj[b])) < k
        sub = diff & (h == 1)
        alt = diff & ~sub & (7 - h >= self.min_equal) & earlier
        ident = diff & ~sub & ~alt & ((fj[a] <= self.width) | (fi[b] <= self.width))
        out[both] = 1
        out[one & (gapped_first < k)] = 3
        out[one & ~(gapped_first < k)] = 2
        out[sub] = 4
        out[alt] = 5
        out[ident] = 6
        out[diff & ~sub & ~alt & ~ident] = 7
        return out


def detect_family_mutations(af: AlignedFamily, min_equal: int = 4) -> list[MutationEvent]:
    """All non-Match outcomes over ordered within-group pairs.

    Ordered by group, then pair ``(i, j)`` in group order, then position.
    Unclassified outcomes are included in the returned list; statistics skip
    them.
    """
    events = []
    for g in af.groups:
        if len(g.rows) < 2:
            continue
        if len({len(r) for r in g.rows}) != 1:
            raise GroupMismatch(f"group {g.group_index} rows differ in length")
        idx = _GroupIndex(g.rows, min_equal)
        n = len(g.rows)
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                codes = idx.classify(i, j)
                row_i, row_j = g.rows[i], g.rows[j]
                for k in np.flatnonzero(codes):
                    kind = _CODES[codes[k]]
                    a, b = row_i[k], row_j[k]
                    pair = substitution_pair(a, b) if kind is MutationType.SUBSTITUTION else None
                    events.append(MutationEvent(
                        af.family_id, g.account_ids[i], g.account_ids[j], g.group_index,
                        int(k), kind, a, b, pair,
                    ))
    return events


def _counted(events):
    return [e for e in events if e.type in COUNTED_TYPES]


def mutation_type_frequencies(events: Iterable[MutationEvent]) -> dict[str, dict[str, float]]:
    """Type proportions, over the primary types and with Identity included."""
    counts = Counter(e.type for e in events)
    out = {}
    for view, types in (("primary", PRIMARY_TYPES), ("with_identity", COUNTED_TYPES)):
        total = sum(counts[t] for t in types)
        if view == "with_identity" and total == 0:
            raise NoMutations
        out[view] = {t.value: (counts[t] / total if total else 0.0) for t in types}
    return out


def block_mutation_profiles(events: Iterable[MutationEvent], top=5):
    """Per-block totals and per-type proportions; returns ``(profiles, top_blocks)``."""
    per_block: dict[str, Counter] = {}
    for e in _counted(events):
        per_block.setdefault(e.block, Counter())[e.type] += 1
    profiles = {}
    for block in sorted(per_block):
        c = per_block[block]
        total = sum(c.values())
        profiles[block] = {
            "total": total,
            "proportions": {t.value: c[t] / total for t in COUNTED_TYPES},
        }
    ranked = sorted(profiles, key=lambda b: (-profiles[b]["total"], b))
    return profiles, ranked[:top]


def substitution_frequencies(events: Iterable[MutationEvent], total_blocks: int) -> dict[tuple[str, str], float]:
    """Directional letter-pair counts over the family's aligned block count.

    Sorted by frequency descending, ties by letter pair.
    """
    if total_blocks <= 0:
        raise ValueError("total_blocks must be positive")
    counts = Counter(e.sub_pair for e in events if e.type is MutationType.SUBSTITUTION)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return {pair: c / total_blocks for pair, c in ranked}


def hotspot_scores(events: Iterable[MutationEvent], af: AlignedFamily) -> dict[int, np.ndarray]:
    """Share of the family's counted mutations at each aligned position, per group."""
    counted = _counted(events)
    if not counted:
        raise NoMutations
    scores = {g.group_index: np.zeros(g.width) for g in af.groups}
    for e in counted:
        scores[e.group][e.position] += 1
    total = len(counted)
    return {g: s / total for g, s in scores.items()}


@dataclass
class MutationStats:
    family_id: int
    counts: dict[str, int]
    type_proportions: dict[str, float] = field(default_factory=dict)
    type_proportions_with_identity: dict[str, float] = field(default_factory=dict)
    block_profiles: dict = field(default_factory=dict)
    top_blocks: list[str] = field(default_factory=list)
    substitution_freqs: dict[tuple[str, str], float] = field(default_factory=dict)
    hotspots: dict[int, np.ndarray] = field(default_factory=dict)
    total_blocks: int = 0

    def to_dict(self):
        return {
            "family_id": self.family_id,
            "counts": self.counts,
            "total_aligned_blocks": self.total_blocks,
            "type_proportions": self.type_proportions,
            "type_proportions_with_identity": self.type_proportions_with_identity,
            "block_profiles": self.block_profiles,
            "top_mutated_blocks": self.top_blocks,
            "substitution_freqs": [[a, b, f] for (a, b), f in self.substitution_freqs.items()],
            "hotspots": {str(g): [float(x) for x in s] for g, s in self.hotspots.items()},
        }


def mutation_stats(events: Sequence[MutationEvent], af: AlignedFamily) -> MutationStats:
    counts = Counter(e.type.value for e in events)
    stats = MutationStats(
        af.family_id,
        {t.value: counts.get(t.value, 0) for t in _CODES[1:]},
        total_blocks=af.total_blocks,
    )
    if not _counted(events):
        return stats
    freqs = mutation_type_frequencies(events)
    stats.type_proportions = freqs["primary"]
    stats.type_proportions_with_identity = freqs["with_identity"]
    stats.block_profiles, stats.top_blocks = block_mutation_profiles(events)
    stats.substitution_freqs = substitution_frequencies(events, max(af.total_blocks, 1))
    stats.hotspots = hotspot_scores(events, af)
    return stats


EVENT_COLUMNS = ["family", "source", "target", "group", "position", "type", "block_a", "block_b", "l1", "l2"]


def write_events_csv(events: Iterable[MutationEvent], path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVENT_COLUMNS)
        for e in events:
            l1, l2 = e.sub_pair or ("", "")
            w.writerow([e.family_id, e.source, e.target, e.group, e.position, e.type.value,
                        e.block_a, e.block_b, l1, l2])
