"""Per-family descriptive statistics."""

from __future__ import annotations

import csv
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .core import GAP, BehaviourSequence

log = logging.getLogger(__name__)


class EmptyFamily(ValueError):
    pass


def _blocks(seq):
    return seq.blocks if isinstance(seq, BehaviourSequence) else tuple(seq)


def letter_distribution(sequences) -> dict[str, int]:
    """Count every letter over all blocks of all member sequences (gaps excluded)."""
    sequences = list(sequences)
    if not sequences:
        raise EmptyFamily
    counts = Counter()
    for s in sequences:
        for block in _blocks(s):
            counts.update(block)
    counts.pop(GAP, None)
    return dict(sorted(counts.items()))


def block_counts(sequences) -> Counter:
    counts = Counter()
    for s in sequences:
        counts.update(b for b in _blocks(s) if GAP not in b)
    return counts


def _rank(counts: Mapping[str, int], n=None):
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked if n is None else ranked[:n]


def top_blocks(sequences, n=10) -> list[tuple[str, int]]:
    """The ``n`` most frequent blocks; ties ordered lexicographically."""
    sequences = list(sequences)
    if not sequences:
        raise EmptyFamily
    return _rank(block_counts(sequences), n)


def unique_blocks(families: Mapping[int, Sequence], n=10) -> dict[int, list[tuple[str, int]]]:
    """Blocks that occur in exactly one family, top ``n`` by in-family count."""
    if len(families) < 2:
        raise ValueError("need at least two families")
    counts = {f: block_counts(seqs) for f, seqs in families.items()}
    owners = Counter(b for c in counts.values() for b in c)
    return {
        f: _rank({b: k for b, k in c.items() if owners[b] == 1}, n)
        for f, c in counts.items()
    }


@dataclass
class SegmentCounter:
    """Tallies sequences too short to split into three segments."""

    short: int = 0


def segment_split(seq, counter: SegmentCounter | None = None):
    """Split into beginning/middle/end thirds; the remainder goes to the end.

    Sequences with fewer than three blocks go wholly into the last segment.
    """
    blocks = _blocks(seq)
    m = len(blocks)
    if m < 3:
        if counter is not None:
            counter.short += 1
        log.warning("sequence with %d blocks assigned to final segment", m)
        return (), (), tuple(blocks)
    third = m // 3
    return tuple(blocks[:third]), tuple(blocks[third:2 * third]), tuple(blocks[2 * third:])


def segment_counts(sequences, counter=None) -> list[Counter]:
    out = [Counter(), Counter(), Counter()]
    for s in sequences:
        for c, part in zip(out, segment_split(s, counter)):
            c.update(part)
    return out


def segment_frequencies(sequences, blocks=None, counter=None) -> dict[str, tuple[float, float, float]]:
    """Normalised frequency of each block within each life-cycle segment.

    The denominator is the family's total block count in the segment, so the
    frequencies of all blocks in one segment sum to 1. ``blocks`` defaults to
    the family's top five.
    """
    sequences = list(sequences)
    if not sequences:
        raise EmptyFamily
    if blocks is None:
        blocks = [b for b, _ in top_blocks(sequences, 5)]
    segs = segment_counts(sequences, counter)
    totals = [sum(c.values()) for c in segs]
    for k, t in enumerate(totals, start=1):
        if t == 0:
            log.warning("segment %d is empty; frequencies set to 0", k)
    return {
        b: tuple(c[b] / t if t else 0.0 for c, t in zip(segs, totals)) for b in blocks
    }


def trend(freqs: tuple[float, float, float], threshold=0.01) -> str:
    delta = freqs[2] - freqs[0]
    if delta > threshold:
        return "increasing"
    if delta < -threshold:
        return "decreasing"
    return "stable"


@dataclass
class FamilyProfile:
    family_id: int
    letter_counts: dict[str, int]
    top_blocks: list[tuple[str, int]]
    unique_blocks: list[tuple[str, int]] = field(default_factory=list)
    segment_freqs: dict[str, tuple[float, float, float]] = field(default_factory=dict)
    trends: dict[str, str] = field(default_factory=dict)
    n_accounts: int = 0
    n_short: int = 0

    def to_dict(self):
        return {
            "family_id": self.family_id,
            "n_accounts": self.n_accounts,
            "letter_counts": self.letter_counts,
            "top_blocks": [[b, c] for b, c in self.top_blocks],
            "unique_blocks": [[b, c] for b, c in self.unique_blocks],
            "segment_freqs": {b: list(v) for b, v in self.segment_freqs.items()},
            "trends": self.trends,
            "short_sequences": self.n_short,
        }


def profile_families(families: Mapping[int, Sequence], threshold=0.01, n_top=10) -> dict[int, FamilyProfile]:
    """Build a :class:`FamilyProfile` for each family id in ``families``."""
    uniques = unique_blocks(families, n_top) if len(families) >= 2 else {f: [] for f in families}
    out = {}
    for fam in sorted(families):
        seqs = list(families[fam])
        counter = SegmentCounter()
        freqs = segment_frequencies(seqs, counter=counter)
        out[fam] = FamilyProfile(
            family_id=fam,
            letter_counts=letter_distribution(seqs),
            top_blocks=top_blocks(seqs, n_top),
            unique_blocks=uniques[fam],
            segment_freqs=freqs,
            trends={b: trend(v, threshold) for b, v in freqs.items()},
            n_accounts=len(seqs),
            n_short=counter.short,
        )
    return out


def write_segment_csv(profiles: Mapping[int, FamilyProfile], path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["family_id", "block", "seg1", "seg2", "seg3", "trend"])
        for fam in sorted(profiles):
            p = profiles[fam]
            for b, (s1, s2, s3) in p.segment_freqs.items():
                w.writerow([fam, b, repr(s1), repr(s2), repr(s3), p.trends[b]])
