"""Shared mutations, mutation transfer and trigger-event analysis.

Mutations here are detected per account by a single left-to-right scan,
independent of any alignment.
"""

from __future__ import annotations

import json
import logging
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from functools import lru_cache
from importlib import resources
from itertools import combinations
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import BehaviourSequence, hamming
from .similarity import SimilarityMatrix

log = logging.getLogger(__name__)

INSERTION = "Insertion"
SUBSTITUTION = "Substitution"
IDENTITY = "Identity"
DELETION = "Deletion"
_ARRIVALS = {INSERTION, SUBSTITUTION}


class EmptySequence(ValueError):
    pass


class TooFewAccounts(ValueError):
    pass


class EmptyUniverse(ValueError):
    pass


class NoTextAvailable(ValueError):
    pass


@dataclass(frozen=True)
class ScanMutation:
    account_id: str
    position: int
    type: str
    block: str
    reference: str | None = None  # substitution source block

    @property
    def key(self):
        return (self.type, self.block)


def scan_mutations(seq: BehaviourSequence | Sequence[str], account_id=None) -> list[ScanMutation]:
    """Classify blocks of one sequence in a single pass.

    A block's first occurrence is a Substitution if a previously recorded
    block differs from it in exactly one letter (the earliest such block is
    the reference), otherwise an Insertion. Later occurrences are Identity.
    Every block whose last occurrence is before the final position gets a
    Deletion at ``last + 1``.
    """
    blocks = seq.blocks if isinstance(seq, BehaviourSequence) else tuple(seq)
    if account_id is None:
        account_id = seq.account_id if isinstance(seq, BehaviourSequence) else ""
    if not blocks:
        raise EmptySequence(account_id)
    recorded: list[str] = []
    seen = set()
    last = {}
    out = []
    for k, b in enumerate(blocks):
        last[b] = k
        if b in seen:
            out.append(ScanMutation(account_id, k, IDENTITY, b))
            continue
        ref = next((r for r in recorded if hamming(r, b) == 1), None)
        if ref is None:
            out.append(ScanMutation(account_id, k, INSERTION, b))
        else:
            out.append(ScanMutation(account_id, k, SUBSTITUTION, b, ref))
        recorded.append(b)
        seen.add(b)
    m = len(blocks)
    for b in recorded:
        if last[b] < m - 1:
            out.append(ScanMutation(account_id, last[b] + 1, DELETION, b))
    return out


def mutation_set(scan: Iterable[ScanMutation]) -> set[tuple[str, str]]:
    """Distinct ``(type, block)`` keys, Identity excluded."""
    return {m.key for m in scan if m.type != IDENTITY}


def shared_mutation_score(mi: set, mj: set) -> float:
    if not mi or not mj:
        return 0.0
    return len(mi & mj) / max(len(mi), len(mj))


@dataclass
class SharedMutationMatrix:
    family_id: int
    account_ids: list[str]
    values: np.ndarray
    summary: dict[str, float] = field(default_factory=dict)


def family_shared_matrix(family_id, scans: Mapping[str, Iterable[ScanMutation]]) -> SharedMutationMatrix:
    """Pairwise shared-mutation scores; summary over off-diagonal entries."""
    ids = list(scans)
    n = len(ids)
    if n < 2:
        raise TooFewAccounts(n)
    sets = [mutation_set(scans[a]) for a in ids]
    M = np.zeros((n, n))
    for i in range(n):
        M[i, i] = shared_mutation_score(sets[i], sets[i])
        for j in range(i + 1, n):
            M[i, j] = M[j, i] = shared_mutation_score(sets[i], sets[j])
    off = M[~np.eye(n, dtype=bool)]
    summary = {
        "average": float(off.mean()),
        "median": float(np.median(off)),
        "min": float(off.min()),
        "max": float(off.max()),
        "sparsity": float(np.mean(off == 0)),
    }
    return SharedMutationMatrix(family_id, ids, M, summary)


def family_mutation_set(scans: Iterable[Iterable[ScanMutation]]) -> set:
    out = set()
    for s in scans:
        out |= mutation_set(s)
    return out


def between_family_density(a: set | int, b: set | int, shared: int | None = None) -> tuple[int, float]:
    """Shared distinct mutations and ``shared / (|A| + |B|)``.

    Accepts two mutation sets, or two set sizes plus the shared count.
    """
    if shared is None:
        shared = len(a & b)
        size_a, size_b = len(a), len(b)
    else:
        size_a, size_b = a, b
    total = size_a + size_b
    return shared, (shared / total if total else 0.0)


def rank_by_avg_similarity(M: SimilarityMatrix, members: Sequence[str], n=10):
    """Most and least related ``n`` members by mean similarity to the others.

    Ties break by account id in both lists.
    """
    members = list(members)
    if len(members) < 2 * n:
        log.warning("family of %d accounts: most/least lists of %d overlap", len(members), n)
    sub = M.subset(members).values
    k = len(members)
    avg = (sub.sum(axis=1) - np.diag(sub)) / max(k - 1, 1)
    most = sorted(range(k), key=lambda i: (-avg[i], members[i]))[:n]
    least = sorted(range(k), key=lambda i: (avg[i], members[i]))[:n]
    return [members[i] for i in most], [members[i] for i in least]


@dataclass(frozen=True)
class Transfer:
    source: str
    target: str
    block: str
    source_type: str
    target_type: str
    source_position: int
    target_position: int


def _first_positions(scan):
    first = {}
    for m in scan:
        if m.type == IDENTITY:
            continue
        if m.key not in first or m.position < first[m.key]:
            first[m.key] = m.position
    return first


def _matches(key):
    """Target keys that count as receiving ``key``."""
    kind, block = key
    yield key
    if kind in _ARRIVALS:
        other = SUBSTITUTION if kind == INSERTION else INSERTION
        yield (other, block)


def detect_transfers(source: Sequence[ScanMutation], target: Sequence[ScanMutation]) -> list[Transfer]:
    """Source mutations that reappear in the target at the same or a later position.

    Matching is on ``(type, block)``; an Insertion and a Substitution arriving
    at the same block also match each other.
    """
    src, tgt = _first_positions(source), _first_positions(target)
    s_id = source[0].account_id if source else ""
    t_id = target[0].account_id if target else ""
    out = []
    for key in sorted(src, key=lambda k: (src[k], k)):
        for cand in _matches(key):
            if cand in tgt and tgt[cand] >= src[key]:
                out.append(Transfer(s_id, t_id, key[1], key[0], cand[0], src[key], tgt[cand]))
                break
    return out


@dataclass
class TransferConfusion:
    family_id: int
    group: str
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0
    pairs: int = 0

    @property
    def precision(self):
        d = self.tp + self.fp
        return self.tp / d if d else 0.0

    @property
    def recall(self):
        d = self.tp + self.fn
        return self.tp / d if d else 0.0

    @property
    def f1(self):
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def to_dict(self):
        return {
            "family_id": self.family_id, "group": self.group, "pairs": self.pairs,
            "tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn,
            "precision": self.precision, "recall": self.recall, "f1": self.f1,
        }


def confusion_from_counts(tp, fp, fn, tn=0, family_id=0, group=""):
    return TransferConfusion(family_id, group, tp, fp, fn, tn)


def pair_confusion(source, target, universe: set, position_aware: bool = True) -> tuple[int, int, int, int]:
    """Confusion counts for one ordered pair over the family mutation universe.

    TP: source mutations transferred to the target; FN: source mutations not
    transferred; FP: target mutations absent from the source; TN: the rest.
    With ``position_aware=False`` a mutation counts as transferred whenever
    both accounts show it, regardless of position.
    """
    src = mutation_set(source) & universe
    tgt = mutation_set(target) & universe
    if position_aware:
        moved = {(t.source_type, t.block) for t in detect_transfers(source, target)} & universe
    else:
        moved = src & tgt
    tp = len(moved)
    fn = len(src) - tp
    fp = len(tgt - src)
    tn = len(universe) - tp - fn - fp
    return tp, fp, fn, tn


def transfer_confusion(family_id, group: str, scans: Mapping[str, Sequence[ScanMutation]],
                       accounts: Sequence[str], universe: set,
                       position_aware: bool = True) -> TransferConfusion:
    """Aggregate pair confusion over all ordered pairs of ``accounts``."""
    if not universe:
        raise EmptyUniverse(family_id)
    out = TransferConfusion(family_id, group)
    for s in accounts:
        for t in accounts:
            if s == t:
                continue
            tp, fp, fn, tn = pair_confusion(scans[s], scans[t], universe, position_aware)
            out.tp += tp
            out.fp += fp
            out.fn += fn
            out.tn += tn
            out.pairs += 1
    if out.tp + out.fp + out.fn == 0:
        log.warning("family %s group %s: no mutations observed; metrics set to 0", family_id, group)
    return out


def transfer_analysis(family_id, members, scans, M: SimilarityMatrix, n=10, position_aware=True):
    """Most- and least-related group confusion for one family."""
    most, least = rank_by_avg_similarity(M, members, n)
    universe = family_mutation_set(scans[a] for a in members)
    return {
        "most_related": transfer_confusion(family_id, "most_related", scans, most, universe, position_aware),
        "least_related": transfer_confusion(family_id, "least_related", scans, least, universe, position_aware),
        "most": most,
        "least": least,
    }


# -- trigger events ---------------------------------------------------------

_VARIATION_SELECTORS = {"\ufe0e", "\ufe0f"}


@lru_cache(maxsize=1)
def default_events() -> dict:
    raw = resources.files("botdna.data").joinpath("event_emojis.json").read_text("utf-8")
    return json.loads(raw)


@dataclass(frozen=True)
class EventStudyConfig:
    name: str
    month: int
    day: int
    emojis: tuple[str, ...]
    window: int = 5

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if not self.emojis or len(self.emojis) > 10:
            raise ValueError("emoji set must hold 1 to 10 entries")
        object.__setattr__(self, "emojis", tuple(_strip_vs(e) for e in self.emojis))

    @classmethod
    def preset(cls, name, window=5):
        spec = default_events()[name]
        return cls(name, spec["month"], spec["day"], tuple(spec["emojis"]), window)

    def to_dict(self):
        return {"name": self.name, "month": self.month, "day": self.day,
                "emojis": list(self.emojis), "window": self.window}


def _strip_vs(text):
    return "".join(c for c in unicodedata.normalize("NFC", text) if c not in _VARIATION_SELECTORS)


def count_emojis(text: str, emojis: Sequence[str]) -> int:
    clean = _strip_vs(text or "")
    return sum(clean.count(e) for e in emojis)


def _day_offset(ts: float, month: int, day: int, window: int):
    """Offset in days from the nearest occurrence of the event date, or None."""
    d = datetime.fromtimestamp(ts, tz=timezone.utc).date()
    for year in (d.year - 1, d.year, d.year + 1):
        try:
            event = d.replace(year=year, month=month, day=day)
        except ValueError:
            continue
        off = (d - event).days
        if -window <= off <= window:
            return off
    return None


def event_study(corpus, assignment, cfg: EventStudyConfig, M: SimilarityMatrix):
    """Monthly volumes, daily per-account counts, participation and similarity.

    Returns a JSON-ready dict keyed by family id (as int).
    """
    if not any(r.text for r in corpus.records()):
        raise NoTextAvailable(cfg.name)
    report = {}
    offsets = range(-cfg.window, cfg.window + 1)
    for fam in assignment.families:
        members = [a for a in assignment.members(fam) if a in corpus.accounts]
        monthly = Counter()
        daily = {a: Counter() for a in members}
        for acc in members:
            for rec in corpus.accounts[acc]:
                n = count_emojis(rec.text, cfg.emojis)
                if not n:
                    continue
                month = datetime.fromtimestamp(rec.timestamp, tz=timezone.utc).month
                monthly[month] += n
                off = _day_offset(rec.timestamp, cfg.month, cfg.day, cfg.window)
                if off is not None:
                    daily[acc][off] += n
        parts = {"before": set(), "during": set(), "after": set()}
        for acc, c in daily.items():
            for off, n in c.items():
                if n:
                    part = "before" if off < 0 else "during" if off == 0 else "after"
                    parts[part].add(acc)
        participants = sorted(set().union(*parts.values()))
        if len(participants) > 1:
            idx = [M.index(a) for a in participants]
            sims = [M.values[i, j] for i, j in combinations(idx, 2)]
            mean_sim = float(np.mean(sims))
        else:
            mean_sim = 0.0
        report[fam] = {
            "monthly": [monthly[m] for m in range(1, 13)],
            "daily": {a: [daily[a][o] for o in offsets] for a in members},
            "daily_total": [sum(daily[a][o] for a in members) for o in offsets],
            "participation": {k: len(v) for k, v in parts.items()},
            "participants": participants,
            "similarity_mean": mean_sim,
        }
    return report
