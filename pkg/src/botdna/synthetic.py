"""Seeded synthetic account populations with planted structure.

The output trace is plain JSONL in the ingestion format, plus a ground-truth
document recording family labels and every planted effect.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .core import all_blocks, validate_block

DEFAULT_ARCHETYPES = {
    "unique_tweeters": {
        "TXMKZQL": 0.55, "TXMKZDL": 0.15, "TXMKZQP": 0.15, "TUMKZQL": 0.10, "RXMKZQL": 0.05,
    },
    "duplicators_with_urls": {
        "TUMKZDL": 0.50, "TUMKZDP": 0.25, "TUMKZEL": 0.10, "TUMKZQL": 0.10, "TUMKHDL": 0.05,
    },
    "content_multipliers": {
        "RUIJHDL": 0.25, "YXVJHDN": 0.20, "TUIJHDL": 0.20, "RUMJHDN": 0.15, "YUIKHQL": 0.20,
    },
    "informed_contributors": {
        "TUIJHQP": 0.35, "TUMKHDP": 0.25, "TUVJZQP": 0.20, "TUMKZQP": 0.20,
    },
}

_LETTER_VALUES = {
    "T": "tweet", "R": "retweet", "Y": "reply",
    "I": "image", "V": "video", "M": "none",
    "P": "positive", "N": "negative", "L": "neutral",
}
# J-block posts carry one of these; a few event emojis give the event study
# a year-round background
DEFAULT_EMOJI_POOL = ("\U0001F600", "\U0001F44D", "\U0001F525", "\u2728", "\U0001F389",
                      "\U0001F31F", "\U0001F381", "\U0001F383")
_WORDS = ("offer", "update", "today", "news", "link", "check", "shop", "story", "post", "daily")


class InvalidSpec(ValueError):
    pass


@dataclass
class PlantedMutation:
    """From a position inside ``window`` (fractions of each sequence) onwards:

    - ``substitution``: ``block`` is emitted as ``replacement`` instead;
    - ``deletion``: ``block`` is no longer emitted;
    - ``insertion``: ``block`` replaces a draw with probability ``rate``.
    """

    family: str
    kind: str
    block: str
    replacement: str | None = None
    window: tuple[float, float] = (0.4, 0.6)
    rate: float = 0.3


@dataclass
class PlantedTransfer:
    """The first ``n_accounts`` of ``family`` are delayed copies of a founder.

    Account ``r`` repeats the founder's first block ``delay_r`` times before
    replaying the founder; delays grow with ``r`` up to ``max_delay``. Each
    replayed block is redrawn from the archetype with probability ``noise``.
    ``founder_length`` fixes the founder's block count (default: drawn from
    ``length_range`` like any other account).
    """

    family: str
    n_accounts: int = 10
    max_delay: int = 9
    noise: float = 0.0
    founder_length: int | None = None


@dataclass
class PlantedBurst:
    """Event-emoji posts by the first ``n_accounts`` of ``family`` around a date.

    ``profile`` maps day offset to posts per account per year.
    """

    family: str
    month: int
    day: int
    emojis: tuple[str, ...]
    n_accounts: int = 5
    years: tuple[int, ...] = (2015, 2016, 2017)
    profile: dict[int, int] = field(default_factory=lambda: {-2: 1, -1: 1, 0: 3, 1: 2})


@dataclass
class SyntheticSpec:
    archetypes: dict[str, dict[str, float]] = field(default_factory=lambda: dict(DEFAULT_ARCHETYPES))
    accounts_per_family: int = 25
    length_range: tuple[int, int] = (40, 120)
    year_range: tuple[int, int] = (2010, 2019)
    mutations: list[PlantedMutation] = field(default_factory=list)
    transfers: list[PlantedTransfer] = field(default_factory=list)
    bursts: list[PlantedBurst] = field(default_factory=list)
    emoji_pool: tuple[str, ...] = DEFAULT_EMOJI_POOL
    seed: int = 0

    def validate(self):
        if not self.archetypes:
            raise InvalidSpec("no archetypes")
        for name, probs in self.archetypes.items():
            if not probs or abs(sum(probs.values()) - 1.0) > 1e-9:
                raise InvalidSpec(f"archetype {name} probabilities must sum to 1")
            for b in probs:
                validate_block(b)
        lo, hi = self.length_range
        if not 3 <= lo <= hi:
            raise InvalidSpec("length_range must satisfy 3 <= min <= max")
        if self.accounts_per_family < 1:
            raise InvalidSpec("accounts_per_family must be positive")
        if not self.emoji_pool:
            raise InvalidSpec("emoji_pool is empty")
        for p in self.mutations:
            if p.family not in self.archetypes:
                raise InvalidSpec(f"unknown family {p.family}")
            if p.kind not in ("substitution", "deletion", "insertion"):
                raise InvalidSpec(f"unknown planted mutation kind {p.kind}")
            validate_block(p.block)
            if p.kind == "substitution":
                validate_block(p.replacement)
        for t in self.transfers:
            if t.family not in self.archetypes or t.n_accounts > self.accounts_per_family:
                raise InvalidSpec(f"bad planted transfer for {t.family}")
            if t.founder_length is not None and t.founder_length < 1:
                raise InvalidSpec("founder_length must be positive")
        for b in self.bursts:
            if b.family not in self.archetypes or not b.emojis:
                raise InvalidSpec(f"bad planted burst for {b.family}")
        return self

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["mutations"] = [PlantedMutation(**{**m, "window": tuple(m.get("window", (0.4, 0.6)))})
                          for m in d.get("mutations", [])]
        d["transfers"] = [PlantedTransfer(**t) for t in d.get("transfers", [])]
        d["bursts"] = [PlantedBurst(**{**b, "emojis": tuple(b["emojis"]),
                                       "years": tuple(b.get("years", (2015, 2016, 2017))),
                                       "profile": {int(k): v for k, v in b.get("profile", {}).items()}
                                       or {-2: 1, -1: 1, 0: 3, 1: 2}})
                       for b in d.get("bursts", [])]
        for key in ("length_range", "year_range", "emoji_pool"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


def _draw_blocks(rng, probs, n, planted):
    names = list(probs)
    base = np.array([probs[b] for b in names])
    starts = [rng.uniform(*p.window) for p in planted]
    out = []
    for k in range(n):
        frac = k / max(n - 1, 1)
        active = [p for p, s in zip(planted, starts) if frac >= s]
        weights = base.copy()
        for p in active:
            if p.kind == "deletion" and p.block in names:
                weights[names.index(p.block)] = 0.0
        if weights.sum() == 0:
            weights = base.copy()
        block = names[rng.choice(len(names), p=weights / weights.sum())]
        for p in active:
            if p.kind == "substitution" and block == p.block:
                block = p.replacement
            elif p.kind == "insertion" and rng.random() < p.rate:
                block = p.block
        out.append(block)
    return out


def _timestamps(rng, n, year_range):
    lo = datetime(year_range[0], 1, 1, tzinfo=timezone.utc).timestamp()
    hi = datetime(year_range[1], 12, 31, 23, 0, tzinfo=timezone.utc).timestamp()
    return np.sort(rng.integers(int(lo), int(hi), size=n)).tolist()


def long_tail_archetype(core: dict[str, float], n_tail: int, tail_mass: float, seed=0) -> dict[str, float]:
    """Scale ``core`` to ``1 - tail_mass`` and spread ``tail_mass`` evenly over
    ``n_tail`` further blocks picked at random from the vocabulary."""
    if not 0 <= tail_mass < 1:
        raise InvalidSpec("tail_mass must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    pool = [b for b in all_blocks() if b not in core]
    tail = [pool[i] for i in sorted(rng.choice(len(pool), n_tail, replace=False))]
    out = {b: p * (1 - tail_mass) for b, p in core.items()}
    out.update({b: tail_mass / n_tail for b in tail})
    return out


def _rows_for(account, blocks, times, rng, emoji_pool):
    rows = []
    texts: list[str] = []
    for i, (b, ts) in enumerate(zip(blocks, times)):
        if b[5] == "E":
            text = ""
        elif b[5] == "D" and texts:
            # verbatim copy so the duplicate survives normalization
            text = texts[int(rng.integers(len(texts)))]
        else:
            text = f"{account} {_WORDS[i % len(_WORDS)]} {i}"
            if b[3] == "J":
                text += " " + emoji_pool[int(rng.integers(len(emoji_pool)))]
            texts.append(text)
        if b[1] == "U":
            text = (text + " https://t.co/x" + str(i)).strip()
        rows.append({
            "account_id": account,
            "timestamp": int(ts),
            "action": _LETTER_VALUES[b[0]],
            "has_url": b[1] == "U",
            "media": _LETTER_VALUES[b[2]],
            "has_emoji": b[3] == "J",
            "has_hashtag": b[4] == "H",
            "text": text,
            "sentiment": _LETTER_VALUES[b[6]],
        })
    return rows


def _burst_rows(account, burst: PlantedBurst, rng):
    rows = []
    for year in burst.years:
        center = datetime(year, burst.month, burst.day, 12, tzinfo=timezone.utc).timestamp()
        for off, count in sorted(burst.profile.items()):
            for c in range(count):
                emoji = burst.emojis[int(rng.integers(len(burst.emojis)))]
                rows.append({
                    "account_id": account,
                    "timestamp": int(center + off * 86400 + c * 60),
                    "action": "tweet", "has_url": False, "media": "none",
                    "has_emoji": True, "has_hashtag": False,
                    "text": f"{account} season {year} {off} {c} {emoji}",
                    "sentiment": "positive",
                })
    return rows


def generate_synthetic(spec: SyntheticSpec):
    """Return ``(rows, truth)``: trace rows and the ground-truth document."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    families = list(spec.archetypes)
    n_total = len(families) * spec.accounts_per_family
    ids = [f"acct{n:04d}" for n in rng.permutation(n_total)]
    rows, labels, members = [], {}, {}
    lo, hi = spec.length_range
    for f_idx, fam in enumerate(families):
        accs = ids[f_idx * spec.accounts_per_family:(f_idx + 1) * spec.accounts_per_family]
        members[fam] = accs
        planted = [p for p in spec.mutations if p.family == fam]
        transfer = next((t for t in spec.transfers if t.family == fam), None)
        founder = None
        for r, acc in enumerate(accs):
            labels[acc] = fam
            n = int(rng.integers(lo, hi + 1))
            if transfer is not None and r < transfer.n_accounts:
                if founder is None:
                    n = transfer.founder_length or n
                    founder = _draw_blocks(rng, spec.archetypes[fam], n, planted)
                delay = round(r * transfer.max_delay / max(transfer.n_accounts - 1, 1))
                blocks = [founder[0]] * delay + list(founder)
                names = list(spec.archetypes[fam])
                probs = np.array([spec.archetypes[fam][b] for b in names])
                for k in range(delay, len(blocks)):
                    if rng.random() < transfer.noise:
                        blocks[k] = names[rng.choice(len(names), p=probs)]
            else:
                blocks = _draw_blocks(rng, spec.archetypes[fam], n, planted)
            times = _timestamps(rng, len(blocks), spec.year_range)
            rows.extend(_rows_for(acc, blocks, times, rng, spec.emoji_pool))
        for burst in (b for b in spec.bursts if b.family == fam):
            for acc in accs[: burst.n_accounts]:
                rows.extend(_burst_rows(acc, burst, rng))
    rows.sort(key=lambda r: (r["account_id"], r["timestamp"]))
    truth = {
        "seed": spec.seed,
        "families": families,
        "labels": dict(sorted(labels.items())),
        "members": members,
        "planted_mutations": [asdict(p) for p in spec.mutations],
        "planted_transfers": [
            {**asdict(t), "accounts": members[t.family][: t.n_accounts]} for t in spec.transfers
        ],
        "planted_bursts": [
            {**asdict(b), "accounts": members[b.family][: b.n_accounts]} for b in spec.bursts
        ],
    }
    return rows, truth


def _dump(obj):
    return json.dumps(obj, sort_keys=True, ensure_ascii=False)


def write_synthetic(spec: SyntheticSpec, trace_path, truth_path=None):
    rows, truth = generate_synthetic(spec)
    trace_path = Path(trace_path)
    with open(trace_path, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write(_dump(row) + "\n")
    if truth_path is not None:
        Path(truth_path).write_text(_dump(truth) + "\n", encoding="utf-8")
    return truth
