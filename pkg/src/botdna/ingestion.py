"""Trace-file parsing and derivation of the non-literal post features."""

from __future__ import annotations

import csv
import json
import re
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from sklearn.base import BaseEstimator, TransformerMixin

from .core import BehaviourSequence, build_sequence, encode_post

ACTIONS = ("tweet", "retweet", "reply")
MEDIA = ("image", "video", "none")
SENTIMENTS = ("positive", "negative", "neutral")
FIELDS = (
    "account_id", "timestamp", "action", "has_url", "media",
    "has_hashtag", "has_emoji", "text", "sentiment",
)

_URL_RE = re.compile(r"(https?://\S+|www\.\S+)", re.IGNORECASE)
_MENTION_RE = re.compile(r"@\w+")
_WS_RE = re.compile(r"\s+")
_TOKEN_RE = re.compile(r"[a-z']+")


class IngestionError(ValueError):
    pass


class UnknownFormat(IngestionError):
    pass


class NoValidRows(IngestionError):
    pass


class InvalidRange(ValueError):
    pass


class RowError(ValueError):
    """Raised for a single bad row; ``reason`` keys the skip report."""

    def __init__(self, reason):
        super().__init__(reason)
        self.reason = reason


@dataclass(frozen=True)
class PostRecord:
    account_id: str
    timestamp: float
    action: str
    has_url: bool
    media: str
    has_hashtag: bool
    has_emoji: bool
    text: str = ""
    sentiment: str | None = None

    def __post_init__(self):
        if not self.timestamp > 0:
            raise RowError("invalid:timestamp")
        if self.action not in ACTIONS:
            raise RowError("invalid:action")
        if self.media not in MEDIA:
            raise RowError("invalid:media")
        if self.sentiment is not None and self.sentiment not in SENTIMENTS:
            raise RowError("invalid:sentiment")

    @property
    def year(self) -> int:
        return datetime.fromtimestamp(self.timestamp, tz=timezone.utc).year


@dataclass
class SkipReport:
    rows_total: int = 0
    rows_skipped: int = 0
    reasons: Counter = field(default_factory=Counter)

    def skip(self, reason):
        self.rows_skipped += 1
        self.reasons[reason] += 1

    def to_dict(self):
        return {
            "rows_total": self.rows_total,
            "rows_skipped": self.rows_skipped,
            "reasons": dict(sorted(self.reasons.items())),
        }


@dataclass
class Corpus:
    """Records grouped by account, each group sorted by timestamp (stable)."""

    accounts: dict[str, list[PostRecord]]
    year_range: tuple[int, int] | None = None
    report: SkipReport = field(default_factory=SkipReport)

    @classmethod
    def from_records(cls, records: Iterable[PostRecord], year_range=None, report=None):
        grouped: dict[str, list[PostRecord]] = {}
        for rec in records:
            grouped.setdefault(rec.account_id, []).append(rec)
        accounts = {
            acc: sorted(grouped[acc], key=lambda r: r.timestamp) for acc in sorted(grouped)
        }
        return cls(accounts, year_range, report or SkipReport())

    @property
    def n_records(self):
        return sum(len(v) for v in self.accounts.values())

    def records(self):
        for acc in self.accounts:
            yield from self.accounts[acc]


def parse_timestamp(value) -> float:
    if value is None or value == "":
        raise RowError("missing:timestamp")
    if isinstance(value, bool):
        raise RowError("invalid:timestamp")
    if isinstance(value, (int, float)):
        return float(value)
    text = str(value).strip()
    try:
        return float(text)
    except ValueError:
        pass
    try:
        dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError:
        raise RowError("invalid:timestamp") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def _parse_bool(value, name):
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, float)) and value in (0, 1):
        return bool(value)
    if isinstance(value, str):
        v = value.strip().lower()
        if v in ("true", "1", "yes", "y", "t"):
            return True
        if v in ("false", "0", "no", "n", "f"):
            return False
    if value is None or value == "":
        raise RowError(f"missing:{name}")
    raise RowError(f"invalid:{name}")


def parse_row(row: dict) -> PostRecord:
    for name in FIELDS[:7]:
        if name not in row or row[name] is None or row[name] == "":
            raise RowError(f"missing:{name}")
    sentiment = row.get("sentiment")
    if sentiment == "":
        sentiment = None
    text = row.get("text")
    return PostRecord(
        account_id=str(row["account_id"]),
        timestamp=parse_timestamp(row["timestamp"]),
        action=str(row["action"]).strip().lower(),
        has_url=_parse_bool(row["has_url"], "has_url"),
        media=str(row["media"]).strip().lower(),
        has_hashtag=_parse_bool(row["has_hashtag"], "has_hashtag"),
        has_emoji=_parse_bool(row["has_emoji"], "has_emoji"),
        text="" if text is None else str(text),
        sentiment=None if sentiment is None else str(sentiment).strip().lower(),
    )


def _iter_rows(path: Path, fmt: str):
    if fmt == "jsonl":
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                try:
                    row = json.loads(line)
                except json.JSONDecodeError:
                    yield None
                    continue
                yield row if isinstance(row, dict) else None
    elif fmt == "csv":
        with open(path, encoding="utf-8", newline="") as fh:
            yield from csv.DictReader(fh)
    else:
        raise UnknownFormat(fmt)


def parse_trace_file(path, fmt: str | None = None) -> Corpus:
    """Read a JSONL or CSV trace file.

    Bad rows are skipped and counted in ``corpus.report``. Raises
    :class:`NoValidRows` if nothing survives.
    """
    path = Path(path)
    if fmt is None:
        fmt = path.suffix.lstrip(".").lower()
    if fmt not in ("jsonl", "csv"):
        raise UnknownFormat(fmt)
    report = SkipReport()
    records = []
    for row in _iter_rows(path, fmt):
        report.rows_total += 1
        if row is None:
            report.skip("malformed")
            continue
        try:
            records.append(parse_row(row))
        except RowError as exc:
            report.skip(exc.reason)
    if not records:
        raise NoValidRows(str(path))
    return Corpus.from_records(records, report=report)


def filter_years(corpus: Corpus, start_year: int, end_year: int) -> Corpus:
    """Keep records whose UTC calendar year lies in ``[start_year, end_year]``."""
    if start_year > end_year:
        raise InvalidRange(f"{start_year} > {end_year}")
    kept = [r for r in corpus.records() if start_year <= r.year <= end_year]
    return Corpus.from_records(kept, (start_year, end_year), corpus.report)


def normalize_text(text: str) -> str:
    text = _URL_RE.sub(" ", text.lower())
    text = _MENTION_RE.sub(" ", text)
    return _WS_RE.sub(" ", text).strip()


def derive_duplication(texts: Sequence[str]) -> list[str]:
    """Classify each text (in time order) as duplicate/unique/empty.

    Duplication is account-local: a text is a duplicate if its normalized form
    matches any earlier post by the same account.
    """
    seen = set()
    out = []
    for text in texts:
        norm = normalize_text(text or "")
        if not norm:
            out.append("empty")
        elif norm in seen:
            out.append("duplicate")
        else:
            out.append("unique")
            seen.add(norm)
    return out


@lru_cache(maxsize=1)
def load_lexicon() -> dict[str, int]:
    lexicon = {}
    raw = resources.files("botdna.data").joinpath("sentiment_lexicon.tsv").read_text("utf-8")
    for line in raw.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        token, sign = line.split("\t")
        lexicon[token] = int(sign)
    return lexicon


def derive_sentiment(text: str, label: str | None = None, lexicon=None) -> str:
    if label is not None:
        return label
    lexicon = load_lexicon() if lexicon is None else lexicon
    score = sum(lexicon.get(tok, 0) for tok in _TOKEN_RE.findall((text or "").lower()))
    if score > 0:
        return "positive"
    if score < 0:
        return "negative"
    return "neutral"


def record_features(record: PostRecord, duplication: str) -> dict[str, str]:
    return {
        "action": record.action,
        "url": "url" if record.has_url else "no_url",
        "media": record.media,
        "emoji": "emoji" if record.has_emoji else "no_emoji",
        "hashtag": "hashtag" if record.has_hashtag else "no_hashtag",
        "text": duplication,
        "sentiment": derive_sentiment(record.text, record.sentiment),
    }


def encode_account(records: Sequence[PostRecord]) -> BehaviourSequence:
    """Encode one account's time-ordered records into its behaviour sequence."""
    records = sorted(records, key=lambda r: r.timestamp)
    dup = derive_duplication([r.text for r in records])
    posts = [(r.timestamp, encode_post(record_features(r, d))) for r, d in zip(records, dup)]
    return build_sequence(posts, records[0].account_id if records else "")


class SequenceEncoder(TransformerMixin, BaseEstimator):
    """Turn a :class:`Corpus` into one :class:`BehaviourSequence` per account.

    Stateless; ``fit`` only validates input.
    """

    def fit(self, X, y=None):
        self._check(X)
        return self

    def transform(self, X):
        return [encode_account(recs) for recs in self._check(X).accounts.values()]

    @staticmethod
    def _check(X):
        if not isinstance(X, Corpus):
            raise TypeError(f"expected Corpus, got {type(X).__name__}")
        return X
