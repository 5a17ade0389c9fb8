"""Symbolic alphabet, blocks and behaviour sequences.

A block is the 7-letter encoding of one post, laid out in the fixed order
``[action, url, media, emoji, hashtag, text, sentiment]``. Blocks are kept as
plain ``str`` objects throughout the package; the gap block is ``"-------"``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Mapping, Sequence

BLOCK_LENGTH = 7
GAP = "-"
GAP_BLOCK = GAP * BLOCK_LENGTH

# Block layout. Each entry: (feature id, {value: letter}).
FEATURES = (
    ("action", {"tweet": "T", "retweet": "R", "reply": "Y"}),
    ("url", {"url": "U", "no_url": "X"}),
    ("media", {"image": "I", "video": "V", "none": "M"}),
    ("emoji", {"emoji": "J", "no_emoji": "K"}),
    ("hashtag", {"hashtag": "H", "no_hashtag": "Z"}),
    ("text", {"duplicate": "D", "unique": "Q", "empty": "E"}),
    ("sentiment", {"positive": "P", "negative": "N", "neutral": "L"}),
)
FEATURE_IDS = tuple(name for name, _ in FEATURES)
ENCODER = {name: table for name, table in FEATURES}
DECODER = {name: {v: k for k, v in table.items()} for name, table in FEATURES}
POSITION_ALPHABETS = tuple(frozenset(table.values()) for _, table in FEATURES)
LETTER_FEATURE = {
    letter: name for name, table in FEATURES for letter in table.values()
}
LETTERS = tuple(LETTER_FEATURE)


class BlockError(ValueError):
    pass


class MissingFeature(BlockError):
    pass


class UnknownFeatureValue(BlockError):
    pass


class GapInBlock(BlockError):
    pass


class InvalidBlock(BlockError):
    pass


class EmptyPostList(ValueError):
    pass


def encode_post(features: Mapping[str, str]) -> str:
    """Encode one post's feature values as a block string.

    >>> encode_post({"action": "tweet", "url": "no_url", "media": "none",
    ...              "emoji": "no_emoji", "hashtag": "no_hashtag",
    ...              "text": "duplicate", "sentiment": "neutral"})
    'TXMKZDL'
    """
    letters = []
    for name in FEATURE_IDS:
        if name not in features:
            raise MissingFeature(name)
        value = features[name]
        try:
            letters.append(ENCODER[name][value])
        except (KeyError, TypeError):
            raise UnknownFeatureValue(f"{name}={value!r}") from None
    return "".join(letters)


def decode_block(block: str) -> dict[str, str]:
    """Inverse of :func:`encode_post`."""
    if GAP in block:
        raise GapInBlock(block)
    validate_block(block)
    return {name: DECODER[name][letter] for name, letter in zip(FEATURE_IDS, block)}


def is_gap(block: str) -> bool:
    return block == GAP_BLOCK


def validate_block(block: str, allow_gap: bool = False) -> str:
    if not isinstance(block, str) or len(block) != BLOCK_LENGTH:
        raise InvalidBlock(repr(block))
    if allow_gap and block == GAP_BLOCK:
        return block
    for letter, alphabet in zip(block, POSITION_ALPHABETS):
        if letter not in alphabet:
            raise InvalidBlock(repr(block))
    return block


def hamming(a: str, b: str) -> int:
    return sum(x != y for x, y in zip(a, b))


def all_blocks() -> list[str]:
    """The full 648-block vocabulary in lexicographic order."""
    alphabets = [sorted(table.values()) for _, table in FEATURES]
    return sorted("".join(p) for p in product(*alphabets))


@dataclass(frozen=True)
class BehaviourSequence:
    account_id: str
    blocks: tuple[str, ...]
    timestamps: tuple[float, ...] | None = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        if self.timestamps is not None:
            ts = tuple(self.timestamps)
            if len(ts) != len(self.blocks):
                raise ValueError("timestamps and blocks differ in length")
            if any(b < a for a, b in zip(ts, ts[1:])):
                raise ValueError("timestamps must be non-decreasing")
            object.__setattr__(self, "timestamps", ts)

    def __len__(self):
        return len(self.blocks)

    @property
    def letters(self) -> str:
        return "".join(self.blocks)


def build_sequence(
    posts: Sequence[tuple[float, str]], account_id: str = ""
) -> BehaviourSequence:
    """Order ``(timestamp, block)`` pairs by time; equal times keep input order."""
    if not posts:
        raise EmptyPostList(account_id)
    ordered = sorted(posts, key=lambda p: p[0])
    for _, block in ordered:
        validate_block(block)
    return BehaviourSequence(
        account_id,
        tuple(b for _, b in ordered),
        tuple(float(t) for t, _ in ordered),
    )
