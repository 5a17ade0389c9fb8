import json

import pytest

from botdna.ingestion import SequenceEncoder, parse_trace_file
from botdna.synthetic import (
    DEFAULT_ARCHETYPES,
    InvalidSpec,
    PlantedBurst,
    PlantedMutation,
    PlantedTransfer,
    SyntheticSpec,
    generate_synthetic,
    long_tail_archetype,
    write_synthetic,
)


def small_spec(**kw):
    base = dict(accounts_per_family=4, length_range=(10, 20), seed=3)
    base.update(kw)
    return SyntheticSpec(**base)


def test_deterministic_per_seed():
    a = generate_synthetic(small_spec())
    b = generate_synthetic(small_spec())
    c = generate_synthetic(small_spec(seed=4))
    assert a == b
    assert a[0] != c[0]


def test_truth_document():
    rows, truth = generate_synthetic(small_spec())
    assert len(truth["labels"]) == 16
    assert sorted(truth["members"]) == sorted(DEFAULT_ARCHETYPES)
    assert {r["account_id"] for r in rows} == set(truth["labels"])


def test_trace_roundtrips_through_ingestion(tmp_path):
    spec = small_spec(archetypes={"only": {"TXMKZDL": 0.5, "RUIJHQP": 0.5}})
    write_synthetic(spec, tmp_path / "t.jsonl", tmp_path / "g.json")
    corpus = parse_trace_file(tmp_path / "t.jsonl")
    assert corpus.report.rows_skipped == 0
    for seq in SequenceEncoder().fit_transform(corpus):
        blocks = set(seq.blocks)
        # the first duplicate-text draw has nothing to copy and reads as unique
        assert blocks <= {"TXMKZDL", "TXMKZQL", "RUIJHQP"}
        assert seq.blocks.count("TXMKZQL") <= 1
    truth = json.loads((tmp_path / "g.json").read_text())
    assert truth["seed"] == 3


def test_planted_substitution_changes_late_blocks():
    spec = small_spec(
        archetypes={"f": {"TUMKZDL": 1.0}},
        length_range=(50, 50),
        mutations=[PlantedMutation("f", "substitution", "TUMKZDL", "TXMKZDL", window=(0.5, 0.5))],
    )
    rows, _ = generate_synthetic(spec)
    first = [r for r in rows if r["account_id"] == rows[0]["account_id"]]
    assert [r["has_url"] for r in first] == [True] * 25 + [False] * 25


def test_planted_transfer_clones_founder():
    spec = small_spec(
        archetypes={"f": {"TXMKZQL": 0.5, "RUIJHQP": 0.5}},
        accounts_per_family=5,
        transfers=[PlantedTransfer("f", n_accounts=3, max_delay=4, founder_length=12)],
    )
    rows, truth = generate_synthetic(spec)
    accs = truth["planted_transfers"][0]["accounts"]
    actions = {a: [r["action"] for r in rows if r["account_id"] == a] for a in accs}
    assert [len(actions[a]) for a in accs] == [12, 14, 16]
    assert actions[accs[2]][4:] == actions[accs[1]][2:] == actions[accs[0]]


def test_planted_burst_rows():
    burst = PlantedBurst("unique_tweeters", 12, 25, ("\U0001F384",), n_accounts=2, years=(2015,))
    rows, truth = generate_synthetic(small_spec(bursts=[burst]))
    tree = [r for r in rows if "\U0001F384" in r["text"]]
    assert len(tree) == 2 * sum(burst.profile.values())
    assert {r["account_id"] for r in tree} == set(truth["planted_bursts"][0]["accounts"])


def test_long_tail_archetype():
    arch = long_tail_archetype({"TXMKZDL": 1.0}, 20, 0.4, seed=1)
    assert len(arch) == 21
    assert sum(arch.values()) == pytest.approx(1.0)
    assert arch["TXMKZDL"] == pytest.approx(0.6)
    assert arch == long_tail_archetype({"TXMKZDL": 1.0}, 20, 0.4, seed=1)


@pytest.mark.parametrize("bad", [
    dict(archetypes={"f": {"TXMKZDL": 0.5}}),
    dict(archetypes={"f": {"TXMKZD": 1.0}}),
    dict(length_range=(2, 5)),
    dict(mutations=[PlantedMutation("nope", "deletion", "TXMKZDL")]),
    dict(mutations=[PlantedMutation("unique_tweeters", "swap", "TXMKZDL")]),
    dict(transfers=[PlantedTransfer("unique_tweeters", n_accounts=99)]),
    dict(bursts=[PlantedBurst("unique_tweeters", 12, 25, ())]),
    dict(emoji_pool=()),
])
def test_invalid_specs(bad):
    with pytest.raises((InvalidSpec, ValueError)):
        generate_synthetic(small_spec(**bad))


def test_spec_dict_roundtrip():
    spec = small_spec(
        mutations=[PlantedMutation("unique_tweeters", "deletion", "TXMKZDL")],
        transfers=[PlantedTransfer("unique_tweeters", n_accounts=2, founder_length=30)],
        bursts=[PlantedBurst("unique_tweeters", 10, 31, ("\U0001F383",))],
    )
    again = SyntheticSpec.from_dict(json.loads(json.dumps(spec.to_dict())))
    assert again == spec
