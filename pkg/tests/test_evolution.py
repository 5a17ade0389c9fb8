import random
from datetime import datetime, timezone

import numpy as np
import pytest

from botdna.clustering import FamilyAssignment
from botdna.evolution import (
    EmptySequence,
    EmptyUniverse,
    EventStudyConfig,
    NoTextAvailable,
    ScanMutation,
    TooFewAccounts,
    between_family_density,
    confusion_from_counts,
    count_emojis,
    detect_transfers,
    event_study,
    family_mutation_set,
    family_shared_matrix,
    mutation_set,
    pair_confusion,
    rank_by_avg_similarity,
    scan_mutations,
    shared_mutation_score,
    transfer_confusion,
)
from botdna.ingestion import Corpus, PostRecord
from botdna.similarity import SimilarityMatrix

A, A1, B, C = "TXMKZDL", "TXMKZDP", "RUIJHQP", "YXVJHEN"


def kinds(scan):
    return [(m.type, m.block, m.position) for m in scan]


def test_scan_examples():
    assert kinds(scan_mutations([A])) == [("Insertion", A, 0)]
    assert kinds(scan_mutations([A, A])) == [("Insertion", A, 0), ("Identity", A, 1)]
    scan = scan_mutations([A, A1, A])
    assert kinds(scan) == [
        ("Insertion", A, 0), ("Substitution", A1, 1), ("Identity", A, 2), ("Deletion", A1, 2),
    ]
    assert scan[1].reference == A
    with pytest.raises(EmptySequence):
        scan_mutations([])


def test_scan_substitution_uses_earliest_reference():
    scan = scan_mutations(["TXMKZDP", "TXMKZDN", "TXMKZDL"])
    assert [m.reference for m in scan[:3]] == [None, "TXMKZDP", "TXMKZDP"]


def test_shared_scores():
    assert shared_mutation_score({1, 2}, {1, 2}) == 1.0
    assert shared_mutation_score({1}, {2}) == 0.0
    assert shared_mutation_score({1, 2}, {1}) == 0.5
    assert shared_mutation_score(set(), {1}) == 0.0


def test_identity_excluded_from_sets():
    assert mutation_set(scan_mutations([A, A])) == {("Insertion", A)}


def test_family_shared_matrix():
    same = {f"a{i}": scan_mutations([A, B]) for i in range(3)}
    mat = family_shared_matrix(1, same)
    assert mat.summary["average"] == 1.0 and mat.summary["sparsity"] == 0.0
    disjoint = {"a": scan_mutations([A]), "b": scan_mutations([B]), "c": scan_mutations([C])}
    assert family_shared_matrix(1, disjoint).summary["sparsity"] == 1.0
    with pytest.raises(TooFewAccounts):
        family_shared_matrix(1, {"a": scan_mutations([A])})


def test_density():
    assert between_family_density(221, 167, 154)[1] == pytest.approx(0.3969, abs=5e-5)
    assert between_family_density(221, 282, 219)[1] == pytest.approx(0.4354, abs=5e-5)
    assert between_family_density({1, 2}, {3}) == (0, 0.0)
    a, b = {1, 2, 3}, {2, 3, 4, 5}
    assert between_family_density(a, b) == between_family_density(b, a) == (2, 2 / 7)
    rng = random.Random(0)
    for _ in range(200):
        x = set(rng.sample(range(30), rng.randint(1, 20)))
        y = set(rng.sample(range(30), rng.randint(1, 20)))
        assert between_family_density(x, y)[1] <= 0.5


def test_rank_by_avg_similarity():
    ids = ["b", "a"]
    M = SimilarityMatrix(ids, np.array([[1, 0.5], [0.5, 1]]))
    assert rank_by_avg_similarity(M, ids, 1) == (["a"], ["a"])
    rng = np.random.default_rng(3)
    X = rng.random((30, 30))
    S = (X + X.T) / 2
    np.fill_diagonal(S, 1)
    ids = [f"u{i:02d}" for i in range(30)]
    most, least = rank_by_avg_similarity(SimilarityMatrix(ids, S), ids, 10)
    avg = {ids[i]: (S[i].sum() - 1) / 29 for i in range(30)}
    order = sorted(ids, key=lambda a: -avg[a])
    assert most == order[:10] and least == order[::-1][:10]


def scan_at(kind, block, pos, acc="x"):
    return ScanMutation(acc, pos, kind, block)


def test_transfer_examples():
    assert detect_transfers([scan_at("Insertion", B, 2, "s")], [scan_at("Insertion", B, 5, "t")])
    assert not detect_transfers([scan_at("Insertion", B, 5)], [scan_at("Insertion", B, 2)])
    t = detect_transfers([scan_at("Insertion", B, 1)], [scan_at("Substitution", B, 4)])
    assert t and t[0].target_type == "Substitution"


def test_transfer_direction_is_antisymmetric():
    rng = random.Random(6)
    pool = [A, A1, B, C, "TUMKZDL"]
    for _ in range(200):
        s = scan_mutations([rng.choice(pool) for _ in range(8)], "s")
        t = scan_mutations([rng.choice(pool) for _ in range(8)], "t")
        fwd = {(x.block, x.source_type): x for x in detect_transfers(s, t)}
        for y in detect_transfers(t, s):
            x = fwd.get((y.block, y.target_type))
            if x is not None and x.target_type == y.source_type:
                assert x.source_position == x.target_position


def test_confusion_published_row():
    c = confusion_from_counts(2258848, 114128, 8320, 3763600)
    assert (round(c.precision, 4), round(c.recall, 4), round(c.f1, 4)) == (0.9519, 0.9963, 0.9736)
    zero = confusion_from_counts(0, 0, 0)
    assert (zero.precision, zero.recall, zero.f1) == (0, 0, 0)


def test_confusion_counts_partition_universe():
    rng = random.Random(4)
    pool = [A, A1, B, C, "TUMKZDL", "TUMKZDP"]
    scans = {f"a{i}": scan_mutations([rng.choice(pool) for _ in range(10)], f"a{i}") for i in range(5)}
    universe = family_mutation_set(scans.values())
    for aware in (True, False):
        c = transfer_confusion(1, "g", scans, list(scans), universe, aware)
        assert c.pairs == 20
        assert c.tp + c.fp + c.fn + c.tn == len(universe) * 20
    presence = transfer_confusion(1, "g", scans, list(scans), universe, False)
    # over ordered pairs, target-only and source-only totals coincide
    assert presence.fp == presence.fn
    with pytest.raises(EmptyUniverse):
        transfer_confusion(1, "g", scans, list(scans), set())


def test_pair_confusion_position_aware():
    s = [scan_at("Insertion", A, 0), scan_at("Insertion", B, 3)]
    t = [scan_at("Insertion", A, 2), scan_at("Insertion", B, 1), scan_at("Insertion", C, 0)]
    universe = {("Insertion", x) for x in (A, B, C, A1)}
    assert pair_confusion(s, t, universe) == (1, 1, 1, 1)
    assert pair_confusion(s, t, universe, position_aware=False) == (2, 1, 0, 1)


def ts(y, m, d, h=12):
    return datetime(y, m, d, h, tzinfo=timezone.utc).timestamp()


def post(acc, t, text=""):
    return PostRecord(acc, t, "tweet", False, "none", False, bool(text), text)


def test_event_study():
    cfg = EventStudyConfig("christmas", 12, 25, ("\U0001F384", "\U0001F385"), window=3)
    records = [
        post("a", ts(2016, 12, 25), "merry \U0001F384\U0001F384"),
        post("a", ts(2016, 12, 23), "soon \U0001F385"),
        post("a", ts(2017, 1, 1), "late \U0001F384"),
        post("b", ts(2016, 12, 26), "\U0001F384"),
        post("b", ts(2016, 7, 1), "summer"),
        post("c", ts(2016, 12, 25), "\U0001F384\ufe0f"),
        post("d", ts(2016, 12, 25), "nothing"),
    ]
    corpus = Corpus.from_records(records)
    assignment = FamilyAssignment(["a", "b", "c", "d"], np.array([1, 1, 2, 2]), 2)
    M = SimilarityMatrix(["a", "b", "c", "d"], np.array(
        [[1, 0.6, 0.1, 0.2], [0.6, 1, 0.3, 0.4], [0.1, 0.3, 1, 0.5], [0.2, 0.4, 0.5, 1]]))
    rep = event_study(corpus, assignment, cfg, M)
    f1 = rep[1]
    assert f1["monthly"][11] == 4 and f1["monthly"][0] == 1
    assert f1["daily"]["a"] == [0, 1, 0, 2, 0, 0, 0]
    assert f1["daily"]["b"] == [0, 0, 0, 0, 1, 0, 0]
    assert f1["daily_total"] == [0, 1, 0, 2, 1, 0, 0]
    assert f1["participation"] == {"before": 1, "during": 1, "after": 1}
    assert f1["participants"] == ["a", "b"]
    assert f1["similarity_mean"] == pytest.approx(0.6)
    # variation selector stripped; single participant means similarity 0
    assert rep[2]["daily"]["c"][3] == 1
    assert rep[2]["similarity_mean"] == 0.0
    empty = Corpus.from_records([post("a", ts(2016, 1, 1))])
    with pytest.raises(NoTextAvailable):
        event_study(empty, FamilyAssignment(["a"], np.array([1]), 1), cfg, M)


def test_window_wraps_year_boundary():
    cfg = EventStudyConfig("ny", 1, 1, ("\U0001F386",), window=2)
    records = [post("a", ts(2016, 12, 31), "\U0001F386"), post("a", ts(2017, 1, 2), "\U0001F386 x")]
    rep = event_study(Corpus.from_records(records), FamilyAssignment(["a"], np.array([1]), 1), cfg,
                      SimilarityMatrix(["a"], np.ones((1, 1))))
    assert rep[1]["daily"]["a"] == [0, 1, 0, 1, 0]


def test_event_config_presets_and_counting():
    xmas = EventStudyConfig.preset("christmas")
    assert (xmas.month, xmas.day, len(xmas.emojis)) == (12, 25, 10)
    assert len(EventStudyConfig.preset("halloween").emojis) == 10
    assert count_emojis("\U0001F384 \U0001F384\ufe0f", ["\U0001F384"]) == 2
    with pytest.raises(ValueError):
        EventStudyConfig("x", 1, 1, ())
