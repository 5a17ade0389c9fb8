import random

import numpy as np
import pytest

from botdna.alignment import (
    AlignmentScoring,
    FamilyAligner,
    align_family,
    consensus,
    degap,
    pad_group,
    pairwise_align,
    progressive_msa,
    quartile_groups,
    read_fasta,
    write_fasta,
)
from botdna.core import GAP_BLOCK

from conftest import make_seq

G = GAP_BLOCK
A, B, C, D = "TXMKZDL", "TUMKZDL", "RUIJHQP", "TXMKZDP"


def nw_oracle(a, b, sc=AlignmentScoring()):
    """Textbook Needleman-Wunsch; ties prefer diagonal, then up, then left."""
    n, m = len(a), len(b)
    H = [[0] * (m + 1) for _ in range(n + 1)]
    P = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        H[i][0], P[i][0] = H[i - 1][0] + sc.pair(a[i - 1], G), 1
    for j in range(1, m + 1):
        H[0][j], P[0][j] = H[0][j - 1] + sc.pair(G, b[j - 1]), 2
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            options = [
                H[i - 1][j - 1] + sc.pair(a[i - 1], b[j - 1]),
                H[i - 1][j] + sc.pair(a[i - 1], G),
                H[i][j - 1] + sc.pair(G, b[j - 1]),
            ]
            best = max(options)
            H[i][j], P[i][j] = best, options.index(best)
    out_a, out_b = [], []
    i, j = n, m
    while i or j:
        mv = P[i][j]
        if mv == 0:
            out_a.append(a[i - 1]); out_b.append(b[j - 1]); i -= 1; j -= 1
        elif mv == 1:
            out_a.append(a[i - 1]); out_b.append(G); i -= 1
        else:
            out_a.append(G); out_b.append(b[j - 1]); j -= 1
    return H[n][m], tuple(out_a[::-1]), tuple(out_b[::-1])


def column_score(ra, rb, sc=AlignmentScoring()):
    return sum(sc.pair(x, y) for x, y in zip(ra, rb))


def test_pair_scores():
    sc = AlignmentScoring()
    assert sc.pair(A, A) == 2
    assert sc.pair(A, B) == 1  # 6 of 7 letters agree
    assert sc.pair(A, C) == -1
    assert sc.pair(A, G) == sc.pair(G, A) == -2
    assert sc.pair(G, G) == 0
    assert sc.pair("TXMKZDL", "RUIKZDL") == 1  # exactly 4 agree
    assert sc.pair("TXMKZDL", "RUIJZDL") == -1  # 3 agree


def test_pairwise_matches_oracle():
    rng = random.Random(7)
    alphabet = [A, B, C, D, "YXVJHEN"]
    for _ in range(200):
        a = [rng.choice(alphabet) for _ in range(rng.randint(0, 12))]
        b = [rng.choice(alphabet) for _ in range(rng.randint(0, 12))]
        if not a and not b:
            continue
        got = pairwise_align(a, b)
        assert got == nw_oracle(a, b)
        assert column_score(got[1], got[2]) == got[0]


def test_pairwise_simple_cases():
    assert pairwise_align([A, B, C], [A, C]) == (2, (A, B, C), (A, G, C))
    assert pairwise_align([A], [A]) == (2, (A,), (A,))


def test_two_sequence_msa_equals_pairwise():
    rng = random.Random(11)
    alphabet = [A, B, C, D]
    for _ in range(100):
        a = tuple(rng.choice(alphabet) for _ in range(rng.randint(1, 15)))
        b = tuple(rng.choice(alphabet) for _ in range(rng.randint(1, 15)))
        _, ra, rb = pairwise_align(a, b)
        assert progressive_msa([a, b]) == [ra, rb]


def test_msa_degap_roundtrip_and_equal_width():
    rng = random.Random(5)
    alphabet = [A, B, C, D, "YXVJHEN", "RXMKZQL"]
    for _ in range(30):
        rows = [tuple(rng.choice(alphabet) for _ in range(rng.randint(1, 25))) for _ in range(rng.randint(2, 8))]
        out = progressive_msa(rows)
        assert len({len(r) for r in out}) == 1
        assert [degap(r) for r in out] == rows


def test_msa_identical_rows_need_no_gaps():
    rows = [(A, B, C)] * 4
    assert progressive_msa(rows) == rows


def test_quartile_groups():
    seqs = [make_seq(f"s{n}", [A] * n) for n in (1, 2, 3, 4, 5, 6, 7, 8)]
    groups = quartile_groups(seqs)
    # Q1 = 2.75, Q2 = 4.5, Q3 = 6.25 with linear interpolation
    assert [[len(s) for s in g.members] for g in groups] == [[1, 2], [3, 4], [5, 6], [7, 8]]
    assert [g.L_max for g in groups] == [2, 4, 6, 8]
    small = quartile_groups(seqs[:3])
    assert len(small[0].members) == 3 and all(not g.members for g in small[1:])


def test_pad_group():
    g = quartile_groups([make_seq("a", [A, B]), make_seq("b", [C])])[0]
    assert pad_group(g) == [(A, B), (C, G)]
    with pytest.raises(ValueError):
        pad_group(quartile_groups([])[0])


def family_sequences(rng, n=12):
    alphabet = [A, B, C, D]
    return [make_seq(f"acc{i:02d}", [rng.choice(alphabet) for _ in range(rng.randint(3, 20))]) for i in range(n)]


def test_align_family_and_fasta_roundtrip(tmp_path):
    seqs = family_sequences(random.Random(2))
    af = align_family(3, seqs)
    by_id = {s.account_id: s.blocks for s in seqs}
    assert sorted(acc for _, acc, _ in af.rows()) == sorted(by_id)
    for _, acc, row in af.rows():
        assert degap(row) == by_id[acc]
    write_fasta({3: af}, tmp_path / "a.fasta")
    back = read_fasta(tmp_path / "a.fasta")
    assert back[3].groups == af.groups
    assert af.total_blocks == sum(g.width * len(g.rows) for g in af.groups)


def test_align_family_threads_identical():
    seqs = family_sequences(random.Random(9), 20)
    assert align_family(1, seqs, n_jobs=1).groups == align_family(1, seqs, n_jobs=4).groups


def test_consensus():
    assert consensus([(A, G, C), (A, B, G), (B, G, G)]) == [(A, 2 / 3), (B, 1.0), (C, 1.0)]
    assert consensus([(G,), (G,)]) == [(G, 0.0)]


def test_family_aligner_estimator():
    seqs = family_sequences(random.Random(4), 8)
    labels = np.array([1, 1, 1, 1, 2, 2, 2, 2])
    model = FamilyAligner().fit(seqs, labels)
    assert sorted(model.transform()) == [1, 2]
    assert len(model.aligned_[2]) == 4
    assert model.get_params()["gap"] == -2
    with pytest.raises(ValueError):
        FamilyAligner().fit(seqs, labels[:3])
