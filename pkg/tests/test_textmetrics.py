import random
import string

import pytest
from hypothesis import given, settings, strategies as st

from modaudit.errors import InputError
from modaudit.textmetrics import align, lcs_length, report, sim

from .oracles import lcs_length_recursive, optimal_matched_count

TEXT = st.text(alphabet=string.ascii_lowercase + "0123456789 #", max_size=40)


class TestSim:
    def test_identity(self):
        assert sim("chat", "chat") == 1.0

    def test_lcs_example(self):
        # LCS("chat", "chit") = "cht"
        assert lcs_length("chat", "chit") == 3
        assert sim("chat", "chit") == 0.75

    def test_disjoint_alphabets(self):
        assert sim("abc", "xyz") == 0.0

    def test_empty_conventions(self):
        assert sim("", "") == 1.0
        assert sim("", "abc") == 0.0
        assert sim("abc", "") == 0.0

    @given(TEXT, TEXT)
    def test_matches_recursive_reference(self, a, b):
        assert lcs_length(a, b) == lcs_length_recursive(a, b)

    @given(TEXT, TEXT)
    def test_symmetric_and_bounded(self, a, b):
        s = sim(a, b)
        assert abs(s - sim(b, a)) < 1e-12
        assert 0.0 <= s <= 1.0

    @given(TEXT, TEXT)
    def test_one_iff_equal(self, a, b):
        assert (sim(a, b) == 1.0) == (a == b)


class TestAlign:
    def test_identical_lists(self):
        pairs = align(["hi", "yo"], ["hi", "yo"])
        assert all(p.matched and p.sim == 1.0 for p in pairs)

    def test_crossed_order(self):
        # sim("world", "wurld") = 2*4/10 = 0.8, exactly at tau
        pairs = align(["hello", "world"], ["wurld", "hello"])
        assert pairs[0].ocr == "hello" and pairs[0].sim == 1.0
        assert pairs[1].ocr == "wurld" and pairs[1].sim == pytest.approx(0.8)

    def test_unmatched_gt(self):
        pairs = align(["abc"], [])
        assert len(pairs) == 1
        assert pairs[0].ocr is None and not pairs[0].matched

    def test_injective_both_sides(self):
        rng = random.Random(7)
        gt = ["".join(rng.choices(string.ascii_lowercase, k=12)) for _ in range(20)]
        ocr = gt[:: -1] + gt[:5]
        pairs = align(gt, ocr)
        used = [p.ocr for p in pairs if p.ocr is not None]
        assert len(used) == len(set(used))

    def test_index_pairing_reproduced_when_diagonal_clears_tau(self):
        rng = random.Random(11)
        gt, ocr = _perturbed_corpus(rng, n=25, drop=0, extra=0, shuffle=False)
        pairs = align(gt, ocr)
        for g, p, o in zip(gt, pairs, ocr):
            assert p.gt == g and p.ocr == o


class TestReport:
    def test_hand_computed_example(self):
        rep = report(["hello", "world"], ["wurld", "hello"])
        assert rep.recall == 1.0
        assert rep.ams == pytest.approx(0.9)

    def test_no_ocr_output(self):
        rep = report(["abc"], [])
        assert rep.recall == 0.0
        assert rep.ams == 0.0
        assert rep.zero_matches

    def test_empty_gt_rejected(self):
        with pytest.raises(InputError):
            report([], ["x"])

    def test_recall_monotone_in_added_correct_lines(self):
        gt = ["alpha beta", "gamma delta", "epsilon zeta"]
        ocr = ["alpha beta"]
        r1 = report(gt, ocr).recall
        r2 = report(gt, ocr + ["gamma delta"]).recall
        assert r2 >= r1


def _perturbed_corpus(rng, n, drop, extra, dup=0, shuffle=True):
    """gt lines plus an index-aligned OCR side with light corruption.

    Lines are mutually dissimilar by construction so cross-pair similarity
    stays below tau. (Generation uses the fast sim; the oracles only enter
    when the result is verified.)
    """
    gt = []
    while len(gt) < n:
        cand = "".join(rng.choices(string.ascii_lowercase + "  ", k=rng.randint(15, 40)))
        if all(sim(cand, g) < 0.7 for g in gt):
            gt.append(cand)
    ocr = []
    for g in gt:
        chars = list(g)
        # one substitution keeps sim comfortably above 0.8 at these lengths
        pos = rng.randrange(len(chars))
        chars[pos] = rng.choice(string.ascii_lowercase)
        ocr.append("".join(chars))
    for _ in range(drop):
        if ocr:
            ocr.pop(rng.randrange(len(ocr)))
    for _ in range(dup):
        if ocr:
            ocr.append(ocr[rng.randrange(len(ocr))])
    for _ in range(extra):
        ocr.append("".join(rng.choices(string.digits, k=rng.randint(10, 30))))
    if shuffle:
        rng.shuffle(ocr)
    return gt, ocr


def test_greedy_never_undercuts_index_pairing_on_aligned_corpora():
    rng = random.Random(5)
    for _ in range(20):
        gt, ocr = _perturbed_corpus(rng, n=rng.randint(1, 25), drop=0, extra=0, shuffle=False)
        greedy = sum(p.matched for p in align(gt, ocr))
        indexed = sum(sim(g, o) >= 0.8 for g, o in zip(gt, ocr))
        assert greedy >= indexed


def test_greedy_matches_near_optimal_on_messy_corpora():
    rng = random.Random(2024)
    for _ in range(40):
        n = rng.randint(1, 30)
        gt, ocr = _perturbed_corpus(
            rng, n=n, drop=rng.randint(0, n // 3), extra=rng.randint(0, 4), dup=rng.randint(0, 2)
        )
        got = sum(p.matched for p in align(gt, ocr))
        best = optimal_matched_count(gt, ocr, 0.8, sim)
        assert best - 1 <= got <= best
