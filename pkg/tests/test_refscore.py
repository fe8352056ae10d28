import json
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from adscreen.refscore import (
    ReferenceSet, align, bleu_n, brevity_penalty, count_chunks, load_references, meteor,
    modified_precision, score_against_references,
)

SENT = ["the", "boy", "is", "on", "the", "stool"]
WORDS = st.sampled_from(["the", "boy", "boys", "girl", "reach", "reaching", "stool", "a", "jar", "is"])
TOKS = st.lists(WORDS, min_size=0, max_size=10)
REF = st.lists(WORDS, min_size=1, max_size=10)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
@pytest.mark.parametrize("smoothing", [True, False])
def test_bleu_identity(n, smoothing):
    assert bleu_n(SENT, SENT, n, smoothing=smoothing) == 1.0


def test_bleu_clipped_precision():
    assert modified_precision(["the", "the", "the"], ["the", "boy"], 1) == (1, 3)
    assert bleu_n(["the", "the", "the"], ["the", "boy"], 1) == pytest.approx(1 / 3, abs=1e-12)


def test_bleu_disjoint_and_empty():
    assert bleu_n(["girl"], ["boy"], 1) == 0.0
    assert bleu_n(["girl", "jar"], ["boy", "jar"], 4, smoothing=True) > 0.0
    assert bleu_n([], ["boy"], 2) == 0.0
    with pytest.raises(ValueError):
        bleu_n(SENT, SENT, 5)
    with pytest.raises(ValueError):
        bleu_n(SENT, SENT, 0)
    with pytest.raises(ValueError):
        bleu_n(SENT, [], 1)


def test_bleu_smoothing_value():
    # p1 = 2/2, p2: no shared bigram -> 0.1/1; BP = exp(1 - 2/2) = 1
    assert bleu_n(["jar", "boy"], ["boy", "jar"], 2) == pytest.approx((1.0 * 0.1) ** 0.5, abs=1e-15)
    assert bleu_n(["jar", "boy"], ["boy", "jar"], 2, smoothing=False) == 0.0


def test_bleu_individual_mode():
    cand, ref = ["the", "boy", "is", "up"], ["the", "boy", "is", "on", "the", "stool"]
    bp = brevity_penalty(4, 6)
    assert bleu_n(cand, ref, 2, mode="individual") == pytest.approx(bp * 2 / 3, abs=1e-15)
    assert bleu_n(cand, ref, 1, mode="individual") == bleu_n(cand, ref, 1)


def test_brevity_penalty():
    assert brevity_penalty(3, 2) == 1.0
    assert brevity_penalty(2, 2) == 1.0
    assert brevity_penalty(1, 2) == pytest.approx(0.36787944117144233)
    assert brevity_penalty(0, 2) == 0.0


def test_bleu_reference_fixture(data_dir):
    fixture = json.loads((data_dir / "bleu_cases.json").read_text())
    assert len(fixture["cases"]) == 20
    for case in fixture["cases"]:
        for n, expected in case["bleu"].items():
            got = bleu_n(case["candidate"], case["reference"], int(n), smoothing=False)
            assert got == pytest.approx(expected, abs=1e-9)


def test_meteor_examples():
    five = ["the", "boy", "takes", "a", "cookie"]
    assert meteor(five, five) == pytest.approx(0.996, abs=1e-12)
    assert meteor(["boys"], ["boy"]) == pytest.approx(0.5, abs=1e-12)
    assert meteor(["girl", "sink"], ["boy", "jar"]) == 0.0
    assert meteor([], ["boy"]) == 0.0


def test_meteor_asymmetric_weighting():
    # m = 2, P = 2/2, R = 2/4: recall is weighted 9 times as much as precision
    cand, ref = ["boy", "jar"], ["boy", "jar", "the", "sink"]
    p, r = 1.0, 0.5
    f_mean = 10 * p * r / (r + 9 * p)
    assert meteor(cand, ref) == pytest.approx(f_mean * (1 - 0.5 * (1 / 2) ** 3), abs=1e-15)


def test_alignment_prefers_contiguous():
    mapping = align(["the", "boy"], ["the", "girl", "the", "boy"])
    assert mapping == {0: 2, 1: 3}
    assert count_chunks(mapping) == 1
    assert count_chunks({0: 3, 1: 0}) == 2
    assert count_chunks({}) == 0


@settings(max_examples=200, deadline=None)
@given(REF)
def test_meteor_identity(r):
    assert meteor(r, r) == pytest.approx(1 - 0.5 / len(r) ** 3, abs=1e-12)
    for n in range(1, 5):
        assert bleu_n(r, r, n) == 1.0


@settings(max_examples=200, deadline=None)
@given(TOKS, REF)
def test_alignment_is_matching(c, r):
    mapping = align(c, r)
    assert len(set(mapping.values())) == len(mapping)
    exact = sum((Counter(c) & Counter(r)).values())
    assert len(mapping) >= exact
    assert 0.0 <= meteor(c, r) <= 1.0


@settings(max_examples=100, deadline=None)
@given(TOKS, st.lists(REF, min_size=1, max_size=4), st.randoms())
def test_score_against_references_properties(c, refs, rnd):
    s = score_against_references(c, ReferenceSet(tuple(tuple(r) for r in refs)))
    assert set(s) == {"bleu1", "bleu2", "bleu3", "bleu4", "meteor"}
    assert all(0.0 <= v <= 1.0 for v in s.values())
    shuffled = list(refs)
    rnd.shuffle(shuffled)
    s2 = score_against_references(c, ReferenceSet(tuple(tuple(r) for r in shuffled)))
    for k in s:
        assert s2[k] == pytest.approx(s[k], abs=1e-12)
    doubled = score_against_references(c, ReferenceSet(tuple(tuple(r) for r in refs + refs)))
    for k in s:
        assert doubled[k] == pytest.approx(s[k], abs=1e-12)


def test_average_of_identity_and_disjoint():
    refs = ReferenceSet((("the", "boy"), ("a", "jar")))
    assert score_against_references(["the", "boy"], refs)["bleu1"] == 0.5
    single = score_against_references(["the", "boy"], ReferenceSet((("the", "boy"),)))
    dup = score_against_references(["the", "boy"], ReferenceSet((("the", "boy"), ("the", "boy"))))
    assert single == dup


def test_reference_set_validation(tmp_path):
    with pytest.raises(ValueError):
        ReferenceSet(())
    with pytest.raises(ValueError):
        ReferenceSet((("a",), ()))
    p = tmp_path / "refs.txt"
    p.write_text("# comment\nThe boy, reaching.\n\nA girl!\n")
    refs = load_references(p)
    assert refs.references == (("the", "boy", "reaching"), ("a", "girl"))
    assert len(refs) == 2
    assert refs.source == str(p)
