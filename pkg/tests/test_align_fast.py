"""Oracle equivalence: the vectorized search must reproduce the literal
enumeration exactly, including tie-breaks, on every input."""

import random

import pytest
from hypothesis import given, settings, strategies as st

from fasa.align import Thresholds, TranscriptIndex, best_match, best_match_fast

DEFAULTS = Thresholds()

token = st.sampled_from([f"w{i}" for i in range(12)])
seq = st.lists(token, max_size=25).map(tuple)


@given(seq, st.lists(token, max_size=6).map(tuple))
@settings(max_examples=300)
def test_matches_oracle_on_random_instances(T, pred):
    assert best_match_fast(pred, T, DEFAULTS) == best_match(pred, T, DEFAULTS)


@given(seq, st.lists(token, max_size=6).map(tuple))
@settings(max_examples=150)
def test_matches_oracle_paper_strict(T, pred):
    th = Thresholds(paper_strict_windows=True)
    assert best_match_fast(pred, T, th) == best_match(pred, T, th)


@given(seq, st.lists(token, max_size=5).map(tuple),
       st.sampled_from([0.3, 0.5, 1.5, 2.0]))
@settings(max_examples=150)
def test_matches_oracle_varied_rho(T, pred, rho):
    th = Thresholds(len_ratio_rho=rho)
    assert best_match_fast(pred, T, th) == best_match(pred, T, th)


def test_pruned_path_matches_full_scan():
    # transcript long enough that only a few anchors can see pred tokens
    T = [f"t{i}" for i in range(300)]
    pred = ["t40", "t41", "missing", "t43"]
    fast = best_match_fast(pred, T, DEFAULTS)
    oracle = best_match(pred, T, DEFAULTS)
    assert fast == oracle
    assert fast.match.best_start == 41

    # all-out-of-vocabulary prediction exercises the no-candidate branch
    pred = [f"x{i}" for i in range(5)]
    assert best_match_fast(pred, T, DEFAULTS) == best_match(pred, T, DEFAULTS)


def test_shared_index_is_equivalent():
    T = tuple(f"w{i % 7}" for i in range(40))
    index = TranscriptIndex(T)
    for pred in [("w1", "w2"), ("zz",), ("w3", "w3", "w4")]:
        assert best_match_fast(pred, T, DEFAULTS, index=index) == \
            best_match_fast(pred, T, DEFAULTS)


@pytest.mark.parametrize("m,L", [(1, 1), (1, 5), (5, 1), (2, 8)])
def test_degenerate_sizes(m, L):
    rng = random.Random(m * 100 + L)
    vocab = ["a", "b", "c"]
    T = [rng.choice(vocab) for _ in range(m)]
    pred = [rng.choice(vocab) for _ in range(L)]
    for th in (DEFAULTS, Thresholds(paper_strict_windows=True)):
        assert best_match_fast(pred, T, th) == best_match(pred, T, th)
