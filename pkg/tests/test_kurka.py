import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from calab.core import GuardExceeded, PeriodicConfig, SeedStream, rule_from_function, wolfram_rule
from calab.kurka import (
    CERTIFIED,
    REFUTED,
    certify_blocking,
    classify_kurka,
    cone_traces,
    equicontinuity_probe,
    falsify_blocking,
    find_blocking_words,
    iter_candidates,
    replay,
    trace,
)


def brute_first_bad(rule, w, s, p, T):
    """Earliest step at which two contexts of w disagree on [p, p+s); -1 if none up to T.

    Plain Python: evolve the full finite segment, shrinking by r per step.
    """
    r = rule.r
    nl = max(0, T * r - p)
    nr = max(0, p + s + T * r - len(w))
    traces = []
    for ctx in itertools.product(range(rule.k), repeat=nl + nr):
        seg = list(ctx[:nl]) + list(w) + list(ctx[nl:])
        base = nl + p
        rows = [tuple(seg[base:base + s])]
        for j in range(1, T + 1):
            seg = [rule(*seg[i:i + 2 * r + 1]) for i in range(len(seg) - 2 * r)]
            off = base - j * r
            rows.append(tuple(seg[off:off + s]))
        traces.append(rows)
    for j in range(T + 1):
        if len({t[j] for t in traces}) > 1:
            return j
    return -1


def test_trace_identity():
    x = PeriodicConfig.of("0110")
    assert trace(wolfram_rule(204), x, 0, 2, 3) == [(0, 1)] * 4


def test_trace_shift():
    x = PeriodicConfig.of("0010")
    assert trace(wolfram_rule(170), x, 0, 1, 3) == [(0,), (0,), (1,), (0,)]


def test_cone_traces_shape():
    rule = wolfram_rule(90)
    left = np.zeros((5, 3), dtype=np.uint8)
    right = np.zeros((5, 2), dtype=np.uint8)
    out = cone_traces(rule, (1, 0), left, right, 0, 1, 3)
    assert out.shape == (5, 4, 1)


def test_rule204_singletons_certified():
    for w in ((0,), (1,)):
        cert = certify_blocking(wolfram_rule(204), w, 1, 0, 32)
        assert cert.status == CERTIFIED and cert.counterexample is None


def test_rule170_01_refuted_at_2():
    cert = certify_blocking(wolfram_rule(170), "01", 1, 0, 4)
    assert cert.status == REFUTED
    assert cert.counterexample.step == 2
    assert replay(wolfram_rule(170), "01", 0, 1, 4, cert.counterexample) == 2


def test_rule51_certified():
    assert certify_blocking(wolfram_rule(51), "0", 1, 0, 32).certified


def test_rule128_zero_blocks():
    assert certify_blocking(wolfram_rule(128), "0", 1, 0, 20).certified
    assert not certify_blocking(wolfram_rule(128), "1", 1, 0, 3).certified


def test_rule90_refuted():
    cert = certify_blocking(wolfram_rule(90), "000", 1, 1, 5)
    assert cert.status == REFUTED
    assert cert.counterexample.step == 2


def test_argument_validation():
    rule = wolfram_rule(90)
    with pytest.raises(ValueError):
        certify_blocking(rule, "01", 3, 0, 2)
    with pytest.raises(ValueError):
        certify_blocking(rule, "01", 1, 2, 2)
    with pytest.raises(ValueError):
        certify_blocking(rule, "02", 1, 0, 2)
    with pytest.raises(ValueError):
        certify_blocking(rule, "01", 1, 0, -1)


def test_guard():
    with pytest.raises(GuardExceeded):
        certify_blocking(wolfram_rule(30), "0000", 1, 1, 12, max_contexts=16)


def test_certificate_dict():
    d = certify_blocking(wolfram_rule(170), "01", 1, 0, 4).to_dict()
    assert d["status"] == "refuted"
    assert d["counterexample"]["first_bad_step"] == 2
    assert len(d["counterexample"]["context_a"]) == 2


def test_refutation_contexts_replay_at_full_horizon():
    # contexts are padded to the full horizon-T cone and still replay
    rule = wolfram_rule(30)
    cert = certify_blocking(rule, "010", 1, 1, 6)
    assert not cert.certified
    cx = cert.counterexample
    assert len(cx.left_a) == 6 * 1 - 1 and len(cx.right_a) == 1 + 1 + 6 - 3
    assert replay(rule, "010", 1, 1, 6, cx) == cx.step


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 255), st.integers(1, 3), st.integers(0, 3), st.integers(0, 2**16))
def test_certify_matches_brute_force(n, length, T, seed):
    rule = wolfram_rule(n)
    gen = np.random.default_rng(seed)
    w = tuple(int(v) for v in gen.integers(0, 2, length))
    p = int(gen.integers(0, length))
    expected = brute_first_bad(rule, w, 1, p, T)
    cert = certify_blocking(rule, w, 1, p, T)
    if expected == -1:
        assert cert.certified
    else:
        assert not cert.certified
        assert cert.counterexample.step == expected
        assert replay(rule, w, p, 1, T, cert.counterexample) == expected


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**16))
def test_certify_radius2_matches_brute_force(seed):
    gen = np.random.default_rng(seed)
    table = gen.integers(0, 2, 32)
    rule = rule_from_function(2, 2, lambda *nb: int(table[int("".join(map(str, nb)), 2)]))
    w = tuple(int(v) for v in gen.integers(0, 2, 3))
    expected = brute_first_bad(rule, w, 2, 0, 2)
    cert = certify_blocking(rule, w, 2, 0, 2)
    assert cert.certified == (expected == -1)
    if expected != -1:
        assert cert.counterexample.step == expected


def test_falsify_finds_rule90_counterexample():
    cx = falsify_blocking(wolfram_rule(90), "000", 1, 1, 6, 64, SeedStream(3))
    assert cx is not None
    assert replay(wolfram_rule(90), "000", 1, 1, 6, cx) == cx.step


def test_falsify_none_on_blocking_word():
    assert falsify_blocking(wolfram_rule(204), "0", 1, 0, 8, 200, SeedStream(3)) is None
    assert falsify_blocking(wolfram_rule(90), "0", 1, 0, 8, 0, SeedStream(3)) is None


def test_iter_candidates_count():
    # words of length 1..3 with all offsets for s=1: 2*1 + 4*2 + 8*3
    assert sum(1 for _ in iter_candidates(2, 1, 3)) == 34


def test_find_blocking_words_identity():
    found = find_blocking_words(wolfram_rule(204), 1, 2, 8)
    assert len(found) == sum(1 for _ in iter_candidates(2, 1, 2))


def test_find_blocking_words_shift_none():
    assert find_blocking_words(wolfram_rule(170), 1, 4, 6) == []


def test_classify_kurka_controls():
    assert classify_kurka(wolfram_rule(204), T=16).blocking_word_found
    v = classify_kurka(wolfram_rule(170), max_len=4, T=8)
    assert v.verdict == "no-blocking-word-found" and not v.blocking_word_found
    assert v.candidates_checked == sum(1 for _ in iter_candidates(2, 1, 4))


def test_classify_kurka_radius_zero():
    v = classify_kurka(rule_from_function(3, 0, lambda a: (a + 1) % 3))
    assert v.verdict == "equicontinuous" and v.blocking_word_found


def test_classify_kurka_dict():
    d = classify_kurka(wolfram_rule(0), max_len=2, T=4).to_dict()
    assert d["verdict"] == "blocking-word-found"
    assert d["envelope"] == {"s": 1, "max_len": 2, "T": 4}


def test_equicontinuity_probe_identity():
    x = PeriodicConfig.of([0] * 64)
    est = equicontinuity_probe(wolfram_rule(204), x, 2, 3, 20, 500, SeedStream(0))
    assert est.fraction == 1.0 and est.samples == 500


def test_equicontinuity_probe_shift():
    # the shift reveals cell n+1 at step n+1-m, so agreement needs k^-(T+m-n) luck
    x = PeriodicConfig.of([0] * 64)
    est = equicontinuity_probe(wolfram_rule(170), x, 1, 3, 6, 4000, SeedStream(1))
    # closed form 2^-(6+1-3) = 1/16; 5 sigma is ~0.019
    assert abs(est.fraction - 1 / 16) < 0.02


def test_equicontinuity_probe_validation():
    x = PeriodicConfig.of([0] * 8)
    with pytest.raises(ValueError):
        equicontinuity_probe(wolfram_rule(0), x, 3, 2, 4, 10, SeedStream(0))
