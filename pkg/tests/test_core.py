import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from calab.core import (
    NO_DISAGREEMENT,
    Alphabet,
    BernoulliMeasure,
    Cylinder,
    LocalRule,
    PeriodicConfig,
    SeedStream,
    all_configs,
    compose,
    cylinder_measure,
    distance_window,
    format_rule_text,
    iterate,
    load_rule,
    parse_rule_text,
    resample_outside,
    rule_from_function,
    sample_config,
    shift,
    step,
    window,
    wolfram_rule,
)

cfg = PeriodicConfig.of


def configs_of_period(N, k=2):
    for cells in itertools.product(range(k), repeat=N):
        yield PeriodicConfig.of(cells, k)


# ---------------------------------------------------------------- rules

def test_wolfram_204_is_identity():
    rule = wolfram_rule(204)
    for a, b, c in itertools.product(range(2), repeat=3):
        assert rule(a, b, c) == b


def test_wolfram_90_bit():
    assert wolfram_rule(90)(1, 0, 0) == (90 >> 4) & 1 == 1


def test_wolfram_zero():
    assert wolfram_rule(0).table == (0,) * 8


@pytest.mark.parametrize("n", [-1, 256])
def test_wolfram_out_of_range(n):
    with pytest.raises(ValueError):
        wolfram_rule(n)


def test_rule_table_validation():
    with pytest.raises(ValueError):
        LocalRule(Alphabet(2), 1, (0,) * 7)
    with pytest.raises(ValueError):
        LocalRule(Alphabet(2), 0, (0, 2))
    with pytest.raises(ValueError):
        Alphabet(1)


def test_rule_file_roundtrip(tmp_path):
    rule = rule_from_function(3, 1, lambda a, b, c: (a + c) % 3)
    path = tmp_path / "sum3.rule"
    path.write_text(format_rule_text(rule))
    loaded = load_rule(str(path))
    assert loaded == rule
    assert load_rule("eca:110") == wolfram_rule(110)


@pytest.mark.parametrize("text", ["2 1\n0 1 0", "2\n0 1", "2 1\n0 1 0 1 0 1 0 x", ""])
def test_rule_file_rejects_malformed(text):
    with pytest.raises(ValueError):
        parse_rule_text(text)


def test_load_rule_unknown():
    with pytest.raises(ValueError):
        load_rule("not-a-rule")


# ---------------------------------------------------------------- simulation

def test_step_identity():
    x = cfg("0110100")
    assert step(wolfram_rule(204), x) == x


def test_step_shift_left():
    assert step(wolfram_rule(170), cfg("0010")) == cfg("0100")


def test_step_rule90_by_hand():
    assert step(wolfram_rule(90), cfg("00100000")) == cfg("01010000")


def test_step_alphabet_mismatch():
    with pytest.raises(ValueError):
        step(wolfram_rule(90), PeriodicConfig.of("012", 3))


def test_step_small_period_wraps():
    # N=1 and N=2 neighborhoods wrap onto themselves
    assert step(wolfram_rule(90), cfg("1")) == cfg("0")
    assert step(wolfram_rule(150), cfg("1")) == cfg("1")
    big = rule_from_function(2, 3, lambda *nb: sum(nb) % 2)
    x = cfg("10")
    expected = [sum(x[i + d] for d in range(-3, 4)) % 2 for i in range(2)]
    assert step(big, x) == cfg(expected)


def test_iterate_zero_is_identity():
    x = cfg("0110")
    assert iterate(wolfram_rule(30), x, 0) == x


def test_iterate_not_twice():
    rule = wolfram_rule(51)
    for N in range(1, 5):
        for x in configs_of_period(N):
            assert iterate(rule, x, 2) == x


def test_iterate_shift_full_rotation():
    x = cfg("0010110")
    assert iterate(wolfram_rule(170), x, x.N) == x


def test_iterate_negative():
    with pytest.raises(ValueError):
        iterate(wolfram_rule(0), cfg("0"), -1)


def test_shift():
    x = cfg("0110")
    assert shift(x, 0) == x
    assert shift(x, x.N) == x
    assert shift(cfg("01"), 1) == cfg("10")


def test_window():
    x = cfg("0110")
    assert window(x, 0, 2) == (0, 1)
    assert window(x, -1, 1) == (0, 0)
    assert window(x, 0, 4) == (0, 1, 1, 0)
    with pytest.raises(ValueError):
        window(x, 2, 2)


def test_distance_window():
    x = cfg("00000000")
    assert distance_window(x, x, 3) == NO_DISAGREEMENT
    assert distance_window(x, cfg("10000000"), 3) == 0
    y = cfg("00010000")  # agrees on -2..2, differs at 3
    assert distance_window(x, y, 3) == 3
    with pytest.raises(ValueError):
        distance_window(x, cfg("0"), 3)


def test_cylinder_measure():
    uni = BernoulliMeasure.uniform(2)
    assert cylinder_measure(uni, Cylinder((0, 1, 1))) == 1 / 8
    assert cylinder_measure(uni, Cylinder(())) == 1
    assert cylinder_measure(BernoulliMeasure((0.25, 0.75)), Cylinder((1, 1))) == 0.5625


def test_measure_validation():
    with pytest.raises(ValueError):
        BernoulliMeasure((0.5, 0.6))
    with pytest.raises(ValueError):
        BernoulliMeasure((1.5, -0.5))


def test_cylinder_contains():
    x = cfg("0110")
    assert Cylinder((1, 1), 1).contains(x)
    assert not Cylinder((1, 1), 0).contains(x)
    assert Cylinder((0, 0), -1).contains(x)


# ---------------------------------------------------------------- sampling

def test_sample_config_deterministic():
    m = BernoulliMeasure.uniform(2)
    a = sample_config(m, 100, SeedStream(7, 3))
    b = sample_config(m, 100, SeedStream(7, 3))
    assert a == b
    assert a != sample_config(m, 100, SeedStream(7, 4))


def test_sample_config_fraction():
    # 6 sigma for Binomial(10^5, 1/2) is about 0.0095
    x = sample_config(BernoulliMeasure.uniform(2), 10**5, SeedStream(1))
    assert abs(x.cells.mean() - 0.5) <= 0.01


def test_sample_config_degenerate():
    x = sample_config(BernoulliMeasure((1.0, 0.0)), 50, SeedStream(1))
    assert not x.cells.any()


def test_resample_outside_full_period():
    x = cfg("011010")
    assert resample_outside(x, 0, 6, BernoulliMeasure.uniform(2), SeedStream(0)) == x


def test_resample_outside_too_long():
    with pytest.raises(ValueError):
        resample_outside(cfg("01"), 0, 3, BernoulliMeasure.uniform(2), SeedStream(0))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 2), min_size=4, max_size=40), st.integers(-20, 20),
       st.integers(1, 4), st.integers(0, 2**32))
def test_resample_outside_keeps_window(cells, i1, width, seed):
    x = PeriodicConfig.of(cells, 3)
    width = min(width, x.N)
    y = resample_outside(x, i1, i1 + width, BernoulliMeasure.uniform(3), SeedStream(seed))
    assert window(y, i1, i1 + width) == window(x, i1, i1 + width)


def test_resample_outside_letter_frequencies():
    # 20000 draws x 10 free cells; 3 sigma for p=1/3 at n=2e5 is ~0.0032
    x = PeriodicConfig.of([0] * 12, 3)
    counts = np.zeros(3)
    for i in range(2000):
        y = resample_outside(x, 0, 2, BernoulliMeasure.uniform(3), SeedStream(5, i))
        counts += np.bincount(y.cells[2:], minlength=3)
    freq = counts / counts.sum()
    assert np.all(np.abs(freq - 1 / 3) <= 3 * np.sqrt((1 / 3) * (2 / 3) / counts.sum()))


# ---------------------------------------------------------------- composition

def _behaves_like(rule, fn, N_max=8):
    for N in range(1, N_max + 1):
        X = all_configs(2, N)
        for row in X:
            x = cfg(row)
            if step(rule, x) != fn(x):
                return False
    return True


def test_compose_identity():
    f = wolfram_rule(30)
    assert _behaves_like(compose(wolfram_rule(204), f), lambda x: step(f, x))


def test_compose_double_shift():
    assert _behaves_like(compose(wolfram_rule(170), wolfram_rule(170)), lambda x: shift(x, 2))


def test_compose_not_not():
    assert _behaves_like(compose(wolfram_rule(51), wolfram_rule(51)), lambda x: x)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 255), st.integers(0, 255), st.lists(st.integers(0, 1), min_size=1, max_size=20))
def test_compose_matches_sequential(f, g, cells):
    x = cfg(cells)
    F, G = wolfram_rule(f), wolfram_rule(g)
    assert step(compose(F, G), x) == step(G, step(F, x))


def test_compose_alphabet_mismatch():
    with pytest.raises(ValueError):
        compose(wolfram_rule(0), rule_from_function(3, 0, lambda a: a))


# ---------------------------------------------------------------- invariants

@pytest.mark.parametrize("n", range(256))
def test_shift_commutation_exhaustive(n):
    rule = wolfram_rule(n)
    for N in range(1, 7):
        X = all_configs(2, N)
        for row in X:
            x = cfg(row)
            assert step(rule, shift(x, 1)) == shift(step(rule, x), 1)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 4), st.integers(0, 2), st.integers(0, 2**32), st.integers(8, 40))
def test_shift_commutation_random(k, r, seed, N):
    gen = np.random.default_rng(seed)
    rule = LocalRule(Alphabet(k), r, tuple(int(v) for v in gen.integers(0, k, k ** (2 * r + 1))))
    x = PeriodicConfig(Alphabet(k), gen.integers(0, k, N))
    s = int(gen.integers(-N, N))
    assert step(rule, shift(x, s)) == shift(step(rule, x), s)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 255), st.integers(0, 2**32))
def test_locality(n, seed):
    rule = wolfram_rule(n)
    gen = np.random.default_rng(seed)
    N = 16
    x = PeriodicConfig.of(gen.integers(0, 2, N))
    j = int(gen.integers(0, N))
    cells = x.cells.copy()
    cells[j] ^= 1
    y = PeriodicConfig.of(cells)
    fx, fy = step(rule, x), step(rule, y)
    for i in range(N):
        if min((i - j) % N, (j - i) % N) > rule.r:
            assert fx[i] == fy[i]


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=6, max_size=6),
       st.lists(st.integers(0, 1), min_size=6, max_size=6), st.integers(1, 5))
def test_distance_properties(a, b, cap):
    x, y = cfg(a), cfg(b)
    assert distance_window(x, x, cap) == NO_DISAGREEMENT
    assert distance_window(x, y, cap) == distance_window(y, x, cap)
    n = distance_window(x, y, cap)
    assert n == NO_DISAGREEMENT or 0 <= n <= cap  # d = 2^-n <= 1


@settings(max_examples=60)
@given(st.lists(st.integers(0, 2), max_size=6), st.lists(st.integers(0, 2), max_size=6),
       st.lists(st.floats(0.01, 1.0), min_size=3, max_size=3), st.integers(-5, 5))
def test_cylinder_measure_multiplicative(u, v, weights, anchor):
    total = sum(weights)
    m = BernoulliMeasure(tuple(w / total for w in weights[:-1]) + (1 - sum(w / total for w in weights[:-1]),))
    lhs = cylinder_measure(m, Cylinder(tuple(u + v), anchor))
    rhs = cylinder_measure(m, Cylinder(tuple(u), anchor)) * cylinder_measure(m, Cylinder(tuple(v), anchor + 3))
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-300)


def test_seed_stream_substreams_independent_of_order():
    s = SeedStream(99)
    a = s.substream(3).generator().integers(0, 2**31, 5)
    _ = s.substream(1).generator().integers(0, 2**31, 100)
    b = s.substream(3).generator().integers(0, 2**31, 5)
    assert np.array_equal(a, b)
    with pytest.raises(ValueError):
        SeedStream(-1)
