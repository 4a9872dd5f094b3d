"""Monte Carlo estimates behind the measure-theoretic A/B/C classification.

Three quantities are estimated under the uniform Bernoulli measure:

* the conditional mass of the trace class B_[-m,m)(x) inside the cylinder
  [x(-n, n)], truncated at horizon T (``estimate_class_ratio``);
* the probability p_t that re-randomizing an interval I ever changes a site
  at distance > t from I within T steps (``estimate_p_t``);
* the verdict combining both with the blocking-word search.

Sampling is chunked; chunk c draws from ``rng.substream(c)`` so results do
not depend on how chunks are scheduled.  Each sample's propagation reach is
recorded once and thresholded for every t, so indicators are exactly
monotone in t.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .core import (
    BernoulliMeasure,
    LocalRule,
    PeriodicConfig,
    SeedStream,
    resample_outside_array,
    sample_config,
    step_array,
)
from .kurka import KurkaVerdict, classify_kurka
from .stats import chunks, wilson_interval

DIRECTIONS = ("left", "right", "both")


@dataclass(frozen=True)
class RatioEstimate:
    m: int
    n: int
    T: int
    samples: int
    successes: int
    ratio: float
    ci: tuple[float, float]


@dataclass(frozen=True)
class PropagationEstimate:
    interval: tuple[int, int]
    t: int
    T: int
    samples: int
    hits: int
    p_hat: float
    ci: tuple[float, float]
    direction: str


@dataclass(frozen=True)
class GilmanParams:
    kurka_max_len: int = 6
    kurka_T: int = 16
    m: int = 1
    n_list: tuple[int, ...] = (2, 4, 8, 16)
    ratio_T: int = 64
    ratio_samples: int = 2000
    points: int = 3
    t_list: tuple[int, ...] = tuple(range(17))
    prop_T: int = 64
    prop_samples: int = 10_000
    interval: tuple[int, int] = (0, 1)
    threshold: float = 0.99
    ratio_threshold: float = 0.5


@dataclass(frozen=True)
class GilmanVerdict:
    cls: str
    direction: str | None
    kurka: KurkaVerdict
    curves: tuple[tuple[RatioEstimate, ...], ...]
    profiles: dict[str, tuple[PropagationEstimate, ...]]
    params: GilmanParams
    surjective: bool | None = None
    notes: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "class": self.cls,
            "direction": self.direction,
            "surjective": self.surjective,
            "kurka": self.kurka.to_dict(),
            "ratio_curves": [[_ratio_dict(e) for e in curve] for curve in self.curves],
            "profiles": {d: [_prop_dict(e) for e in prof] for d, prof in self.profiles.items()},
            "params": {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self.params).items()},
            "notes": list(self.notes),
        }


def _ratio_dict(e: RatioEstimate) -> dict:
    return {"m": e.m, "n": e.n, "T": e.T, "samples": e.samples, "ratio": e.ratio, "ci": list(e.ci)}


def _prop_dict(e: PropagationEstimate) -> dict:
    return {"t": e.t, "T": e.T, "samples": e.samples, "p_hat": e.p_hat, "ci": list(e.ci),
            "direction": e.direction, "interval": list(e.interval)}


# ---------------------------------------------------------------- trace classes

def _window_positions(m: int, N: int) -> np.ndarray:
    if 2 * m > N:
        raise ValueError(f"window [-{m}, {m}) does not fit in period {N}")
    return np.arange(-m, m) % N


def trace_equivalent(rule: LocalRule, x: PeriodicConfig, y: PeriodicConfig, m: int, T: int) -> bool:
    """F^j(x) and F^j(y) agree on [-m, m) for every 0 <= j <= T."""
    if x.N != y.N or x.alphabet != y.alphabet:
        raise ValueError("configurations must share alphabet and period")
    if T < 0:
        raise ValueError("T must be nonnegative")
    pos = _window_positions(m, x.N)
    a, b = x.cells, y.cells
    for j in range(T + 1):
        if j:
            a, b = step_array(rule, a), step_array(rule, b)
        if not np.array_equal(a[pos], b[pos]):
            return False
    return True


def _trace_equal_batch(rule: LocalRule, x: np.ndarray, ys: np.ndarray, pos: np.ndarray, T: int) -> np.ndarray:
    ok = np.all(ys[:, pos] == x[pos], axis=1)
    for _ in range(T):
        x = step_array(rule, x)
        ys = step_array(rule, ys)
        ok &= np.all(ys[:, pos] == x[pos], axis=1)
    return ok


def estimate_class_ratio(rule: LocalRule, x: PeriodicConfig, m: int, n: int, T: int,
                         samples: int, rng: SeedStream,
                         measure: BernoulliMeasure | None = None) -> RatioEstimate:
    """Fraction of y in [x(-n, n)] that are trace-equivalent to x on [-m, m) up to T."""
    if not 1 <= m <= n:
        raise ValueError("need n >= m >= 1")
    if T < 1 or samples < 1:
        raise ValueError("need T >= 1 and samples >= 1")
    measure = measure or BernoulliMeasure.uniform(rule.k)
    pos = _window_positions(m, x.N)
    hits = 0
    for c, size in chunks(samples):
        ys = resample_outside_array(x.cells, -n, n, measure, size, rng.substream(c).generator())
        hits += int(_trace_equal_batch(rule, x.cells, ys, pos, T).sum())
    return RatioEstimate(m, n, T, samples, hits, hits / samples, wilson_interval(hits, samples))


def mu_equicontinuity_curve(rule: LocalRule, x: PeriodicConfig, m: int, n_list, T: int,
                            samples: int, rng: SeedStream) -> list[RatioEstimate]:
    n_list = list(n_list)
    if any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be strictly increasing")
    if n_list and n_list[0] < m:
        raise ValueError("every n must be >= m")
    return [estimate_class_ratio(rule, x, m, n, T, samples, rng.substream(i))
            for i, n in enumerate(n_list)]


# ---------------------------------------------------------------- propagation

def default_period(rule: LocalRule, i1: int, i2: int, t_max: int, T: int) -> int:
    reach = T * rule.r
    return max((i2 - i1) + 2 * reach + 1, 2 * (t_max + reach) + 1)


def _check_period(rule: LocalRule, i1: int, i2: int, t_max: int, T: int, N: int) -> None:
    reach = T * rule.r
    if N <= (i2 - i1) + 2 * reach or t_max + reach >= N / 2:
        raise ValueError(
            f"period N={N} too small for interval [{i1}, {i2}), t={t_max}, T={T}: "
            f"need N >= {default_period(rule, i1, i2, t_max, T)}")


def propagation_reach(rule: LocalRule, i1: int, i2: int, T: int, samples: int,
                      rng: SeedStream, N: int | None = None, t_max: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample farthest distance from I at which a difference ever appeared.

    Returns (left, right) integer arrays; 0 means the difference never left I.
    x is uniform; x' re-randomizes I, conditioned on changing at least one cell.
    """
    if i1 >= i2:
        raise ValueError(f"empty interval [{i1}, {i2})")
    if T < 1 or samples < 1:
        raise ValueError("need T >= 1 and samples >= 1")
    N = N or default_period(rule, i1, i2, t_max, T)
    _check_period(rule, i1, i2, t_max, T, N)
    k, reach = rule.k, T * rule.r
    dist = np.arange(1, reach + 1)
    left_pos = (i1 - dist) % N
    right_pos = (i2 - 1 + dist) % N
    block = np.arange(i1, i2) % N
    lefts, rights = [], []
    for c, size in chunks(samples):
        gen = rng.substream(c).generator()
        a = gen.integers(0, k, size=(size, N), dtype=np.uint8)
        new = gen.integers(0, k, size=(size, block.size), dtype=np.uint8)
        same = np.all(new == a[:, block], axis=1)
        while same.any():
            new[same] = gen.integers(0, k, size=(int(same.sum()), block.size), dtype=np.uint8)
            same = np.all(new == a[:, block], axis=1)
        b = a.copy()
        b[:, block] = new
        left = np.zeros(size, dtype=np.int64)
        right = np.zeros(size, dtype=np.int64)
        for j in range(1, T + 1):
            a, b = step_array(rule, a), step_array(rule, b)
            diff = a != b
            left = np.maximum(left, np.max(np.where(diff[:, left_pos], dist, 0), axis=1, initial=0))
            right = np.maximum(right, np.max(np.where(diff[:, right_pos], dist, 0), axis=1, initial=0))
        lefts.append(left)
        rights.append(right)
    return np.concatenate(lefts), np.concatenate(rights)


def _select(left: np.ndarray, right: np.ndarray, direction: str) -> np.ndarray:
    if direction == "left":
        return left
    if direction == "right":
        return right
    if direction == "both":
        return np.maximum(left, right)
    raise ValueError(f"direction must be one of {DIRECTIONS}, got {direction!r}")


def indicators(reach: np.ndarray, t_list) -> np.ndarray:
    """Boolean matrix (samples, len(t_list)): did the change reach distance > t."""
    return reach[:, None] > np.asarray(list(t_list))[None, :]


def _estimates(ind: np.ndarray, t_list, i1, i2, T, direction) -> list[PropagationEstimate]:
    n = ind.shape[0]
    out = []
    for col, t in enumerate(t_list):
        hits = int(ind[:, col].sum())
        out.append(PropagationEstimate((i1, i2), int(t), T, n, hits, hits / n,
                                       wilson_interval(hits, n), direction))
    return out


def propagation_profile(rule: LocalRule, i1: int, i2: int, t_list, T: int, direction: str,
                        samples: int, rng: SeedStream, N: int | None = None) -> list[PropagationEstimate]:
    t_list = list(t_list)
    if not t_list or t_list[0] < 0 or any(b <= a for a, b in zip(t_list, t_list[1:])):
        raise ValueError("t_list must be nonempty, nonnegative and strictly increasing")
    _select(np.zeros(1), np.zeros(1), direction)
    left, right = propagation_reach(rule, i1, i2, T, samples, rng, N, t_max=t_list[-1])
    ind = indicators(_select(left, right, direction), t_list)
    return _estimates(ind, t_list, i1, i2, T, direction)


def estimate_p_t(rule: LocalRule, i1: int, i2: int, t: int, T: int, direction: str,
                 samples: int, rng: SeedStream, N: int | None = None) -> PropagationEstimate:
    return propagation_profile(rule, i1, i2, [t], T, direction, samples, rng, N)[0]


# ---------------------------------------------------------------- verdict

def curve_trends_to_one(curve, ratio_threshold: float) -> bool:
    """Positive least-squares slope in n and a final ratio above the threshold."""
    if len(curve) < 2:
        return False
    ns = np.array([e.n for e in curve], dtype=float)
    rs = np.array([e.ratio for e in curve], dtype=float)
    slope = np.polyfit(ns, rs, 1)[0]
    return bool(slope > 0 and rs[-1] >= ratio_threshold)


def saturated(profile, threshold: float) -> bool:
    return bool(profile) and all(e.p_hat >= threshold for e in profile)


def decide_class(kurka_found: bool, curves, profiles: dict, threshold: float = 0.99,
                 ratio_threshold: float = 0.5) -> tuple[str, str | None]:
    """Return (class, direction) from the three kinds of evidence.

    class is "A", "B", "C" or "inconclusive"; direction is set for class C.
    """
    if kurka_found:
        return "A", None
    if any(curve_trends_to_one(c, ratio_threshold) for c in curves):
        return "B", None
    sides = [d for d in ("left", "right") if saturated(profiles.get(d, ()), threshold)]
    if len(sides) == 2:
        return "C", "both"
    if sides:
        return "C", sides[0]
    return "inconclusive", None


def classify_gilman(rule: LocalRule, params: GilmanParams | None = None,
                    rng: SeedStream | None = None, surjective: bool | None = None) -> GilmanVerdict:
    params = params or GilmanParams()
    rng = rng or SeedStream(0)
    kurka = classify_kurka(rule, params.kurka_max_len, params.kurka_T)
    if kurka.blocking_word_found:
        cls, direction = decide_class(True, (), {})
        return GilmanVerdict(cls, direction, kurka, (), {}, params, surjective)

    m, n_list, T = params.m, tuple(params.n_list), params.ratio_T
    if max(n_list) >= m + T * rule.r:
        raise ValueError(
            f"n={max(n_list)} covers the whole horizon-{T} dependence cone; the ratio would be "
            "trivially 1. Use n < m + T*r")
    N = max(2 * (m + T * rule.r) + 2, 2 * max(n_list))
    curves = []
    for i in range(params.points):
        x = sample_config(BernoulliMeasure.uniform(rule.k), N, rng.substream(1, i))
        curves.append(tuple(mu_equicontinuity_curve(rule, x, m, n_list, T, params.ratio_samples,
                                                    rng.substream(2, i))))

    i1, i2 = params.interval
    t_list = list(params.t_list)
    left, right = propagation_reach(rule, i1, i2, params.prop_T, params.prop_samples,
                                    rng.substream(3), t_max=t_list[-1])
    profiles = {d: tuple(_estimates(indicators(_select(left, right, d), t_list), t_list,
                                    i1, i2, params.prop_T, d))
                for d in ("left", "right")}
    cls, direction = decide_class(False, curves, profiles, params.threshold, params.ratio_threshold)
    notes = ()
    if cls == "B":
        notes = ("class B is a candidate: the ratio curve is a finite-horizon surrogate",)
    return GilmanVerdict(cls, direction, kurka, tuple(curves), profiles, params, surjective, notes)
