"""Alphabets, local rules, periodic configurations, measures and seeded sampling.

Configurations of A^Z are stood in for by spatially periodic configurations.
Cells are stored as ``uint8`` numpy arrays, so alphabets are limited to 256
letters.  All simulation helpers also operate on stacked arrays of shape
``(batch, N)`` so Monte Carlo code can evolve many samples at once.
"""
from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

Word = tuple[int, ...]

# sentinel exponent returned by distance_window when no disagreement is found
NO_DISAGREEMENT = -1


class GuardExceeded(RuntimeError):
    """Raised when an exact enumeration would exceed its configured size limit."""


def as_word(letters: Iterable[int] | str) -> Word:
    if isinstance(letters, str):
        return tuple(int(c) for c in letters)
    return tuple(int(c) for c in letters)


def word_str(word: Sequence[int]) -> str:
    if any(a > 9 for a in word):
        return " ".join(str(a) for a in word)
    return "".join(str(a) for a in word)


@dataclass(frozen=True)
class Alphabet:
    k: int

    def __post_init__(self):
        if not 2 <= self.k <= 256:
            raise ValueError(f"alphabet size must be in [2, 256], got {self.k}")

    def check(self, letters: Iterable[int]) -> None:
        bad = [a for a in letters if not 0 <= a < self.k]
        if bad:
            raise ValueError(f"letters {bad[:5]} outside alphabet of size {self.k}")


@dataclass(frozen=True)
class LocalRule:
    """Block map f: A^(2r+1) -> A.

    ``table[idx]`` is the image of the neighborhood whose base-k expansion is
    ``idx``, leftmost cell most significant.
    """

    alphabet: Alphabet
    r: int
    table: tuple[int, ...]
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.r < 0:
            raise ValueError("radius must be nonnegative")
        expected = self.k ** (2 * self.r + 1)
        if len(self.table) != expected:
            raise ValueError(f"table has {len(self.table)} entries, expected {expected}")
        self.alphabet.check(self.table)

    @property
    def k(self) -> int:
        return self.alphabet.k

    @property
    def width(self) -> int:
        return 2 * self.r + 1

    @cached_property
    def lut(self) -> np.ndarray:
        out = np.array(self.table, dtype=np.uint8)
        out.setflags(write=False)
        return out

    def __call__(self, *neighborhood: int) -> int:
        idx = 0
        for a in neighborhood:
            idx = idx * self.k + a
        return self.table[idx]

    def label(self) -> str:
        return self.name or f"k{self.k}r{self.r}:" + "".join(map(str, self.table))


@dataclass(frozen=True, eq=False)
class PeriodicConfig:
    """Configuration x with x_{i+N} = x_i, cells[i] holding x_i."""

    alphabet: Alphabet
    cells: np.ndarray

    def __post_init__(self):
        cells = np.array(self.cells, dtype=np.uint8).reshape(-1)
        if cells.size < 1:
            raise ValueError("period must be at least 1")
        if cells.max() >= self.alphabet.k:
            raise ValueError("cell value outside alphabet")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)

    @classmethod
    def of(cls, cells: Iterable[int] | str, k: int = 2) -> PeriodicConfig:
        return cls(Alphabet(k), np.array(as_word(cells), dtype=np.uint8))

    @property
    def N(self) -> int:
        return int(self.cells.size)

    def __len__(self) -> int:
        return self.N

    def __getitem__(self, i: int) -> int:
        return int(self.cells[i % self.N])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PeriodicConfig):
            return NotImplemented
        return self.alphabet == other.alphabet and np.array_equal(self.cells, other.cells)

    def __hash__(self) -> int:
        return hash((self.alphabet, self.cells.tobytes()))

    def __repr__(self) -> str:
        return f"PeriodicConfig(k={self.alphabet.k}, cells={word_str(self.cells.tolist())!r})"


@dataclass(frozen=True)
class Cylinder:
    """[u]_l: configurations carrying ``word`` at positions l .. l+|u|-1."""

    word: Word
    anchor: int = 0

    def contains(self, x: PeriodicConfig) -> bool:
        if not self.word:
            return True
        return window(x, self.anchor, self.anchor + len(self.word)) == tuple(self.word)


@dataclass(frozen=True)
class BernoulliMeasure:
    probs: tuple[float, ...]

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        if len(probs) < 2:
            raise ValueError("need at least two letters")
        if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-12:
            raise ValueError(f"probabilities must be nonnegative and sum to 1: {probs}")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def uniform(cls, k: int) -> BernoulliMeasure:
        return cls((1.0 / k,) * k)

    @property
    def k(self) -> int:
        return len(self.probs)

    @property
    def is_uniform(self) -> bool:
        return all(p == self.probs[0] for p in self.probs)

    def draw(self, gen: np.random.Generator, shape) -> np.ndarray:
        if self.is_uniform:
            return gen.integers(0, self.k, size=shape, dtype=np.uint8)
        return gen.choice(self.k, size=shape, p=self.probs).astype(np.uint8)


@dataclass(frozen=True)
class SeedStream:
    """Deterministic random stream identified by (master seed, stream path).

    ``substream(i)`` derives an independent child; the same path always
    yields the same draws regardless of what other streams were used.
    """

    seed: int
    stream: tuple[int, ...] = (0,)

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if isinstance(self.stream, int):
            object.__setattr__(self, "stream", (self.stream,))

    def substream(self, *keys: int) -> SeedStream:
        return SeedStream(self.seed, self.stream + tuple(keys))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.stream)
        return np.random.Generator(np.random.PCG64(ss))


# ---------------------------------------------------------------- rules

_ECA_RE = re.compile(r"^eca:(\d+)$")


def wolfram_rule(n: int) -> LocalRule:
    """Elementary rule number n: f(a, b, c) is bit 4a+2b+c of n."""
    if not 0 <= n <= 255:
        raise ValueError(f"elementary rule number must be in [0, 255], got {n}")
    return LocalRule(Alphabet(2), 1, tuple((n >> i) & 1 for i in range(8)), name=f"eca:{n}")


def rule_from_function(k: int, r: int, f, name: str = "") -> LocalRule:
    table = tuple(int(f(*nb)) for nb in itertools.product(range(k), repeat=2 * r + 1))
    return LocalRule(Alphabet(k), r, table, name=name)


def shift_rule(k: int = 2) -> LocalRule:
    """f(a, b, c) = c, i.e. F = sigma."""
    return rule_from_function(k, 1, lambda a, b, c: c, name="eca:170" if k == 2 else f"shift:k{k}")


def parse_rule_text(text: str, name: str = "") -> LocalRule:
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if len(lines) != 2:
        raise ValueError("rule file must have exactly two non-empty lines: 'k r' and the table")
    try:
        k, r = (int(v) for v in lines[0].split())
        table = tuple(int(v) for v in lines[1].split())
    except ValueError as exc:
        raise ValueError(f"malformed rule file: {exc}") from None
    return LocalRule(Alphabet(k), r, table, name=name)


def format_rule_text(rule: LocalRule) -> str:
    return f"{rule.k} {rule.r}\n{' '.join(map(str, rule.table))}\n"


def load_rule(source: str) -> LocalRule:
    """Accept ``eca:<n>`` or a path to a rule file."""
    m = _ECA_RE.match(source.strip())
    if m:
        return wolfram_rule(int(m.group(1)))
    path = Path(source)
    if not path.is_file():
        raise ValueError(f"rule {source!r} is neither 'eca:<n>' nor an existing file")
    return parse_rule_text(path.read_text(), name=path.stem)


# ---------------------------------------------------------------- simulation

def _index_dtype(size: int):
    if size <= 2**8:
        return np.uint8
    if size <= 2**16:
        return np.uint16
    return np.intp


def neighborhood_index(arr: np.ndarray, k: int, r: int) -> np.ndarray:
    """Base-k index of each cell's periodic radius-r neighborhood (last axis)."""
    N = arr.shape[-1]
    dt = _index_dtype(k ** (2 * r + 1))
    if r <= N:
        pad = np.concatenate([arr[..., N - r:], arr, arr[..., :r]], axis=-1)
    else:
        pad = np.take(arr, np.arange(-r, N + r) % N, axis=-1)
    pad = pad.astype(dt, copy=False)
    idx = pad[..., 0:N].copy()
    for d in range(1, 2 * r + 1):
        idx *= dt(k)
        idx += pad[..., d:d + N]
    return idx


def step_array(rule: LocalRule, arr: np.ndarray) -> np.ndarray:
    """One periodic step along the last axis of a (batched) cell array."""
    return np.take(rule.lut, neighborhood_index(arr, rule.k, rule.r))


def step_open(rule: LocalRule, arr: np.ndarray) -> np.ndarray:
    """Non-periodic step: output has 2r fewer cells (only fully determined ones)."""
    n = arr.shape[-1] - 2 * rule.r
    if n <= 0:
        raise ValueError("array too short for an open step")
    idx = np.zeros(arr.shape[:-1] + (n,), dtype=np.intp)
    for d in range(2 * rule.r + 1):
        idx *= rule.k
        idx += arr[..., d:d + n]
    return rule.lut[idx]


def _check_alphabet(rule: LocalRule, x: PeriodicConfig) -> None:
    if rule.alphabet != x.alphabet:
        raise ValueError(f"alphabet mismatch: rule k={rule.k}, config k={x.alphabet.k}")


def step(rule: LocalRule, x: PeriodicConfig) -> PeriodicConfig:
    _check_alphabet(rule, x)
    return PeriodicConfig(x.alphabet, step_array(rule, x.cells))


def iterate(rule: LocalRule, x: PeriodicConfig, n: int) -> PeriodicConfig:
    if n < 0:
        raise ValueError("iteration count must be nonnegative")
    _check_alphabet(rule, x)
    arr = x.cells
    for _ in range(n):
        arr = step_array(rule, arr)
    return PeriodicConfig(x.alphabet, arr)


def shift(x: PeriodicConfig, s: int = 1) -> PeriodicConfig:
    return PeriodicConfig(x.alphabet, np.roll(x.cells, -s))


def window(x: PeriodicConfig, i: int, j: int) -> Word:
    """x_i ... x_{j-1}, indices taken mod N."""
    if i >= j:
        raise ValueError(f"empty or reversed window [{i}, {j})")
    return tuple(int(v) for v in x.cells[np.arange(i, j) % x.N])


def distance_window(x: PeriodicConfig, y: PeriodicConfig, cap: int) -> int:
    """Exponent n of d(x, y) = 2^-n, or ``NO_DISAGREEMENT`` if x, y agree on |i| <= cap."""
    if x.N != y.N or x.alphabet != y.alphabet:
        raise ValueError("configurations must share alphabet and period")
    if cap < 1:
        raise ValueError("cap must be >= 1")
    for n in range(cap + 1):
        if x[n] != y[n] or x[-n] != y[-n]:
            return n
    return NO_DISAGREEMENT


def distance_value(n: int) -> Fraction:
    return Fraction(0) if n == NO_DISAGREEMENT else Fraction(1, 2**n)


def cylinder_measure(m: BernoulliMeasure, c: Cylinder) -> float:
    return math.prod(m.probs[a] for a in c.word)


# ---------------------------------------------------------------- sampling

def sample_array(m: BernoulliMeasure, shape, rng: SeedStream) -> np.ndarray:
    return m.draw(rng.generator(), shape)


def sample_config(m: BernoulliMeasure, N: int, rng: SeedStream) -> PeriodicConfig:
    if N < 1:
        raise ValueError("period must be at least 1")
    return PeriodicConfig(Alphabet(m.k), sample_array(m, N, rng))


def _fixed_positions(N: int, i1: int, i2: int) -> np.ndarray:
    if i1 >= i2:
        raise ValueError(f"empty interval [{i1}, {i2})")
    if i2 - i1 > N:
        raise ValueError(f"interval of length {i2 - i1} longer than period {N}")
    return np.arange(i1, i2) % N


def resample_outside_array(x: np.ndarray, i1: int, i2: int, m: BernoulliMeasure,
                           samples: int, gen: np.random.Generator) -> np.ndarray:
    """``samples`` rows agreeing with x on [i1, i2) and i.i.d. per m elsewhere."""
    pos = _fixed_positions(x.size, i1, i2)
    out = m.draw(gen, (samples, x.size))
    out[:, pos] = x[pos]
    return out


def resample_outside(x: PeriodicConfig, i1: int, i2: int, m: BernoulliMeasure,
                     rng: SeedStream) -> PeriodicConfig:
    if m.k != x.alphabet.k:
        raise ValueError("measure and configuration alphabets differ")
    arr = resample_outside_array(x.cells, i1, i2, m, 1, rng.generator())[0]
    return PeriodicConfig(x.alphabet, arr)


# ---------------------------------------------------------------- composition

def compose(f: LocalRule, g: LocalRule) -> LocalRule:
    """Local rule of G o F (apply f first), radius r_f + r_g."""
    if f.alphabet != g.alphabet:
        raise ValueError("cannot compose rules over different alphabets")
    k, R = f.k, f.r + g.r
    width = 2 * R + 1
    if k**width > 2**24:
        raise GuardExceeded(f"composed table would have {k ** width} entries")
    windows = np.array(list(itertools.product(range(k), repeat=width)), dtype=np.uint8)
    if windows.size == 0:
        windows = windows.reshape(1, width)
    out = step_open(g, step_open(f, windows))
    return LocalRule(f.alphabet, R, tuple(int(v) for v in out[:, 0]),
                     name=f"({g.label()})o({f.label()})")


def all_configs(k: int, N: int) -> np.ndarray:
    """Every configuration of period N, one per row."""
    return np.array(list(itertools.product(range(k), repeat=N)), dtype=np.uint8).reshape(-1, N)
