"""Spectral probes of (F, Bernoulli measure).

Atoms of the spectral measure of an observable g are estimated with Wiener
sums S_T(alpha; x) = (1/T) sum_n exp(-2 pi i n alpha) g(F^n x), averaging
|S_T|^2 over sampled orbits.  For a mixing system every alpha sits at the
noise floor, about var(g)/T; an eigenvalue exp(2 pi i alpha) correlated with
g leaves a mass that does not decay with T.

Phases for rational alpha are read from an exact table of roots of unity,
so closed-form cases (alternating signs, full periods) come out exact.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .core import (
    BernoulliMeasure,
    Cylinder,
    LocalRule,
    PeriodicConfig,
    SeedStream,
    all_configs,
    cylinder_measure,
    shift_rule,
    step_array,
    word_str,
)
from .stats import Z95, chunks

# max over a 1024-point grid of mean |S_T|^2 * T for 100 i.i.d. fair-coin orbits
# of the centered letter observable; 20 calibration seeds gave 0.317 .. 0.394
NOISE_FLOOR_C = 0.5
THRESHOLD_FACTOR = 10.0
GUARD_LIMIT = 0.05
MAX_EXACT_DENOMINATOR = 2**20


# ---------------------------------------------------------------- observables

@dataclass(frozen=True)
class Observable:
    """Bounded cylinder observable, optionally centered by its declared mean.

    kind "letter": indicator of ``word[0]`` at position 0.
    kind "cylinder": indicator of [word]_anchor.
    kind "constant": the constant ``value`` (diagnostic, never centered).
    """

    kind: str
    word: tuple[int, ...] = ()
    anchor: int = 0
    value: float = 1.0
    mean: float = 0.0

    @classmethod
    def letter_at_zero(cls, measure: BernoulliMeasure, letter: int = 1, centered: bool = True) -> Observable:
        mean = measure.probs[letter] if centered else 0.0
        return cls("letter", (letter,), 0, 1.0, mean)

    @classmethod
    def cylinder(cls, word, anchor: int, measure: BernoulliMeasure, centered: bool = True) -> Observable:
        word = tuple(word)
        mean = cylinder_measure(measure, Cylinder(word, anchor)) if centered else 0.0
        return cls("cylinder", word, anchor, 1.0, mean)

    @classmethod
    def constant(cls, c: float = 1.0) -> Observable:
        return cls("constant", (), 0, float(c), 0.0)

    @property
    def sup(self) -> float:
        if self.kind == "constant":
            return abs(self.value)
        return max(abs(1.0 - self.mean), abs(self.mean))

    def evaluate(self, arr: np.ndarray) -> np.ndarray:
        """g at every row of a (batch, N) cell array."""
        arr = np.atleast_2d(arr)
        if self.kind == "constant":
            return np.full(arr.shape[0], self.value)
        pos = (self.anchor + np.arange(len(self.word))) % arr.shape[1]
        hit = np.all(arr[:, pos] == np.array(self.word, dtype=arr.dtype), axis=1)
        return hit.astype(float) - self.mean

    def describe(self) -> str:
        if self.kind == "constant":
            return f"constant({self.value})"
        return f"{self.kind}({word_str(self.word)}@{self.anchor}) - {self.mean}"


# ---------------------------------------------------------------- cycles

@dataclass(frozen=True)
class CycleSpectrum:
    period: int
    frequencies: tuple[Fraction, ...]
    preperiod: int = 0


def orbit_cycle(rule: LocalRule, x: PeriodicConfig, cap: int) -> tuple[int, int] | None:
    """(preperiod, period) from the first repeat among F^0 x .. F^cap x, else None."""
    if cap < 1:
        raise ValueError("cap must be >= 1")
    seen = {x.cells.tobytes(): 0}
    arr = x.cells
    for n in range(1, cap + 1):
        arr = step_array(rule, arr)
        key = arr.tobytes()
        if key in seen:
            return seen[key], n - seen[key]
        seen[key] = n
    return None


def cycle_spectrum(q: int, preperiod: int = 0) -> CycleSpectrum:
    """Eigenfrequencies p/q of the cyclic permutation of a q-cycle."""
    if q < 1:
        raise ValueError("period must be >= 1")
    return CycleSpectrum(q, tuple(Fraction(p, q) for p in range(q)), preperiod)


# ---------------------------------------------------------------- phases

def uniform_grid(points: int) -> tuple[float, ...]:
    return tuple(j / points for j in range(points))


def _roots_of_unity(D: int) -> np.ndarray:
    """exp(-2 pi i j / D) with the quarter turns exact."""
    j = np.arange(D)
    ang = -2 * np.pi * j / D
    out = np.cos(ang) + 1j * np.sin(ang)
    for quarter, val in enumerate((1, -1j, -1, 1j)):
        hit = (4 * j == quarter * D)
        out[hit] = val
    return out


def phase_matrix(alpha_grid: Sequence[float], T: int) -> np.ndarray:
    """W[n, a] = exp(-2 pi i n alpha_a) for n < T."""
    fracs = [Fraction(a) for a in alpha_grid]
    D = 1
    for f in fracs:
        D = D * f.denominator // math.gcd(D, f.denominator)
        if D > MAX_EXACT_DENOMINATOR:
            break
    n = np.arange(T, dtype=np.int64)
    if D <= MAX_EXACT_DENOMINATOR:
        nums = np.array([(f * D).numerator for f in fracs], dtype=np.int64)
        return _roots_of_unity(D)[np.outer(n, nums) % D]
    alphas = np.asarray(alpha_grid, dtype=float)
    return np.exp(-2j * np.pi * np.mod(np.outer(n, alphas), 1.0))


def _check_grid(alpha_grid) -> tuple[float, ...]:
    grid = tuple(float(a) for a in alpha_grid)
    if not grid:
        raise ValueError("empty frequency grid")
    if any(not 0.0 <= a < 1.0 for a in grid):
        raise ValueError("frequencies must lie in [0, 1)")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("frequency grid must be sorted and deduplicated")
    return grid


# ---------------------------------------------------------------- wiener sums

def orbit_values(rule: LocalRule, arr: np.ndarray, g: Observable, T: int) -> np.ndarray:
    """g(F^n x) for n < T, rows of ``arr`` being the starting points."""
    arr = np.atleast_2d(arr)
    vals = np.empty((arr.shape[0], T))
    for n in range(T):
        if n:
            arr = step_array(rule, arr)
        vals[:, n] = g.evaluate(arr)
    return vals


def wiener_sum(rule: LocalRule, x: PeriodicConfig, g: Observable, alpha: float, T: int) -> complex:
    if T < 1:
        raise ValueError("T must be >= 1")
    _check_grid([alpha])
    vals = orbit_values(rule, x.cells, g, T)[0]
    return complex(vals @ phase_matrix([alpha], T)[:, 0] / T)


def wiener_sums(values: np.ndarray, alpha_grid: Sequence[float]) -> np.ndarray:
    """S_T for each row of ``values`` (orbits, T) and each alpha."""
    T = values.shape[-1]
    return values @ phase_matrix(alpha_grid, T) / T


@dataclass(frozen=True)
class SpectralScan:
    alpha_grid: tuple[float, ...]
    T: int
    orbits: int
    N: int
    atom_mass: tuple[float, ...]
    guard: float
    observable: str = ""
    rule: str = ""

    @property
    def guard_ok(self) -> bool:
        return self.guard < GUARD_LIMIT

    @property
    def grid_step(self) -> float:
        grid = self.alpha_grid
        if len(grid) == 1:
            return 1.0
        gaps = [b - a for a, b in zip(grid, grid[1:])] + [1.0 - grid[-1] + grid[0]]
        return min(gaps)

    def to_dict(self) -> dict:
        return {
            "rule": self.rule,
            "observable": self.observable,
            "T": self.T,
            "orbits": self.orbits,
            "N": self.N,
            "guard": self.guard,
            "guard_ok": self.guard_ok,
            "max_atom_mass": max(self.atom_mass),
            "argmax_alpha": self.alpha_grid[int(np.argmax(self.atom_mass))],
        }

    def csv_rows(self):
        for a, m in zip(self.alpha_grid, self.atom_mass):
            yield {"alpha": a, "atom_mass": m, "guard": self.guard}


def _digest(row: np.ndarray) -> bytes:
    return hashlib.blake2b(row.tobytes(), digest_size=16).digest()


def eigenvalue_scan(rule: LocalRule, measure: BernoulliMeasure, g: Observable, alpha_grid,
                    T: int, orbits: int, N: int, rng: SeedStream) -> SpectralScan:
    """Mean |S_T(alpha)|^2 over ``orbits`` sampled points, with the cycle guard.

    Orbit i starts from a configuration drawn from ``rng.substream(i)``.  The
    guard is the fraction of orbits whose states F^0 .. F^T contain a repeat.
    """
    grid = _check_grid(alpha_grid)
    if T < 1 or orbits < 1 or N < 1:
        raise ValueError("T, orbits and N must be positive")
    if measure.k != rule.k:
        raise ValueError("measure and rule alphabets differ")
    arr = np.stack([measure.draw(rng.substream(i).generator(), N) for i in range(orbits)])
    seen = [dict() for _ in range(orbits)]
    cycled = np.zeros(orbits, dtype=bool)
    vals = np.empty((orbits, T))
    for n in range(T + 1):
        if n:
            arr = step_array(rule, arr)
        if n < T:
            vals[:, n] = g.evaluate(arr)
        for i in np.nonzero(~cycled)[0]:
            key = _digest(arr[i])
            if key in seen[i]:
                cycled[i] = True
                seen[i] = None
            else:
                seen[i][key] = n
    mass = np.mean(np.abs(wiener_sums(vals, grid)) ** 2, axis=0)
    return SpectralScan(grid, T, orbits, N, tuple(float(v) for v in mass),
                        float(cycled.mean()), g.describe(), rule.label())


def shift_spectrum_check(measure: BernoulliMeasure, g: Observable, alpha_grid, T: int,
                         orbits: int, N: int, rng: SeedStream) -> SpectralScan:
    """eigenvalue_scan for the shift itself; its spectrum is contained in every F's."""
    return eigenvalue_scan(shift_rule(measure.k), measure, g, alpha_grid, T, orbits, N, rng)


def calibrate_noise_floor(T: int, orbits: int, grid_points: int, reps: int, rng: SeedStream) -> float:
    """Largest max_alpha mean |S_T|^2 * T seen for i.i.d. centered fair-coin sequences."""
    grid = uniform_grid(grid_points)
    worst = 0.0
    for rep in range(reps):
        vals = rng.substream(rep).generator().integers(0, 2, size=(orbits, T)) - 0.5
        mass = np.mean(np.abs(wiener_sums(vals, grid)) ** 2, axis=0)
        worst = max(worst, float(mass.max()) * T)
    return worst


def default_threshold(T: int) -> float:
    return THRESHOLD_FACTOR * NOISE_FLOOR_C / T


# ---------------------------------------------------------------- rationality

@dataclass(frozen=True)
class Atom:
    alpha: float
    mass: float
    match: Fraction | None

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "mass": self.mass,
            "match": None if self.match is None else f"{self.match.numerator}/{self.match.denominator}",
        }


@dataclass(frozen=True)
class RationalityVerdict:
    passed: bool
    threshold: float
    Q: int
    grid_step: float
    atoms: tuple[Atom, ...]
    notes: tuple[str, ...] = field(default=("eigenvalue 1 (constant eigenfunctions) is always present",))

    @property
    def offending(self) -> tuple[float, ...]:
        return tuple(a.alpha for a in self.atoms if a.match is None)

    def to_dict(self) -> dict:
        return {
            "verdict": "PASS" if self.passed else "FAIL",
            "threshold": self.threshold,
            "Q": self.Q,
            "grid_step": self.grid_step,
            "atoms": [a.to_dict() for a in self.atoms],
            "offending": list(self.offending),
            "notes": list(self.notes),
        }


def nearest_rational(alpha: float, Q: int) -> Fraction:
    """Closest p/q to alpha with q <= Q, reduced into [0, 1)."""
    return Fraction(alpha).limit_denominator(Q) % 1


def rationality_verdict(scan: SpectralScan, threshold: float | None = None, Q: int = 64,
                        grid_step: float | None = None) -> RationalityVerdict:
    """PASS iff every atom above threshold is within one grid step of some p/q, q <= Q."""
    threshold = default_threshold(scan.T) if threshold is None else threshold
    if threshold <= 0 or Q < 1:
        raise ValueError("need threshold > 0 and Q >= 1")
    step = scan.grid_step if grid_step is None else grid_step
    atoms = []
    for alpha, mass in zip(scan.alpha_grid, scan.atom_mass):
        if mass <= threshold:
            continue
        cand = nearest_rational(alpha, Q)
        dist = abs(alpha - float(cand))
        dist = min(dist, 1.0 - dist)
        atoms.append(Atom(alpha, mass, cand if dist <= step * (1 + 1e-9) else None))
    return RationalityVerdict(all(a.match is not None for a in atoms), threshold, Q, step, tuple(atoms))


# ---------------------------------------------------------------- mixing

@dataclass(frozen=True)
class CorrelationEstimate:
    n: int
    value: float
    stderr: float
    ci: tuple[float, float]
    samples: int


def _cylinder_hits(arr: np.ndarray, c: Cylinder) -> np.ndarray:
    pos = (c.anchor + np.arange(len(c.word))) % arr.shape[1]
    return np.all(arr[:, pos] == np.array(c.word, dtype=arr.dtype), axis=1)


def _check_fits(rule: LocalRule, U: Cylinder, V: Cylinder, n_max: int, N: int) -> None:
    reach = n_max * rule.r
    lo = min(U.anchor, V.anchor - reach)
    hi = max(U.anchor + len(U.word), V.anchor + len(V.word) + reach)
    if hi - lo > N:
        raise ValueError(f"period N={N} too small: U and the n_max={n_max} cone of V span {hi - lo} cells")


def correlation_decay(rule: LocalRule, measure: BernoulliMeasure, U: Cylinder, V: Cylinder,
                      n_max: int, samples: int, N: int, rng: SeedStream) -> list[CorrelationEstimate]:
    """Monte Carlo mu(U & F^-n V) - mu(U) mu(V) for n = 0..n_max."""
    if n_max < 0 or samples < 1:
        raise ValueError("need n_max >= 0 and samples >= 1")
    _check_fits(rule, U, V, n_max, N)
    prod = cylinder_measure(measure, U) * cylinder_measure(measure, V)
    joint = np.zeros(n_max + 1, dtype=np.int64)
    for c, size in chunks(samples):
        arr = measure.draw(rng.substream(c).generator(), (size, N))
        in_u = _cylinder_hits(arr, U)
        for n in range(n_max + 1):
            if n:
                arr = step_array(rule, arr)
            joint[n] += int(np.count_nonzero(in_u & _cylinder_hits(arr, V)))
    out = []
    for n in range(n_max + 1):
        p = joint[n] / samples
        se = math.sqrt(max(p * (1 - p), 0.0) / samples)
        out.append(CorrelationEstimate(n, p - prod, se, (p - prod - Z95 * se, p - prod + Z95 * se), samples))
    return out


def correlation_decay_exact(rule: LocalRule, measure: BernoulliMeasure, U: Cylinder, V: Cylinder,
                            n_max: int, N: int) -> list[float]:
    """Same quantity by weighting every configuration of period N (k^N of them)."""
    if rule.k**N > 2**22:
        raise ValueError("exact enumeration limited to k^N <= 2^22")
    arr = all_configs(rule.k, N)
    # direct products stay exact for dyadic probabilities
    weights = np.prod(np.array(measure.probs)[arr], axis=1)
    prod = cylinder_measure(measure, U) * cylinder_measure(measure, V)
    in_u = _cylinder_hits(arr, U)
    out = []
    for n in range(n_max + 1):
        if n:
            arr = step_array(rule, arr)
        out.append(float(weights[in_u & _cylinder_hits(arr, V)].sum()) - prod)
    return out
