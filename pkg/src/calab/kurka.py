"""Horizon-bounded blocking words and sensitivity probes.

A word w (anchored at position 0) is s-blocking at offset p up to horizon T
if the window [p, p+s) of F^n(x) is the same for every x in [w] and every
n <= T.  Only the cells of the dependence cone outside w can vary, so
certification enumerates cone contexts.

Enumeration is lazy.  Each space-time cell carries the set of letters it can
still take (a bitmask), computed by lifting the local rule to sets.  A cone
cell is only branched on when an undetermined window cell actually depends
on it, so rules that ignore part of their neighborhood never pay for the
cells they ignore.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .core import (
    BernoulliMeasure,
    GuardExceeded,
    LocalRule,
    PeriodicConfig,
    SeedStream,
    Word,
    as_word,
    resample_outside_array,
    step_array,
    step_open,
    window,
    word_str,
)

MAX_CONTEXTS = 2**24
MAX_SET_TABLE = 2**22

CERTIFIED = "certified-up-to-T"
REFUTED = "refuted"


@dataclass(frozen=True)
class Counterexample:
    """Two cone contexts around w whose window traces first differ at ``step``."""

    left_a: Word
    right_a: Word
    left_b: Word
    right_b: Word
    step: int

    def to_dict(self) -> dict:
        return {
            "context_a": [word_str(self.left_a), word_str(self.right_a)],
            "context_b": [word_str(self.left_b), word_str(self.right_b)],
            "first_bad_step": self.step,
        }


@dataclass(frozen=True)
class BlockingCertificate:
    word: Word
    s: int
    p: int
    T: int
    status: str
    counterexample: Counterexample | None = None
    contexts_checked: int = 0

    @property
    def certified(self) -> bool:
        return self.status == CERTIFIED

    def to_dict(self) -> dict:
        return {
            "word": word_str(self.word),
            "s": self.s,
            "p": self.p,
            "T": self.T,
            "status": self.status,
            "counterexample": None if self.counterexample is None else self.counterexample.to_dict(),
        }


@dataclass(frozen=True)
class ProbeEstimate:
    fraction: float
    samples: int


@dataclass(frozen=True)
class KurkaVerdict:
    verdict: str
    s: int
    max_len: int
    T: int
    certificate: BlockingCertificate | None = None
    candidates_checked: int = 0
    notes: tuple[str, ...] = field(default=())

    @property
    def blocking_word_found(self) -> bool:
        return self.certificate is not None and self.certificate.certified

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "envelope": {"s": self.s, "max_len": self.max_len, "T": self.T},
            "certificate": None if self.certificate is None else self.certificate.to_dict(),
            "candidates_checked": self.candidates_checked,
        }


# ---------------------------------------------------------------- traces

def trace(rule: LocalRule, x: PeriodicConfig, i1: int, i2: int, T: int) -> list[Word]:
    """Window words F^j(x)(i1, i2) for j = 0..T."""
    if T < 0:
        raise ValueError("T must be nonnegative")
    out = [window(x, i1, i2)]
    arr = x.cells
    for _ in range(T):
        arr = step_array(rule, arr)
        out.append(window(PeriodicConfig(x.alphabet, arr), i1, i2))
    return out


def _context_sizes(rule: LocalRule, n_word: int, s: int, p: int, T: int) -> tuple[int, int]:
    reach = T * rule.r
    return max(0, reach - p), max(0, p + s + reach - n_word)


def cone_traces(rule: LocalRule, w: Word, left: np.ndarray, right: np.ndarray,
                p: int, s: int, T: int) -> np.ndarray:
    """Window traces for batches of (left, right) contexts; shape (batch, T+1, s)."""
    batch = left.shape[0]
    mid = np.broadcast_to(np.array(w, dtype=np.uint8), (batch, len(w)))
    arr = np.concatenate([left, mid, right], axis=1)
    base = p + left.shape[1]
    rows = [arr[:, base:base + s]]
    for j in range(1, T + 1):
        arr = step_open(rule, arr)
        off = base - j * rule.r
        rows.append(arr[:, off:off + s])
    return np.stack(rows, axis=1)


def _first_difference(ta: np.ndarray, tb: np.ndarray) -> int:
    bad = np.nonzero(np.any(ta != tb, axis=-1))[0]
    return int(bad[0]) if bad.size else -1


# ---------------------------------------------------------------- set lifting

@lru_cache(maxsize=64)
def _set_table(rule: LocalRule) -> np.ndarray:
    """Image mask of every tuple of input masks (letters as bits)."""
    k, width = rule.k, rule.width
    base = 1 << k
    if base**width > MAX_SET_TABLE:
        raise GuardExceeded(f"set-lifted rule table would need {base ** width} entries")
    combos = np.arange(base**width, dtype=np.int64)
    digits = [(combos // base ** (width - 1 - d)) % base for d in range(width)]
    out = np.zeros(base**width, dtype=np.uint8)
    for idx, letters in enumerate(itertools.product(range(k), repeat=width)):
        ok = np.ones(base**width, dtype=bool)
        for d, a in enumerate(letters):
            ok &= ((digits[d] >> a) & 1).astype(bool)
        out[ok] |= np.uint8(1 << rule.table[idx])
    return out


def _set_step(rule: LocalRule, table: np.ndarray, masks: np.ndarray) -> np.ndarray:
    n = masks.size - 2 * rule.r
    base = 1 << rule.k
    idx = np.zeros(n, dtype=np.int64)
    for d in range(rule.width):
        idx = idx * base + masks[d:d + n]
    return table[idx]


def _relevant_inputs(rule: LocalRule, masks: tuple[int, ...]) -> list[int]:
    """Positions whose letter can change f's output given the other masks."""
    k = rule.k
    options = [[a for a in range(k) if m >> a & 1] for m in masks]
    relevant = []
    for d, opts in enumerate(options):
        if len(opts) < 2:
            continue
        others = options[:d] + options[d + 1:]
        found = False
        for rest in itertools.product(*others):
            outs = {rule(*rest[:d], a, *rest[d:]) for a in opts}
            if len(outs) > 1:
                found = True
                break
        if found:
            relevant.append(d)
    return relevant


def _popcount_gt1(mask) -> bool:
    m = int(mask)
    return m & (m - 1) != 0


class _ConeSearch:
    def __init__(self, rule: LocalRule, w: Word, s: int, p: int, T: int, max_contexts: int):
        self.rule, self.w, self.s, self.p, self.T = rule, w, s, p, T
        self.max_contexts = max_contexts
        self.nl, self.nr = _context_sizes(rule, len(w), s, p, T)
        self.table = _set_table(rule)
        self.full = (1 << rule.k) - 1
        self.base_off = p + self.nl

    def rows(self, masks0: np.ndarray) -> list[np.ndarray]:
        rows = [masks0]
        for _ in range(self.T):
            rows.append(_set_step(self.rule, self.table, rows[-1]))
        return rows

    def window_masks(self, rows, j) -> np.ndarray:
        off = self.base_off - j * self.rule.r
        return rows[j][off:off + self.s]

    def pick_branch(self, rows) -> int:
        r = self.rule.r
        for j in range(self.T + 1):
            win = self.window_masks(rows, j)
            amb = [c for c in range(self.s) if _popcount_gt1(win[c])]
            if not amb:
                continue
            row, col = j, self.base_off - j * r + amb[0]
            while row > 0:
                below = rows[row - 1]
                ins = tuple(int(v) for v in below[col:col + 2 * r + 1])
                d = _relevant_inputs(self.rule, ins)[0]
                row, col = row - 1, col + d
            return col
        return -1

    def completion(self, masks0: np.ndarray) -> np.ndarray:
        """Lowest letter of each mask: a concrete context consistent with the node."""
        out = np.zeros(masks0.size, dtype=np.uint8)
        for i, m in enumerate(masks0.tolist()):
            out[i] = (m & -m).bit_length() - 1
        return out

    def split(self, cells: np.ndarray) -> tuple[Word, Word]:
        left = tuple(int(v) for v in cells[:self.nl])
        right = tuple(int(v) for v in cells[self.nl + len(self.w):])
        return left, right

    def run(self) -> BlockingCertificate:
        masks0 = np.full(self.nl + len(self.w) + self.nr, self.full, dtype=np.uint8)
        for i, a in enumerate(self.w):
            masks0[self.nl + i] = 1 << a
        ref_trace = None
        ref_cells = None
        leaves = 0
        stack = [masks0]
        while stack:
            node = stack.pop()
            rows = self.rows(node)
            wins = np.stack([self.window_masks(rows, j) for j in range(self.T + 1)])
            if ref_trace is not None:
                single = (wins & (wins - 1)) == 0
                if np.any(single & (wins != ref_trace)):
                    return self._refuted(ref_cells, self.completion(node), leaves)
            col = self.pick_branch(rows)
            if col < 0:
                leaves += 1
                if ref_trace is None:
                    ref_trace, ref_cells = wins, self.completion(node)
                continue
            if leaves + len(stack) > self.max_contexts:
                raise GuardExceeded(
                    f"cone search for w={word_str(self.w)} exceeded {self.max_contexts} contexts")
            for a in reversed(range(self.rule.k)):
                child = node.copy()
                child[col] = 1 << a
                stack.append(child)
        return BlockingCertificate(self.w, self.s, self.p, self.T, CERTIFIED,
                                   contexts_checked=leaves)

    def _refuted(self, cells_a: np.ndarray, cells_b: np.ndarray, leaves: int) -> BlockingCertificate:
        la, ra = self.split(cells_a)
        lb, rb = self.split(cells_b)
        cx = Counterexample(la, ra, lb, rb, step=-1)
        bad = replay(self.rule, self.w, self.p, self.s, self.T, cx)
        assert bad >= 0, "set abstraction reported a difference that does not replay"
        cx = Counterexample(la, ra, lb, rb, step=bad)
        return BlockingCertificate(self.w, self.s, self.p, self.T, REFUTED, cx,
                                   contexts_checked=leaves + 1)


def _check_blocking_args(rule: LocalRule, w: Word, s: int, p: int, T: int) -> None:
    rule.alphabet.check(w)
    if s < 1 or len(w) < s:
        raise ValueError(f"need 1 <= s <= |w|, got s={s}, |w|={len(w)}")
    if not 0 <= p <= len(w) - s:
        raise ValueError(f"offset p={p} outside [0, {len(w) - s}]")
    if T < 0:
        raise ValueError("T must be nonnegative")


def replay(rule: LocalRule, w, p: int, s: int, T: int, cx: Counterexample) -> int:
    """First step where the two contexts' window traces differ, or -1."""
    w = as_word(w)
    ta = cone_traces(rule, w, np.array([cx.left_a], dtype=np.uint8).reshape(1, -1),
                     np.array([cx.right_a], dtype=np.uint8).reshape(1, -1), p, s, T)[0]
    tb = cone_traces(rule, w, np.array([cx.left_b], dtype=np.uint8).reshape(1, -1),
                     np.array([cx.right_b], dtype=np.uint8).reshape(1, -1), p, s, T)[0]
    return _first_difference(ta, tb)


def certify_blocking(rule: LocalRule, w, s: int, p: int, T: int,
                     max_contexts: int = MAX_CONTEXTS, sharpen: bool = True) -> BlockingCertificate:
    """Exhaustive lazy cone search up to horizon T.

    With ``sharpen`` a refutation is re-searched at shorter horizons
    (bisection), so the reported step is the earliest one at which any two
    contexts disagree.
    """
    w = as_word(w)
    _check_blocking_args(rule, w, s, p, T)
    cert = _ConeSearch(rule, w, s, p, T, max_contexts).run()
    if cert.certified or not sharpen:
        return cert
    # refuted at horizon hi; certified at horizon lo (or lo = -1)
    lo, hi = -1, cert.counterexample.step
    best = cert
    while hi - lo > 1:
        mid = (lo + hi) // 2
        trial = _ConeSearch(rule, w, s, p, mid, max_contexts).run()
        if trial.certified:
            lo = mid
        else:
            best, hi = trial, trial.counterexample.step
    return best if best is cert else _pad_certificate(rule, best, T)


def _pad_certificate(rule: LocalRule, cert: BlockingCertificate, T: int) -> BlockingCertificate:
    """Extend a shorter-horizon refutation's contexts with zeros to the horizon-T cone."""
    nl, nr = _context_sizes(rule, len(cert.word), cert.s, cert.p, T)
    cx = cert.counterexample

    def pad(left, right):
        return (0,) * (nl - len(left)) + left, right + (0,) * (nr - len(right))

    la, ra = pad(cx.left_a, cx.right_a)
    lb, rb = pad(cx.left_b, cx.right_b)
    return BlockingCertificate(cert.word, cert.s, cert.p, T, REFUTED,
                               Counterexample(la, ra, lb, rb, cx.step), cert.contexts_checked)


def falsify_blocking(rule: LocalRule, w, s: int, p: int, T: int, samples: int,
                     rng: SeedStream) -> Counterexample | None:
    """Random context search; ``None`` means nothing found, not certification."""
    w = as_word(w)
    _check_blocking_args(rule, w, s, p, T)
    if samples <= 0:
        return None
    nl, nr = _context_sizes(rule, len(w), s, p, T)
    gen = rng.generator()
    left = gen.integers(0, rule.k, size=(2 * samples, nl), dtype=np.uint8)
    right = gen.integers(0, rule.k, size=(2 * samples, nr), dtype=np.uint8)
    traces = cone_traces(rule, w, left, right, p, s, T)
    differs = np.any(traces != traces[0], axis=(1, 2))
    hits = np.nonzero(differs)[0]
    if hits.size == 0:
        return None
    b = int(hits[0])
    return Counterexample(
        tuple(left[0].tolist()), tuple(right[0].tolist()),
        tuple(left[b].tolist()), tuple(right[b].tolist()),
        step=_first_difference(traces[0], traces[b]),
    )


def iter_candidates(k: int, s: int, max_len: int):
    for n in range(s, max_len + 1):
        for w in itertools.product(range(k), repeat=n):
            for p in range(n - s + 1):
                yield w, p


def find_blocking_words(rule: LocalRule, s: int, max_len: int, T: int,
                        max_contexts: int = MAX_CONTEXTS,
                        first_only: bool = False) -> list[BlockingCertificate]:
    """All T-certified s-blocking (word, offset) pairs with |w| <= max_len."""
    if s < 1:
        raise ValueError("s must be >= 1")
    found = []
    for w, p in iter_candidates(rule.k, s, max_len):
        cert = certify_blocking(rule, w, s, p, T, max_contexts, sharpen=False)
        if cert.certified:
            found.append(cert)
            if first_only:
                break
    return found


def equicontinuity_probe(rule: LocalRule, x: PeriodicConfig, m: int, n: int, T: int,
                         samples: int, rng: SeedStream) -> ProbeEstimate:
    """Fraction of y with d(x, y) < 2^-n whose orbit stays 2^-m close up to step T.

    d(x, y) < 2^-n means x and y agree on [-n, n]; likewise for m.
    """
    if not 1 <= m <= n:
        raise ValueError("need n >= m >= 1")
    if samples < 1:
        raise ValueError("samples must be >= 1")
    meas = BernoulliMeasure.uniform(rule.k)
    fixed_len = min(2 * n + 1, x.N)
    ys = resample_outside_array(x.cells, -n, -n + fixed_len, meas, samples, rng.generator())
    xs = x.cells
    pos = np.arange(-m, m + 1) % x.N
    ok = np.all(ys[:, pos] == xs[pos], axis=1)
    for _ in range(T):
        xs = step_array(rule, xs)
        ys = step_array(rule, ys)
        ok &= np.all(ys[:, pos] == xs[pos], axis=1)
    return ProbeEstimate(float(ok.mean()), samples)


def classify_kurka(rule: LocalRule, max_len: int = 6, T: int = 16,
                   max_contexts: int = MAX_CONTEXTS) -> KurkaVerdict:
    """Search for an r-blocking word; finding one shows F is not sensitive."""
    if rule.r == 0:
        cert = certify_blocking(rule, (0,), 1, 0, T, max_contexts)
        return KurkaVerdict("equicontinuous", 1, max_len, T, cert, 1,
                            notes=("radius-0 rule: every point is equicontinuous",))
    s = rule.r
    checked = 0
    for w, p in iter_candidates(rule.k, s, max_len):
        checked += 1
        cert = certify_blocking(rule, w, s, p, T, max_contexts, sharpen=False)
        if cert.certified:
            return KurkaVerdict("blocking-word-found", s, max_len, T, cert, checked)
    return KurkaVerdict("no-blocking-word-found", s, max_len, T, None, checked)
