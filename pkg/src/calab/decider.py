"""Exact surjectivity decision and preimage counting.

The preimage automaton has the k^(2r) words of length 2r as states.  Reading
input letter b from state s moves to (s+b)[1:] and emits f(s+b).  A word u
has a preimage iff some path spells u, so F is onto iff the subset
construction started from the full state set never reaches the empty set.
``is_balanced_up_to`` is an independent brute-force oracle for the same
question.
"""
from __future__ import annotations

import itertools
import time
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

from .core import GuardExceeded, LocalRule, Word, as_word, step_open, word_str

MAX_STATES = 2**16
MAX_ENUMERATION = 2**24
MAX_SUBSETS = 2**20


@dataclass(frozen=True)
class PreimageAutomaton:
    rule: LocalRule

    def __post_init__(self):
        if self.n_states > MAX_STATES:
            raise GuardExceeded(f"{self.n_states} de Bruijn states exceed the guard of {MAX_STATES}")

    @property
    def n_states(self) -> int:
        return self.rule.k ** (2 * self.rule.r)

    @cached_property
    def successors(self) -> tuple[tuple[tuple[int, ...], ...], ...]:
        """successors[s][a] = states reachable from s by an input letter emitting a."""
        k, n = self.rule.k, self.n_states
        succ = [[[] for _ in range(k)] for _ in range(n)]
        for s in range(n):
            for b in range(k):
                full = s * k + b  # index of the (2r+1)-window s+b
                succ[s][self.rule.table[full]].append(full % n)
        return tuple(tuple(tuple(t) for t in row) for row in succ)

    @cached_property
    def transfer(self) -> tuple[np.ndarray, ...]:
        """0/1 transfer matrices M_a[s, s'] counting input extensions emitting a."""
        k, n = self.rule.k, self.n_states
        mats = [np.zeros((n, n), dtype=np.int64) for _ in range(k)]
        for s in range(n):
            for a in range(k):
                for t in self.successors[s][a]:
                    mats[a][s, t] += 1
        return tuple(mats)

    def advance(self, subset: frozenset[int], a: int) -> frozenset[int]:
        return frozenset(t for s in subset for t in self.successors[s][a])


@dataclass(frozen=True)
class SurjectivityReport:
    surjective: bool
    witness: Word | None
    method: str
    rule_id: str = ""
    elapsed: float = 0.0

    def to_dict(self) -> dict:
        return {
            "rule": self.rule_id,
            "surjective": self.surjective,
            "witness": None if self.witness is None else word_str(self.witness),
            "method": self.method,
        }


def _enumeration_guard(rule: LocalRule, length: int) -> None:
    if rule.k**length > MAX_ENUMERATION:
        raise GuardExceeded(
            f"enumerating {rule.k}^{length} words exceeds the guard of {MAX_ENUMERATION}")


def preimages(rule: LocalRule, u) -> list[Word]:
    u = as_word(u)
    if not u:
        raise ValueError("word must be nonempty")
    rule.alphabet.check(u)
    n = len(u) + 2 * rule.r
    _enumeration_guard(rule, n)
    cands = np.array(list(itertools.product(range(rule.k), repeat=n)), dtype=np.uint8)
    images = step_open(rule, cands)
    keep = np.all(images == np.array(u, dtype=np.uint8), axis=1)
    return [tuple(int(v) for v in row) for row in cands[keep]]


def count_preimages(rule: LocalRule, u) -> int:
    """Number of preimage words, by transfer-matrix product (no enumeration)."""
    u = as_word(u)
    if not u:
        raise ValueError("word must be nonempty")
    rule.alphabet.check(u)
    mats = PreimageAutomaton(rule).transfer
    # int64 stays exact while counts are below k^(|u|+2r) < 2^62
    exact = rule.k ** (len(u) + 2 * rule.r) < 2**62
    vec = np.ones(mats[0].shape[0], dtype=np.int64 if exact else object)
    for a in u:
        vec = vec @ (mats[a] if exact else mats[a].astype(object))
    return int(vec.sum())


def is_balanced_up_to(rule: LocalRule, L: int) -> bool:
    """Brute force: every word of length <= L has exactly k^(2r) preimages."""
    if L < 1:
        raise ValueError("L must be >= 1")
    _enumeration_guard(rule, L + 2 * rule.r)
    k, target = rule.k, rule.k ** (2 * rule.r)
    for length in range(1, L + 1):
        cands = np.array(list(itertools.product(range(k), repeat=length + 2 * rule.r)),
                         dtype=np.uint8)
        images = step_open(rule, cands)
        codes = images.astype(np.int64) @ (k ** np.arange(length - 1, -1, -1, dtype=np.int64))
        counts = np.bincount(codes, minlength=k**length)
        if np.any(counts != target):
            return False
    return True


def is_surjective(rule: LocalRule, max_subsets: int = MAX_SUBSETS) -> SurjectivityReport:
    """Exact decision by breadth-first subset construction.

    The witness is a shortest orphan word (lexicographically least among the
    shortest, since letters are explored in increasing order).
    """
    t0 = time.perf_counter()
    aut = PreimageAutomaton(rule)
    start = frozenset(range(aut.n_states))
    parent: dict[frozenset[int], tuple[frozenset[int], int] | None] = {start: None}
    queue = deque([start])
    witness = None
    while queue:
        cur = queue.popleft()
        for a in range(rule.k):
            nxt = aut.advance(cur, a)
            if nxt in parent:
                continue
            parent[nxt] = (cur, a)
            if not nxt:
                letters = []
                node = nxt
                while parent[node] is not None:
                    node, letter = parent[node]
                    letters.append(letter)
                witness = tuple(reversed(letters))
                queue.clear()
                break
            if len(parent) > max_subsets:
                raise GuardExceeded(f"subset construction exceeded {max_subsets} subsets")
            queue.append(nxt)
    return SurjectivityReport(
        surjective=witness is None,
        witness=witness,
        method="subset-construction",
        rule_id=rule.label(),
        elapsed=time.perf_counter() - t0,
    )


def verify_uniform_invariance(rule: LocalRule, L: int) -> bool:
    """Check nu(F^-1[u]) == nu([u]) exactly for every |u| <= L under the uniform measure."""
    if L < 1:
        raise ValueError("L must be >= 1")
    aut = PreimageAutomaton(rule)
    k, r = rule.k, rule.r
    mats = aut.transfer
    if k ** (L + 2 * r) >= 2**62:
        raise GuardExceeded("preimage counts would overflow exact integer arithmetic")
    # depth-first over words, carrying the transfer vector of the prefix
    stack = [((), np.ones(aut.n_states, dtype=np.int64))]
    while stack:
        word, vec = stack.pop()
        if word:
            lhs = Fraction(int(vec.sum()), k ** (len(word) + 2 * r))
            if lhs != Fraction(1, k ** len(word)):
                return False
        if len(word) < L:
            for a in range(k):
                stack.append((word + (a,), vec @ mats[a]))
    return True
