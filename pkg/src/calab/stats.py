"""Confidence intervals and chunked sampling shared by the Monte Carlo modules."""
from __future__ import annotations

import math

Z95 = 1.959963984540054
CHUNK = 4096


def wilson_interval(successes: int, n: int, z: float = Z95) -> tuple[float, float]:
    if n <= 0:
        raise ValueError("need at least one sample")
    phat = successes / n
    denom = 1 + z * z / n
    centre = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    # the bounds are exactly 0 and 1 at the extremes; avoid rounding residue
    lo = 0.0 if successes == 0 else min(phat, max(0.0, centre - half))
    hi = 1.0 if successes == n else max(phat, min(1.0, centre + half))
    return lo, hi



def chunks(samples: int, chunk: int = CHUNK):
    """(chunk index, chunk size) pairs; chunk c should draw from substream c."""
    for c, start in enumerate(range(0, samples, chunk)):
        yield c, min(chunk, samples - start)
