"""Vectorized exact sampling primitives shared by the simulators."""

from __future__ import annotations

import numpy as np


def multinomial_counts(
    rng: np.random.Generator, n: np.ndarray, probs: np.ndarray
) -> np.ndarray:
    """Multinomial category counts for a different trial count per row.

    Peeling categories off with conditional binomials keeps the draw exact
    and vectorized across rows even when trial counts vary (numpy's own
    multinomial wants a scalar n).  Returns an int64 array of shape
    (len(n), len(probs)) whose rows sum to n.
    """
    remaining = np.asarray(n, dtype=np.int64).copy()
    counts = np.empty((len(remaining), len(probs)), dtype=np.int64)
    rem_p = 1.0
    for j in range(len(probs) - 1):
        frac = probs[j] / rem_p if rem_p > 1e-15 else 1.0
        c = rng.binomial(remaining, min(max(frac, 0.0), 1.0))
        counts[:, j] = c
        remaining -= c
        rem_p -= probs[j]
    counts[:, -1] = remaining
    return counts
