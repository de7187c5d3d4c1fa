"""Systematic (low-variance) resampling."""

import numpy as np


def systematic_indices(weights, n=None, rng=None):
    """Return ``n`` ancestor indices drawn by systematic resampling.

    With ``rng=None`` the single uniform offset is fixed at 0.5, which makes
    the result a deterministic function of the weights.
    """
    w = np.asarray(weights, dtype=float)
    if n is None:
        n = w.size
    total = w.sum()
    if not np.isfinite(total) or total <= 0.0:
        raise ValueError("weights must have a positive finite sum")
    u = 0.5 if rng is None else rng.uniform()
    positions = (u + np.arange(n)) / n
    cumulative = np.cumsum(w / total)
    cumulative[-1] = 1.0
    return np.searchsorted(cumulative, positions, side="right")
