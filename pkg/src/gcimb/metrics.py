"""Evaluation metrics: OSPA, powered-sum approximation error, efficiency ratio."""

from dataclasses import dataclass
from itertools import permutations

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import logsumexp


@dataclass(frozen=True)
class OspaParams:
    cutoff: float = 5.0
    order: float = 1.0

    def __post_init__(self):
        if not self.cutoff > 0:
            raise ValueError("OSPA cutoff must be positive")
        if not self.order >= 1:
            raise ValueError("OSPA order must be at least 1")


def ospa(x, y, params=OspaParams()):
    """OSPA distance between point sets ``x`` (m, d) and ``y`` (n, d)."""
    c, p = params.cutoff, params.order
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    m = x.shape[0] if x.size else 0
    n = y.shape[0] if y.size else 0
    if m == 0 and n == 0:
        return 0.0
    if m == 0 or n == 0:
        return float(c)
    # canonical argument order makes the result bitwise symmetric
    x, y = x[np.lexsort(x.T[::-1])], y[np.lexsort(y.T[::-1])]
    if (m, x.tobytes()) > (n, y.tobytes()):
        x, y = y, x
    dist = np.linalg.norm(x[:, None, :] - y[None, :, :], axis=-1)
    cost = np.minimum(dist, c) ** p
    rows, cols = linear_sum_assignment(cost)
    total = cost[rows, cols].sum() + c**p * abs(m - n)
    return float((total / max(m, n)) ** (1.0 / p))


def powered_sum_log_terms(existence, log_density):
    """Log of every term ``Q^{I_h} prod_i p^{I_h(i)}(x_i)`` of an MB density.

    Parameters
    ----------
    existence : array_like, shape (M,)
    log_density : array_like, shape (n, M)
        ``log_density[i, l]`` is ``log p^(l)(x_i)``.

    Returns
    -------
    sequences : list of tuple
        Ordered index sequences ``I_h`` (``I_h[i]`` is the track explaining
        ``x_i``).
    log_terms : ndarray
    """
    r = np.asarray(existence, dtype=float)
    logp = np.asarray(log_density, dtype=float)
    n = logp.shape[0] if logp.ndim == 2 else logp.size // max(r.size, 1)
    logp = logp.reshape(n, r.size)
    with np.errstate(divide="ignore"):
        log_r, log_miss = np.log(r), np.log1p(-r)
    seqs = list(permutations(range(r.size), n))
    terms = np.empty(len(seqs))
    for k, seq in enumerate(seqs):
        inside = np.zeros(r.size, dtype=bool)
        inside[list(seq)] = True
        lq = np.sum(np.where(inside, log_r, log_miss))
        terms[k] = lq + sum(logp[i, l] for i, l in enumerate(seq))
    return seqs, terms


def dominant_term_ratio(log_terms):
    """Share of the largest term in the sum (1 when a single term exists)."""
    if len(log_terms) == 0:
        return 1.0
    return float(np.exp(np.max(log_terms) - logsumexp(log_terms)))


def powered_sum_error(log_terms, omega):
    """``|(sum d)**w - sum d**w|`` and the same error relative to ``(sum d)**w``."""
    log_terms = np.asarray(log_terms, dtype=float)
    if log_terms.size == 0 or not np.any(np.isfinite(log_terms)):
        return 0.0, 0.0
    exact = np.exp(omega * logsumexp(log_terms))
    approx = np.exp(logsumexp(omega * log_terms))
    err = abs(exact - approx)
    return float(err), float(err / exact) if exact > 0 else 0.0


def approximation_error(mb, estimates, omega):
    """Powered-sum approximation error of ``mb`` at the estimated state set.

    Track densities are evaluated through their ``logpdf`` (KDE for particle
    clouds).
    """
    est = np.asarray(estimates, dtype=float)
    n = est.shape[0] if est.size else 0
    if n > len(mb):
        raise ValueError("more estimates than tracks")
    if n == 0:
        log_density = np.zeros((0, len(mb)))
    else:
        log_density = np.column_stack([np.atleast_1d(t.density.logpdf(est)) for t in mb.tracks])
    _, terms = powered_sum_log_terms(mb.existence, log_density)
    return powered_sum_error(terms, omega)[0]


def efficiency_proportion(ospa_series, threshold):
    """Fraction of estimates whose OSPA is below ``threshold``."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    values = np.asarray(ospa_series, dtype=float)
    if values.size == 0:
        raise ValueError("empty OSPA series")
    return float(np.mean(values < threshold))
