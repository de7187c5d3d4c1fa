"""Gaussian kernel density estimates of particle clouds.

The kernel covariance is chosen per cloud: the particles are whitened with the
inverse square root of their empirical covariance, a rule-of-thumb bandwidth is
picked independently along each whitened axis, and the resulting diagonal
bandwidth matrix is mapped back to state coordinates.
"""

from dataclasses import dataclass, field

import numpy as np
from .resampling import systematic_indices

BANDWIDTH_FLOOR = 1e-3
_ABS_REGULARIZER = 1e-6
_REL_REGULARIZER = 1e-8
_LOG_2PI = np.log(2.0 * np.pi)
# max number of (point, center) pairs held in memory per evaluation block
_BLOCK = 2_000_000


def rut_bandwidth(sigma, n):
    """Rule-of-thumb bandwidth ``sigma * (4 / (3 n)) ** (1/5)``.

    Degenerate samples (``sigma == 0``) get the floor ``BANDWIDTH_FLOOR``.
    """
    if n < 1:
        raise ValueError("rule-of-thumb bandwidth needs at least one sample")
    if sigma < 0:
        raise ValueError("standard deviation must be nonnegative")
    h = sigma * (4.0 / (3.0 * n)) ** 0.2
    return max(h, BANDWIDTH_FLOOR)


def _sym_power(matrix, power):
    vals, vecs = np.linalg.eigh(matrix)
    return (vecs * vals**power) @ vecs.T


@dataclass(frozen=True, eq=False)
class KdeDensity:
    """Equal-weight Gaussian kernel mixture ``(1/L) sum_m N(x; c_m, Sigma)``.

    Attributes
    ----------
    centers : ndarray, shape (L, d)
    kernel_cov : ndarray, shape (d, d)
    whitener : ndarray, shape (d, d)
        Inverse square root of the (regularized) empirical covariance.
    bandwidths : ndarray, shape (d,)
        Per-axis bandwidths in whitened coordinates.
    empirical_cov : ndarray, shape (d, d)
    """

    centers: np.ndarray
    kernel_cov: np.ndarray
    whitener: np.ndarray
    bandwidths: np.ndarray
    empirical_cov: np.ndarray
    _transform: np.ndarray = field(repr=False)
    _log_norm: float = field(repr=False)
    _proj_centers: np.ndarray = field(repr=False)

    @property
    def count(self):
        return self.centers.shape[0]

    @property
    def dim(self):
        return self.centers.shape[1]

    @property
    def state_bandwidths(self):
        """Kernel standard deviation along each state axis."""
        return np.sqrt(np.diag(self.kernel_cov))

    def logpdf(self, x):
        """Log density at points ``x`` of shape (n, d) (or a single (d,) point)."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != self.dim:
            raise ValueError(f"expected points of dimension {self.dim}, got {x.shape[1]}")
        proj = x @ self._transform.T
        c = self._proj_centers
        c_sq = np.einsum("ij,ij->i", c, c)
        out = np.empty(x.shape[0])
        step = max(1, _BLOCK // max(1, self.count))
        for start in range(0, x.shape[0], step):
            p = proj[start:start + step]
            sq = np.einsum("ij,ij->i", p, p)[:, None] + c_sq[None, :] - 2.0 * p @ c.T
            np.maximum(sq, 0.0, out=sq)
            sq *= -0.5
            peak = sq.max(axis=1)
            np.exp(sq - peak[:, None], out=sq)
            out[start:start + step] = peak + np.log(sq.sum(axis=1))
        out += self._log_norm
        return out[0] if single else out

    def pdf(self, x):
        return np.exp(self.logpdf(x))


def fit_kde(particles, weights=None):
    """Fit a :class:`KdeDensity` to a particle cloud.

    Parameters
    ----------
    particles : array_like, shape (L, d) or (L,)
        Particle states, or a ``ParticleDensity``.
    weights : array_like, optional
        Particle weights. Unequal weights are first converted to an equally
        weighted cloud of the same size by deterministic systematic
        resampling.
    """
    if hasattr(particles, "states"):
        weights = particles.weights if weights is None else weights
        particles = particles.states
    x = np.asarray(particles, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n, d = x.shape
    if n < 1:
        raise ValueError("cannot fit a KDE to an empty particle set")
    if weights is not None:
        w = np.asarray(weights, dtype=float)
        if not np.allclose(w, w[0], rtol=1e-12, atol=0.0):
            x = x[systematic_indices(w, n)]

    mean = x.mean(axis=0)
    dev = x - mean
    emp_cov = dev.T @ dev / n
    trace = np.trace(emp_cov)
    eps = _REL_REGULARIZER * trace / d if trace > 0 else _ABS_REGULARIZER
    reg_cov = emp_cov + eps * np.eye(d)

    whitener = _sym_power(reg_cov, -0.5)
    y = x @ whitener.T
    sigma = y.std(axis=0)
    h = np.array([rut_bandwidth(s, n) for s in sigma])
    t = np.linalg.inv(whitener)
    kernel_cov = t @ np.diag(h**2) @ t.T
    kernel_cov = 0.5 * (kernel_cov + kernel_cov.T)

    vals, vecs = np.linalg.eigh(kernel_cov)
    floor = BANDWIDTH_FLOOR**2
    if vals.min() < floor:
        vals = np.maximum(vals, floor)
        kernel_cov = (vecs * vals) @ vecs.T
    # x^T Sigma^-1 x == |A x|^2 with A = vals^-1/2 vecs^T
    transform = (vecs / np.sqrt(vals)).T
    log_norm = -np.log(n) - 0.5 * d * _LOG_2PI - 0.5 * np.sum(np.log(vals))
    return KdeDensity(
        centers=x,
        kernel_cov=kernel_cov,
        whitener=whitener,
        bandwidths=h,
        empirical_cov=emp_cov,
        _transform=transform,
        _log_norm=float(log_norm),
        _proj_centers=x @ transform.T,
    )


def eval_kde(kde, x):
    """Density of ``kde`` at ``x``."""
    return kde.pdf(x)
