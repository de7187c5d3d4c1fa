"""Random-finite-set value types and their elementary functionals.

States are plain float arrays. The tracking code uses four-dimensional
``(px, py, vx, vy)`` states, but every density type here works in any
dimension, which keeps one-dimensional checks cheap.
"""

from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import NamedTuple

import numpy as np
from scipy import stats
from scipy.spatial import cKDTree
from scipy.special import logsumexp

from .kde import fit_kde
from .resampling import systematic_indices

POSITION = slice(0, 2)


class SingleState(NamedTuple):
    """Single-target state: position (m) and velocity (m/s)."""

    px: float
    py: float
    vx: float
    vy: float

    def as_array(self):
        return np.array(self, dtype=float)


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ParticleDensity:
    """Weighted particle cloud; the weights are normalized on construction."""

    states: np.ndarray
    weights: np.ndarray = None

    def __post_init__(self):
        x = np.array(self.states, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.shape[0] < 1:
            raise ValueError("a particle density needs at least one particle")
        if not np.all(np.isfinite(x)):
            raise ValueError("particle states must be finite")
        if self.weights is None:
            w = np.full(x.shape[0], 1.0 / x.shape[0])
        else:
            w = np.array(self.weights, dtype=float)
            if w.shape != (x.shape[0],):
                raise ValueError("one weight per particle required")
            if np.any(w < 0) or not np.all(np.isfinite(w)):
                raise ValueError("particle weights must be nonnegative and finite")
            total = w.sum()
            if total <= 0:
                raise ValueError("particle weights sum to zero")
            w = w / total
        object.__setattr__(self, "states", _frozen(x))
        object.__setattr__(self, "weights", _frozen(w))

    @property
    def count(self):
        return self.states.shape[0]

    @property
    def dim(self):
        return self.states.shape[1]

    def mean(self):
        return self.weights @ self.states

    def cov(self):
        dev = self.states - self.mean()
        return (dev * self.weights[:, None]).T @ dev

    @cached_property
    def kde(self):
        return fit_kde(self.states, self.weights)

    def logpdf(self, x):
        return self.kde.logpdf(x)

    def pdf(self, x):
        return self.kde.pdf(x)

    def resampled(self, n=None, rng=None):
        """Equally weighted copy with ``n`` particles (systematic resampling)."""
        idx = systematic_indices(self.weights, n or self.count, rng)
        return ParticleDensity(self.states[idx])


@dataclass(frozen=True, eq=False)
class GaussianDensity:
    """Exact Gaussian density; used for analytic examples and oracles."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        m = np.atleast_1d(np.asarray(self.mean, dtype=float))
        c = np.atleast_2d(np.asarray(self.cov, dtype=float))
        object.__setattr__(self, "mean", _frozen(m))
        object.__setattr__(self, "cov", _frozen(c))

    @property
    def dim(self):
        return self.mean.size

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim <= 1
        x = x.reshape(-1, self.dim)
        out = np.atleast_1d(stats.multivariate_normal.logpdf(x, self.mean, self.cov))
        return out[0] if single else out

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def sample(self, n, rng):
        return ParticleDensity(rng.multivariate_normal(self.mean, self.cov, size=n))


@dataclass(frozen=True, eq=False)
class MixtureDensity:
    """Finite mixture ``sum_i w_i p_i(x)`` of other densities."""

    components: tuple
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if len(self.components) != w.size or w.size == 0:
            raise ValueError("one weight per mixture component required")
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "weights", _frozen(w / w.sum()))

    @property
    def dim(self):
        return self.components[0].dim

    def logpdf(self, x):
        logs = np.array([np.atleast_1d(c.logpdf(x)) for c in self.components])
        with np.errstate(divide="ignore"):
            out = logsumexp(logs + np.log(self.weights)[:, None], axis=0)
        return out if np.ndim(x) > 1 else out[0]

    def pdf(self, x):
        vals = sum(w * np.atleast_1d(c.pdf(x)) for w, c in zip(self.weights, self.components))
        return vals if np.ndim(x) > 1 else vals[0]


@dataclass(frozen=True)
class BernoulliTrack:
    r: float
    density: object

    def __post_init__(self):
        if not 0.0 <= self.r <= 1.0:
            raise ValueError(f"existence probability {self.r} outside [0, 1]")


@dataclass(frozen=True)
class MBPosterior:
    """Multi-Bernoulli posterior; the track index is the tuple position."""

    tracks: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "tracks", tuple(self.tracks))

    def __len__(self):
        return len(self.tracks)

    def __iter__(self):
        return iter(self.tracks)

    def __getitem__(self, i):
        return self.tracks[i]

    @property
    def existence(self):
        return np.array([t.r for t in self.tracks], dtype=float)

    def expected_cardinality(self):
        return float(self.existence.sum())


@dataclass(frozen=True, eq=False)
class GMBHypothesis:
    """One ``(I1, theta)`` term of a generalized multi-Bernoulli density.

    ``densities[l]`` and ``normalizers[l]`` hold the fused density and its
    normalizing constant for each sensor-1 track ``l`` in ``fusion_map``.
    """

    fusion_map: object
    weight: float
    densities: dict = field(default_factory=dict)
    normalizers: dict = field(default_factory=dict)

    @property
    def subset(self):
        return self.fusion_map.domain

    def __post_init__(self):
        if set(self.densities) != set(self.fusion_map.domain):
            raise ValueError("fused densities must cover exactly the mapped tracks")
        if not 0.0 <= self.weight <= 1.0 + 1e-12:
            raise ValueError("hypothesis weight outside [0, 1]")


@dataclass(frozen=True, eq=False)
class GMBPosterior:
    hypotheses: tuple
    n_source_tracks: int

    def __post_init__(self):
        hyps = tuple(self.hypotheses)
        object.__setattr__(self, "hypotheses", hyps)
        total = sum(h.weight for h in hyps)
        if hyps and abs(total - 1.0) > 1e-9:
            raise ValueError(f"hypothesis weights sum to {total}, expected 1")
        keys = [h.fusion_map.pairs for h in hyps]
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate (I1, theta) hypotheses")
        for h in hyps:
            if any(not 0 <= i < self.n_source_tracks for i in h.subset):
                raise ValueError("hypothesis references an unknown source track")

    def __len__(self):
        return len(self.hypotheses)

    def expected_cardinality(self):
        return float(sum(h.weight * len(h.subset) for h in self.hypotheses))


def joint_existence_weight(mb, subset):
    """Probability that exactly the tracks in ``subset`` exist."""
    r = mb.existence
    subset = set(subset)
    if any(not 0 <= i < len(r) for i in subset):
        raise IndexError(f"index set {sorted(subset)} not within 0..{len(r) - 1}")
    inside = np.zeros(len(r), dtype=bool)
    inside[list(subset)] = True
    return float(np.prod(np.where(inside, r, 1.0 - r)))


def log_joint_existence_weight(existence, subset):
    r = np.asarray(existence, dtype=float)
    inside = np.zeros(len(r), dtype=bool)
    inside[list(subset)] = True
    with np.errstate(divide="ignore"):
        return float(np.sum(np.log(np.where(inside, r, 1.0 - r))))


def cardinality_distribution(mb):
    """Distribution of the number of existing targets, indexed 0..M."""
    pmf = np.array([1.0])
    for r in mb.existence:
        pmf = np.convolve(pmf, [1.0 - r, r])
    return pmf


def phd_mb(mb, x):
    """First moment ``sum_l r_l p_l(x)`` at points ``x`` (shape (n, d))."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    out = np.zeros(x.shape[0])
    for track in mb.tracks:
        out += track.r * np.atleast_1d(track.density.pdf(x))
    return out


def phd_gmb(gmb, x):
    """First moment of a GMB density at points ``x``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    out = np.zeros(x.shape[0])
    for hyp in gmb.hypotheses:
        for density in hyp.densities.values():
            out += hyp.weight * np.atleast_1d(density.pdf(x))
    return out


@dataclass(frozen=True, eq=False)
class SeparationReport:
    """HPD box unions per track and whether they are pairwise disjoint.

    ``regions[l]`` is a ``(centers, half_widths)`` pair: the union of the
    axis-aligned boxes ``centers[i] +/- half_widths``.
    """

    confidence: float
    regions: tuple
    separated: bool
    overlapping_pairs: tuple = ()


def hpd_region(density, confidence):
    """Box-union approximation of the HPD region of a particle density.

    Particles are ranked by KDE density; the highest ones are kept until their
    cumulative weight reaches ``confidence``. Each kept particle contributes a
    box whose half-width is the kernel bandwidth along each axis.
    """
    kde = density.kde
    order = np.argsort(-kde.logpdf(density.states), kind="stable")
    mass = np.cumsum(density.weights[order])
    keep = int(np.searchsorted(mass, confidence - 1e-12)) + 1
    centers = density.states[order[:keep]]
    return centers, kde.state_bandwidths


def _boxes_intersect(region_a, region_b):
    ca, ha = region_a
    cb, hb = region_b
    scale = ha + hb
    tree = cKDTree(cb / scale)
    dist, _ = tree.query(ca / scale, k=1, p=np.inf)
    return bool(np.any(dist < 1.0))


def check_separation(mb, confidence=0.9):
    """Test whether the tracks of ``mb`` are mutually separated at ``confidence``."""
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must lie strictly between 0 and 1")
    for track in mb.tracks:
        if track.density.count < 2:
            raise ValueError("separation check needs at least two particles per track")
    regions = tuple(hpd_region(t.density, confidence) for t in mb.tracks)
    overlaps = tuple(
        (a, b) for a, b in combinations(range(len(regions)), 2)
        if _boxes_intersect(regions[a], regions[b])
    )
    return SeparationReport(confidence, regions, not overlaps, overlaps)
