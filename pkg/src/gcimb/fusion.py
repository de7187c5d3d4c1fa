"""Generalized covariance intersection (geometric-mean) fusion of MB posteriors.

Two MB posteriors are fused into a generalized multi-Bernoulli (GMB) density
whose hypotheses pair a subset of sensor-1 tracks with distinct sensor-2 tracks
(a fusion map). Each matched pair contributes the normalized geometric mean of
the two track densities, estimated by importance sampling on the union of the
two particle clouds. The GMB is then collapsed to the MB with the same first
moment so that it can be fused again or fed back to a local filter.
"""

from dataclasses import dataclass
from itertools import combinations, permutations
from math import perm

import numpy as np
from scipy.special import logsumexp

from .rfs import (
    BernoulliTrack,
    GMBHypothesis,
    GMBPosterior,
    MBPosterior,
    MixtureDensity,
    ParticleDensity,
    log_joint_existence_weight,
)
from .resampling import systematic_indices


class FusionMap:
    """Injective assignment of sensor-1 track indices to sensor-2 track indices."""

    __slots__ = ("pairs",)

    def __init__(self, assignment=()):
        pairs = tuple(sorted(dict(assignment).items()))
        targets = [j for _, j in pairs]
        if len(set(targets)) != len(targets):
            raise ValueError(f"fusion map {dict(pairs)} is not injective")
        self.pairs = pairs

    @property
    def domain(self):
        return frozenset(i for i, _ in self.pairs)

    @property
    def image(self):
        return frozenset(j for _, j in self.pairs)

    def __call__(self, i):
        return dict(self.pairs)[i]

    def __len__(self):
        return len(self.pairs)

    def __eq__(self, other):
        return isinstance(other, FusionMap) and self.pairs == other.pairs

    def __hash__(self):
        return hash(self.pairs)

    def __repr__(self):
        return f"FusionMap({dict(self.pairs)})"


@dataclass(frozen=True)
class FusionWeights:
    omega1: float = 0.5
    omega2: float = 0.5

    def __post_init__(self):
        if self.omega1 < 0 or self.omega2 < 0 or abs(self.omega1 + self.omega2 - 1.0) > 1e-9:
            raise ValueError(f"fusion weights ({self.omega1}, {self.omega2}) must be nonnegative and sum to 1")

    def swapped(self):
        return FusionWeights(self.omega2, self.omega1)


@dataclass(frozen=True, eq=False)
class PairFusionResult:
    """Fused density of one track pair and the log of its normalizing constant."""

    density: ParticleDensity
    log_normalizer: float

    @property
    def normalizer(self):
        return float(np.exp(self.log_normalizer))

    @property
    def feasible(self):
        return self.normalizer > 0.0


def enumerate_fusion_maps(subset, targets):
    """All injective maps from ``subset`` into ``targets`` in canonical order."""
    dom = sorted(subset)
    return [FusionMap(zip(dom, img)) for img in permutations(sorted(targets), len(dom))]


def count_fusion_maps(n_subset, n_targets):
    return perm(n_targets, n_subset) if n_subset <= n_targets else 0


def _weighted_power(omega, logp):
    # p ** 0 == 1 even where p underflows
    return omega * logp if omega > 0 else np.zeros_like(logp)


# exp(x) underflows to 0.0 below about -745; leave a wide margin for rounding
_LOG_Z_CUTOFF = -800.0


def _log_z_upper_bound(k1, k2, omega):
    """Cheap upper bound on ``log Z`` for two far-apart KDEs.

    A KDE is at least its own-kernel peak ``exp(_log_norm)`` at each of its
    centres and at most ``L * peak * exp(-g**2 / (2 lam_max))`` at distance
    ``g`` from the other cloud's bounding box. Dividing by the own-cloud term
    of the denominator bounds every importance weight.
    """
    if omega.omega1 <= 0 or omega.omega2 <= 0:
        return 0.0
    lo1, hi1 = k1.centers.min(axis=0), k1.centers.max(axis=0)
    lo2, hi2 = k2.centers.min(axis=0), k2.centers.max(axis=0)
    gap2 = float(np.sum(np.maximum(0.0, np.maximum(lo1 - hi2, lo2 - hi1)) ** 2))
    bounds = []
    for own, other, w_own, w_other in ((k1, k2, omega.omega1, omega.omega2), (k2, k1, omega.omega2, omega.omega1)):
        lam = float(np.linalg.eigvalsh(other.kernel_cov)[-1])
        log_other = other._log_norm + np.log(other.count) - 0.5 * gap2 / lam
        log_zeta = (w_own - 1.0) * own._log_norm + w_other * log_other - np.log(own.count)
        bounds.append(np.log(own.count) + log_zeta)
    return float(np.logaddexp(*bounds))


def fuse_track_pair(p1, p2, omega, rng=None, n_particles=None):
    """Geometric-mean fusion ``p1**w1 p2**w2 / Z`` of two particle densities.

    Both clouds are turned into KDEs; their equally weighted kernel centres are
    pooled and treated as a sample from the mixture ``(L1 p1 + L2 p2) / L``.
    Importance weights ``p1**w1 p2**w2 / (L1 p1 + L2 p2)`` then give both the
    fused particle density and, by their sum, the estimate of ``Z``.

    Returns weighted particles unless ``n_particles`` is given, in which case
    the result is resampled to that many equally weighted particles. Pairs
    whose ``Z`` provably underflows are flagged infeasible without evaluating
    the KDEs.
    """
    k1, k2 = p1.kde, p2.kde
    pts = np.vstack([k1.centers, k2.centers])
    if _log_z_upper_bound(k1, k2, omega) < _LOG_Z_CUTOFF:
        return PairFusionResult(ParticleDensity(pts), -np.inf)
    lp1, lp2 = k1.logpdf(pts), k2.logpdf(pts)
    log_num = _weighted_power(omega.omega1, lp1) + _weighted_power(omega.omega2, lp2)
    log_den = np.logaddexp(np.log(k1.count) + lp1, np.log(k2.count) + lp2)
    with np.errstate(invalid="ignore"):
        log_zeta = np.where(np.isfinite(log_den), log_num - log_den, -np.inf)
    log_z = float(logsumexp(log_zeta))
    if not np.exp(log_z) > 0.0:
        return PairFusionResult(ParticleDensity(pts), -np.inf)
    weights = np.exp(log_zeta - log_z)
    density = ParticleDensity(pts, weights)
    if n_particles is not None:
        density = density.resampled(n_particles, rng)
    return PairFusionResult(density, log_z)


@dataclass(frozen=True)
class TruncationConfig:
    """Hypothesis-space controls for :func:`gci_mb_fuse`.

    Exhaustive enumeration is used while both posteriors have at most
    ``exhaustive_max_tracks`` tracks; beyond that only track pairs whose means
    differ by less than ``gate`` kernel standard deviations on every axis are
    considered. Hypotheses lighter than ``min_weight`` are dropped.
    """

    exhaustive_max_tracks: int = 6
    gate: float = 6.0
    min_weight: float = 1e-6
    particles_per_track: int = 200


@dataclass(frozen=True, eq=False)
class FusionResult:
    gmb: GMBPosterior
    mb: MBPosterior
    swapped: bool = False


def _admissible(d1, d2, gate):
    sd = np.sqrt(np.diag(d1.kde.kernel_cov) + np.diag(d2.kde.kernel_cov))
    return bool(np.all(np.abs(d1.mean() - d2.mean()) < gate * sd))


def gci_mb_fuse(mb1, mb2, omega=FusionWeights(), truncation=TruncationConfig(), rng=None):
    """Fuse two MB posteriors; returns the GMB density and its moment-matched MB.

    The posterior with fewer tracks plays the sensor-1 role (its weight moves
    with it), so the fused MB is indexed by the smaller track set.
    """
    swapped = len(mb1) > len(mb2)
    if swapped:
        mb1, mb2, omega = mb2, mb1, omega.swapped()
    m1, m2 = len(mb1), len(mb2)
    r1, r2 = mb1.existence, mb2.existence
    gated = max(m1, m2) > truncation.exhaustive_max_tracks

    pair_cache = {}

    def pair(i, j):
        if (i, j) not in pair_cache:
            d1, d2 = mb1[i].density, mb2[j].density
            if gated and not _admissible(d1, d2, truncation.gate):
                pair_cache[i, j] = None
            else:
                pair_cache[i, j] = fuse_track_pair(d1, d2, omega)
        return pair_cache[i, j]

    keys, log_w = [], []
    all2 = range(m2)
    for n in range(m1 + 1):
        for subset in combinations(range(m1), n):
            lq1 = log_joint_existence_weight(r1, subset)
            if omega.omega1 > 0 and lq1 == -np.inf:
                continue
            for fmap in enumerate_fusion_maps(subset, all2):
                lq2 = log_joint_existence_weight(r2, fmap.image)
                if omega.omega2 > 0 and lq2 == -np.inf:
                    continue
                results = [pair(i, j) for i, j in fmap.pairs]
                if any(res is None or not res.feasible for res in results):
                    continue
                lw = (omega.omega1 * lq1 if omega.omega1 > 0 else 0.0)
                lw += (omega.omega2 * lq2 if omega.omega2 > 0 else 0.0)
                lw += sum(res.log_normalizer for res in results)
                keys.append(fmap)
                log_w.append(lw)

    if not keys:
        # every hypothesis infeasible: nothing can be asserted about any track
        gmb = GMBPosterior((GMBHypothesis(FusionMap(), 1.0),), m1)
        return FusionResult(gmb, MBPosterior(), swapped)

    log_w = np.array(log_w)
    w = np.exp(log_w - logsumexp(log_w))
    keep = w >= truncation.min_weight
    w = w[keep] / w[keep].sum()
    hyps = []
    for fmap, wi in zip((k for k, kp in zip(keys, keep) if kp), w):
        res = {i: pair(i, j) for i, j in fmap.pairs}
        hyps.append(GMBHypothesis(
            fmap, float(wi),
            {i: r.density for i, r in res.items()},
            {i: r.normalizer for i, r in res.items()},
        ))
    gmb = GMBPosterior(tuple(hyps), m1)
    mb = moment_match(gmb, rng=rng, n_particles=truncation.particles_per_track)
    return FusionResult(gmb, mb, swapped)


def moment_match(gmb, rng=None, n_particles=200, resample=True):
    """MB density with the same first moment as ``gmb``.

    Each source track gets the total weight of the hypotheses containing it as
    its existence probability, and the correspondingly weighted mixture of its
    fused densities. With ``resample=True`` the mixture is realized by pooling
    the component particles and resampling ``n_particles`` of them; otherwise
    the exact :class:`MixtureDensity` is kept.
    """
    tracks = []
    for i in range(gmb.n_source_tracks):
        # hypotheses sharing the same fused pair contribute the same density
        parts = {}
        for hyp in gmb.hypotheses:
            if i in hyp.densities:
                key = id(hyp.densities[i])
                density, w = parts.get(key, (hyp.densities[i], 0.0))
                parts[key] = (density, w + hyp.weight)
        if not parts:
            continue
        components = [d for d, _ in parts.values()]
        weights = np.array([w for _, w in parts.values()])
        r = float(weights.sum())
        if r <= 0:
            continue
        r = min(r, 1.0)
        if not resample:
            density = MixtureDensity(tuple(components), weights)
        elif len(components) == 1 and components[0].count == n_particles and np.allclose(
                components[0].weights, 1.0 / n_particles):
            density = components[0]
        else:
            states = np.vstack([d.states for d in components])
            pw = np.concatenate([w * d.weights for d, w in zip(components, weights)])
            density = ParticleDensity(states[systematic_indices(pw, n_particles, rng)])
        tracks.append(BernoulliTrack(r, density))
    return MBPosterior(tracks)


def metropolis_weights(adjacency, node, neighbor):
    """Pairwise Metropolis fusion weights for adjacent ``node`` and ``neighbor``.

    ``adjacency`` maps each node to the set of its neighbours. The neighbour
    gets ``1 / (1 + max(deg(node), deg(neighbor)))``.
    """
    if neighbor not in adjacency[node] or node == neighbor:
        raise ValueError(f"nodes {node} and {neighbor} are not adjacent")
    w2 = 1.0 / (1.0 + max(len(adjacency[node]), len(adjacency[neighbor])))
    return FusionWeights(1.0 - w2, w2)


def metropolis_row(adjacency, node):
    """Metropolis weights of ``node`` over its closed neighbourhood.

    Returns ``(neighbors, weights)`` with ``node`` first; the weights sum to 1.
    """
    others = sorted(adjacency[node])
    w = [metropolis_weights(adjacency, node, j).omega2 for j in others]
    return [node] + others, [1.0 - sum(w)] + w


def sequential_fuse(posteriors, exponents=None, truncation=TruncationConfig(), rng=None):
    """Fold pairwise fusion over ``posteriors``.

    ``exponents`` are the geometric-mean weights of the posteriors (default:
    equal). Each pairwise step weighs the running result by the total exponent
    already absorbed, so the fold realizes exactly ``prod_i pi_i ** a_i``
    under the pairwise approximation.
    """
    posteriors = list(posteriors)
    if not posteriors:
        raise ValueError("nothing to fuse")
    if exponents is None:
        exponents = [1.0 / len(posteriors)] * len(posteriors)
    if len(exponents) != len(posteriors):
        raise ValueError("one exponent per posterior required")
    a = np.asarray(exponents, dtype=float)
    if np.any(a < 0) or abs(a.sum() - 1.0) > 1e-9:
        raise ValueError("exponents must be nonnegative and sum to 1")
    fused, absorbed = posteriors[0], a[0]
    for post, ai in zip(posteriors[1:], a[1:]):
        total = absorbed + ai
        if total <= 0:
            continue
        w2 = ai / total
        fused = gci_mb_fuse(fused, post, FusionWeights(1.0 - w2, w2), truncation, rng).mb
        absorbed = total
    return fused
