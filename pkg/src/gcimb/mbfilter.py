"""Particle multi-Bernoulli track-before-detect filter."""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logsumexp

from .rfs import POSITION, BernoulliTrack, MBPosterior, ParticleDensity
from .resampling import systematic_indices
from .tbd import log_likelihood_ratio


@dataclass(frozen=True)
class MotionModel:
    """Constant-velocity motion with white acceleration noise."""

    period: float = 1.0
    accel_std: float = 0.2
    survival: float = 0.95

    def __post_init__(self):
        if not self.period > 0:
            raise ValueError("motion field 'period' must be positive")
        if self.accel_std < 0:
            raise ValueError("motion field 'accel_std' must be nonnegative")
        if not 0.0 <= self.survival <= 1.0:
            raise ValueError("motion field 'survival' must lie in [0, 1]")

    @property
    def transition(self):
        t = self.period
        return np.array([[1, 0, t, 0], [0, 1, 0, t], [0, 0, 1, 0], [0, 0, 0, 1]], dtype=float)

    @property
    def noise_gain(self):
        t = self.period
        return np.array([[t * t / 2, 0], [0, t * t / 2], [t, 0], [0, t]])


@dataclass(frozen=True)
class FilterConfig:
    particles_per_track: int = 200
    prune_threshold: float = 1e-3
    merge_distance: float = 2.0
    existence_threshold: float = 0.5
    initial_existence: float = 0.5
    init_position_halfwidth: float = 2.0
    init_velocity_std: float = 0.5
    max_existence: float = 1.0 - 1e-6
    regularize: bool = True
    init_oversample: int = 10

    def __post_init__(self):
        if self.particles_per_track < 1:
            raise ValueError("filter field 'particles_per_track' must be positive")
        for name in ("prune_threshold", "existence_threshold", "initial_existence", "max_existence"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ValueError(f"filter field {name!r} must lie in (0, 1)")
        if not self.init_position_halfwidth > 0:
            raise ValueError("filter field 'init_position_halfwidth' must be positive")
        if self.merge_distance < 0:
            raise ValueError("filter field 'merge_distance' must be nonnegative")
        if self.init_oversample < 1:
            raise ValueError("filter field 'init_oversample' must be a positive integer")
        if self.init_velocity_std < 0:
            raise ValueError("filter field 'init_velocity_std' must be nonnegative")


def initialize_tracks(truth_states, config, rng, cell_size=1.0):
    """One Bernoulli track per true target, spread around its true state.

    Positions are uniform within ``init_position_halfwidth`` cells of the truth
    on each axis; velocities are the true ones plus Gaussian noise. The cloud
    has ``init_oversample`` times the usual particle count; the first
    resampling brings it back down.
    """
    tracks = []
    n = config.particles_per_track * config.init_oversample
    half = config.init_position_halfwidth * cell_size
    for x in np.atleast_2d(truth_states):
        parts = np.empty((n, 4))
        parts[:, 0:2] = x[0:2] + rng.uniform(-half, half, size=(n, 2))
        parts[:, 2:4] = x[2:4] + config.init_velocity_std * rng.standard_normal((n, 2))
        tracks.append(BernoulliTrack(config.initial_existence, ParticleDensity(parts)))
    return MBPosterior(tracks)


def predict(mb, motion, rng):
    """Propagate every track through survival and constant-velocity motion."""
    f, g = motion.transition, motion.noise_gain
    tracks = []
    for track in mb.tracks:
        d = track.density
        moved = d.states @ f.T
        if motion.accel_std > 0:
            moved += (motion.accel_std * rng.standard_normal((d.count, 2))) @ g.T
        tracks.append(BernoulliTrack(track.r * motion.survival, ParticleDensity(moved, d.weights)))
    return MBPosterior(tracks)


def bernoulli_existence_update(r, log_evidence):
    """``r z / (1 - r + r z)`` evaluated from ``log z``."""
    if r <= 0.0:
        return 0.0
    if r >= 1.0:
        return 1.0
    return float(expit(np.log(r) - np.log1p(-r) + log_evidence))


def update(mb, frame, sensor, max_existence=1.0):
    """Weight each track's particles by the image likelihood ratio.

    A track whose predicted particles all receive zero likelihood is returned
    with ``r = 0`` so that pruning removes it. Existence is capped at
    ``max_existence``.
    """
    tracks = []
    for track in mb.tracks:
        d = track.density
        loglik = log_likelihood_ratio(frame, d.states, sensor)
        with np.errstate(divide="ignore"):
            logw = np.log(d.weights) + loglik
        log_z = logsumexp(logw)
        if not np.isfinite(log_z):
            tracks.append(BernoulliTrack(0.0, d))
            continue
        w = np.exp(logw - log_z)
        r = min(bernoulli_existence_update(track.r, log_z), max_existence)
        tracks.append(BernoulliTrack(r, ParticleDensity(d.states, w)))
    return MBPosterior(tracks)


def resample(track, rng, n=None):
    """Systematic resampling to ``n`` equally weighted particles."""
    d = track.density
    if not np.all(np.isfinite(d.weights)) or d.weights.sum() <= 0:
        return BernoulliTrack(0.0, d)
    return BernoulliTrack(track.r, d.resampled(n or d.count, rng))


def regularize(track, rng):
    """Jitter equally weighted particles with the cloud's own KDE kernel."""
    d = track.density
    chol = np.linalg.cholesky(d.kde.kernel_cov)
    jitter = rng.standard_normal(d.states.shape) @ chol.T
    return BernoulliTrack(track.r, ParticleDensity(d.states + jitter, d.weights))


def _merge_pair(a, b, n, rng):
    total = a.r + b.r
    if total <= 0:
        return BernoulliTrack(0.0, a.density)
    states = np.vstack([a.density.states, b.density.states])
    weights = np.concatenate([a.r / total * a.density.weights, b.r / total * b.density.weights])
    idx = systematic_indices(weights, n, rng)
    return BernoulliTrack(min(1.0, total), ParticleDensity(states[idx]))


def merge_and_prune(mb, config, rng=None):
    """Merge tracks with close position means, then drop unlikely tracks.

    Merging repeats until no two tracks are closer than ``merge_distance``, so
    the operation is idempotent. ``merge_distance = 0`` disables merging.
    """
    tracks = list(mb.tracks)
    changed = False
    while len(tracks) > 1:
        means = np.array([t.density.mean()[POSITION] for t in tracks])
        dist = np.linalg.norm(means[:, None] - means[None], axis=-1)
        np.fill_diagonal(dist, np.inf)
        i, j = np.unravel_index(np.argmin(dist), dist.shape)
        if dist[i, j] >= config.merge_distance:
            break
        i, j = min(i, j), max(i, j)
        merged = _merge_pair(tracks[i], tracks[j], config.particles_per_track, rng)
        tracks[i] = merged
        del tracks[j]
        changed = True
    kept = [t for t in tracks if t.r >= config.prune_threshold]
    if not changed and len(kept) == len(mb):
        return mb
    return MBPosterior(kept)


def extract_estimates(mb, config):
    """Weighted particle means of the tracks with ``r > existence_threshold``."""
    means = [t.density.mean() for t in mb.tracks if t.r > config.existence_threshold]
    return np.array(means).reshape(-1, 4) if means else np.zeros((0, 4))


class LocalFilter:
    """MB-TBD filter owned by one sensor node."""

    def __init__(self, sensor, motion, config, rng):
        self.sensor = sensor
        self.motion = motion
        self.config = config
        self.rng = rng

    def step(self, mb, frame, first=False):
        """Predict (unless ``first``), update, resample, merge and prune.

        With ``config.regularize`` the resampled particles are jittered with
        their KDE kernel to keep the clouds from collapsing onto a few
        duplicated states.
        """
        if not first:
            mb = predict(mb, self.motion, self.rng)
        mb = update(mb, frame, self.sensor, self.config.max_existence)
        n = self.config.particles_per_track
        tracks = [resample(t, self.rng, n) for t in mb.tracks]
        if self.config.regularize:
            tracks = [regularize(t, self.rng) if t.r > 0 else t for t in tracks]
        mb = MBPosterior(tracks)
        return merge_and_prune(mb, self.config, self.rng)
