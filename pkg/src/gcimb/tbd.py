"""Synthetic image sensor for track-before-detect.

Each target spreads power over a small square template of cells through a
Gaussian point-spread function; every cell carries independent Gaussian noise.
Cell ``(a, b)`` is centred at ``(a * dx, b * dy)``.
"""

import csv
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SensorModel:
    """Image sensor parameters.

    ``noise_power`` is the per-cell noise variance and ``blur`` the variance
    of the point-spread function; ``template_radius`` rho gives a
    ``(2 rho + 1)``-square footprint per target.
    """

    width: int = 50
    height: int = 50
    dx: float = 1.0
    dy: float = 1.0
    snr_db: float = 15.0
    noise_power: float = 1.0
    blur: float = 1.0
    template_radius: int = 1

    def __post_init__(self):
        for name in ("width", "height", "dx", "dy", "noise_power", "blur"):
            if not getattr(self, name) > 0:
                raise ValueError(f"sensor field {name!r} must be positive")
        if self.template_radius < 0:
            raise ValueError("sensor field 'template_radius' must be nonnegative")
        if not np.isfinite(self.snr_db):
            raise ValueError("sensor field 'snr_db' must be finite")

    @property
    def source_intensity(self):
        return self.noise_power * 10.0 ** (self.snr_db / 10.0)

    @property
    def peak_contribution(self):
        return self.dx * self.dy * self.source_intensity / (2.0 * np.pi * self.blur)

    @property
    def shape(self):
        return (self.width, self.height)


@dataclass(frozen=True, eq=False)
class ImageFrame:
    """Cell intensities ``z[a, b]`` observed at scan ``k``."""

    intensities: np.ndarray
    k: int = 0

    def to_csv(self, path):
        """Dump the grid, one row per ``b`` (y index), columns over ``a``."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            for row in self.intensities.T:
                writer.writerow([f"{v:.6g}" for v in row])


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Target trajectories.

    ``states[k, i]`` is target ``i`` at scan ``k``; ``alive[k, i]`` says
    whether it exists then.
    """

    states: np.ndarray
    alive: np.ndarray

    @property
    def n_steps(self):
        return self.states.shape[0]

    def at(self, k):
        return self.states[k][self.alive[k]]

    @classmethod
    def constant_velocity(cls, initial, n_steps, period=1.0, birth=None, death=None):
        """Noise-free constant-velocity trajectories from initial states (n, 4)."""
        x0 = np.atleast_2d(np.asarray(initial, dtype=float))
        t = np.arange(n_steps)[:, None] * period
        states = np.repeat(x0[None], n_steps, axis=0)
        states[:, :, 0:2] = x0[None, :, 0:2] + t[:, :, None] * x0[None, :, 2:4]
        n = x0.shape[0]
        birth = np.zeros(n, int) if birth is None else np.asarray(birth)
        death = np.full(n, n_steps) if death is None else np.asarray(death)
        k = np.arange(n_steps)[:, None]
        return cls(states, (k >= birth[None]) & (k < death[None]))


def template_cells(positions, sensor):
    """Template cells of each position.

    Returns integer cell indices of shape (n, K, 2) and a validity mask of
    shape (n, K); cells falling outside the image are masked out.
    """
    p = np.atleast_2d(positions)[:, :2]
    centre = np.rint(p / np.array([sensor.dx, sensor.dy])).astype(int)
    rho = sensor.template_radius
    off = np.arange(-rho, rho + 1)
    offsets = np.stack(np.meshgrid(off, off, indexing="ij"), axis=-1).reshape(-1, 2)
    cells = centre[:, None, :] + offsets[None]
    valid = (
        (cells[..., 0] >= 0) & (cells[..., 0] < sensor.width)
        & (cells[..., 1] >= 0) & (cells[..., 1] < sensor.height)
    )
    return cells, valid


def point_spread(state, cells, sensor):
    """Power contributed by a target at ``state`` to ``cells`` (shape (..., 2))."""
    cells = np.asarray(cells)
    p = np.asarray(state, dtype=float)[..., :2]
    ex = sensor.dx * cells[..., 0] - p[..., 0]
    ey = sensor.dy * cells[..., 1] - p[..., 1]
    return sensor.peak_contribution * np.exp(-(ex**2 + ey**2) / (2.0 * sensor.blur))


def _psf_on_templates(states, sensor):
    states = np.atleast_2d(np.asarray(states, dtype=float))
    cells, valid = template_cells(states, sensor)
    power = point_spread(states[:, None, :], cells, sensor)
    return cells, valid, np.where(valid, power, 0.0)


def expected_image(states, sensor):
    """Noise-free mean image; overlapping templates add."""
    mean = np.zeros(sensor.shape)
    states = np.asarray(states, dtype=float).reshape(-1, 4) if np.size(states) else np.zeros((0, 4))
    if len(states):
        cells, valid, power = _psf_on_templates(states, sensor)
        np.add.at(mean, (cells[valid][:, 0], cells[valid][:, 1]), power[valid])
    return mean


def generate_frame(states, sensor, rng, k=0):
    """Draw one noisy image of the targets at ``states`` (shape (n, 4))."""
    mean = expected_image(states, sensor)
    noise = rng.standard_normal(sensor.shape) * np.sqrt(sensor.noise_power)
    return ImageFrame(mean + noise, k)


def log_likelihood_ratio(frame, states, sensor):
    """Log of the single-target likelihood ratio for each row of ``states``.

    For the Gaussian pixel model the ratio over the template reduces to
    ``sum_j (z_j s_j - s_j**2 / 2) / noise_power`` with ``s_j`` the
    point-spread power. A 1-D input returns a scalar.
    """
    states = np.asarray(states, dtype=float)
    single = states.ndim == 1
    cells, valid, power = _psf_on_templates(states, sensor)
    a = np.clip(cells[..., 0], 0, sensor.width - 1)
    b = np.clip(cells[..., 1], 0, sensor.height - 1)
    z = np.where(valid, frame.intensities[a, b], 0.0)
    out = np.sum(z * power - 0.5 * power**2, axis=1) / sensor.noise_power
    return out[0] if single else out


def multi_target_log_likelihood(frame, states, sensor):
    """Log multi-target likelihood, up to the target-free constant."""
    states = np.asarray(states, dtype=float)
    if states.size == 0:
        return 0.0
    return float(np.sum(log_likelihood_ratio(frame, states.reshape(-1, 4), sensor)))
