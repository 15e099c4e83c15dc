"""Simulated LIDAR, GPS and IMU."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..gait_model import _as_rng, wrap_angle
from .world import WorldModel, raycast

MAX_RANGE = 30.0
NO_RETURN = math.inf
MIN_RANGE = 1e-3


def beam_angles(n_beams: int = 360) -> np.ndarray:
    """Beam bearings relative to the heading, symmetric about zero.

    Beam ``i`` and beam ``n - 1 - i`` are exact mirror images; an odd beam
    count puts one beam straight ahead.
    """
    if n_beams <= 0:
        return np.zeros(0)
    return (np.arange(n_beams) - (n_beams - 1) / 2.0) * (2.0 * math.pi / n_beams)


@dataclass(frozen=True)
class ScanFrame:
    stamp: float
    angle_min: float
    angle_max: float
    n_beams: int
    ranges: np.ndarray

    @property
    def angles(self) -> np.ndarray:
        return beam_angles(self.n_beams)

    @property
    def valid(self) -> np.ndarray:
        return np.isfinite(self.ranges)

    @property
    def min_range(self) -> float:
        return float(np.min(self.ranges)) if self.n_beams else NO_RETURN

    @classmethod
    def from_ranges(cls, ranges, stamp: float = 0.0) -> "ScanFrame":
        r = np.asarray(ranges, dtype=float)
        a = beam_angles(len(r))
        if a.size == 0:
            return cls(stamp, 0.0, 0.0, 0, r)
        return cls(stamp, float(a[0]), float(a[-1]), len(r), r)


def simulate_lidar(
    true_pose,
    world: WorldModel,
    n_beams: int = 360,
    rng=None,
    sigma: float = 0.0,
    stamp: float = 0.0,
    index: int = 0,
    max_range: float = MAX_RANGE,
) -> ScanFrame:
    x, y, heading = true_pose
    world.check_pose(true_pose)
    rel = beam_angles(n_beams)
    ranges = raycast(x, y, heading + rel, world.segments)
    ranges[ranges > max_range] = NO_RETURN
    if sigma > 0:
        noise = _as_rng(rng, index).normal(0.0, sigma, n_beams)
        hit = np.isfinite(ranges)
        ranges[hit] = np.clip(ranges[hit] + noise[hit], MIN_RANGE, max_range)
    return ScanFrame(stamp, float(rel[0]), float(rel[-1]), n_beams, ranges)


def simulate_gps(true_pose, world: WorldModel, rng=None, sigma: float = 0.8, index: int = 0):
    """Noisy (x, y) fix inside a GPS region, ``None`` elsewhere.

    With per-axis sigma 0.8 m the horizontal error is Rayleigh distributed
    and about 95.6 % of fixes land within 2 m.
    """
    x, y = true_pose[0], true_pose[1]
    if not world.gps_available(x, y):
        return None
    if sigma <= 0:
        return (float(x), float(y))
    n = _as_rng(rng, index).normal(0.0, sigma, 2)
    return (float(x + n[0]), float(y + n[1]))


def simulate_imu(
    true_heading: float,
    rng=None,
    t: float = 0.0,
    sigma_deg: float = 1.0,
    bias_drift_deg_per_s: float = 0.1,
    index: int = 0,
) -> float:
    """Heading with linearly accumulating bias and white noise, wrapped."""
    h = true_heading + math.radians(bias_drift_deg_per_s * t)
    if sigma_deg > 0:
        h += math.radians(sigma_deg) * float(_as_rng(rng, index).standard_normal())
    return wrap_angle(h)
