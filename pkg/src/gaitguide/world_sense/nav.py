"""Pose belief: pedometer dead reckoning, GPS blending and mode switching."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

from ..gait_model import wrap_angle
from ..gait_sense import GaitEstimate

MODE_HYSTERESIS = 5
GPS_GAIN = 0.2


class Mode(enum.Enum):
    OUTDOOR_GPS = "OutdoorGps"
    INDOOR_SLAM = "IndoorSlam"


@dataclass(frozen=True)
class NavEstimate:
    mode: Mode = Mode.INDOOR_SLAM
    pose_hat: tuple[float, float, float] = (0.0, 0.0, 0.0)
    confidence: float = 0.0
    step_count_used: int = 0
    fix_streak: int = 0
    miss_streak: int = 0

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must lie in [0, 1]")


def dead_reckon(nav: NavEstimate, gait: GaitEstimate, heading_hat: float) -> NavEstimate:
    """Advance ``pose_hat`` by one stride along ``heading_hat`` per new step.

    Per-step strides from ``gait.new_steps`` are used when they account for
    every new step; otherwise each step counts ``gait.stride_hat``.
    """
    n_new = gait.step_count - nav.step_count_used
    if n_new < 0:
        raise ValueError("gait step count went backwards")
    x, y, _ = nav.pose_hat
    if n_new == 0:
        return replace(nav, pose_hat=(x, y, wrap_angle(heading_hat)))
    if len(gait.new_steps) == n_new:
        dist = math.fsum(s.stride for s in gait.new_steps)
    else:
        dist = n_new * gait.stride_hat
    c, s = math.cos(heading_hat), math.sin(heading_hat)
    return replace(
        nav,
        pose_hat=(x + dist * c, y + dist * s, wrap_angle(heading_hat)),
        step_count_used=gait.step_count,
    )


def mode_switch(nav: NavEstimate, gps_fix_present: bool, hysteresis: int = MODE_HYSTERESIS) -> NavEstimate:
    """Count consecutive fix / no-fix ticks and switch mode after ``hysteresis``."""
    if gps_fix_present:
        fix, miss = nav.fix_streak + 1, 0
    else:
        fix, miss = 0, nav.miss_streak + 1
    mode = nav.mode
    if mode is Mode.INDOOR_SLAM and fix >= hysteresis:
        mode = Mode.OUTDOOR_GPS
    elif mode is Mode.OUTDOOR_GPS and miss >= hysteresis:
        mode = Mode.INDOOR_SLAM
    return replace(nav, mode=mode, fix_streak=fix, miss_streak=miss)


def fuse_gps(nav: NavEstimate, fix, gain: float = GPS_GAIN) -> NavEstimate:
    """Fixed-gain complementary blend of a GPS fix into the position."""
    if fix is None:
        return nav
    if not 0.0 <= gain <= 1.0:
        raise ValueError("gain must lie in [0, 1]")
    x, y, h = nav.pose_hat
    return replace(nav, pose_hat=(gain * fix[0] + (1 - gain) * x, gain * fix[1] + (1 - gain) * y, h))
