"""Kinematic ground truth for the simulated walker.

The walker is reduced to two thighs that run through the eight-phase gait
cycle in anti-phase.  Each thigh drives one traction rope whose length is
the only signal the device sees.  Heading changes come from stride
asymmetry: a step of leg ``i`` with stride ``s_i`` rotates the body by
``sign_i * (s_i - base_stride) / w_hip`` (right leg positive, i.e. a long
right stride turns the walker left).

Conventions
-----------
* phase fractions live in ``[0, 1)``; ``0`` is initial contact.
* one gait cycle is two steps, cadence is in steps per second.
* thigh angle is in radians, flexion positive.
* heading is counter-clockwise from +x, wrapped to ``(-pi, pi]``.
"""
from __future__ import annotations

import bisect
import enum
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import ModulationOutOfRange

TWO_PI = 2.0 * math.pi


def wrap_angle(a):
    """Wrap an angle (or array of angles) to ``(-pi, pi]``."""
    if isinstance(a, (float, int)):
        r = math.remainder(a, TWO_PI)
        return math.pi if r == -math.pi else r
    if np.ndim(a):
        r = np.remainder(np.asarray(a, dtype=float) + math.pi, TWO_PI) - math.pi
        return np.where(r == -math.pi, math.pi, r)
    r = math.remainder(a, TWO_PI)
    return math.pi if r == -math.pi else r


class Coarse(enum.Enum):
    STANCE = "Stance"
    SWING = "Swing"


class GaitPhase(enum.Enum):
    INITIAL_CONTACT = "InitialContact"
    LOADING_RESPONSE = "LoadingResponse"
    MID_STANCE = "MidStance"
    TERMINAL_STANCE = "TerminalStance"
    PRE_SWING = "PreSwing"
    INITIAL_SWING = "InitialSwing"
    MID_SWING = "MidSwing"
    TERMINAL_SWING = "TerminalSwing"

    @property
    def coarse(self) -> Coarse:
        return Coarse.SWING if self in _SWING_PHASES else Coarse.STANCE


_SWING_PHASES = frozenset(
    {GaitPhase.INITIAL_SWING, GaitPhase.MID_SWING, GaitPhase.TERMINAL_SWING}
)
_PHASE_ORDER = tuple(GaitPhase)

# Lower edges of the eight phases plus the closing 1.0.
PHASE_BOUNDARIES: tuple[float, ...] = (0.0, 0.02, 0.10, 0.30, 0.50, 0.60, 0.73, 0.87, 1.0)
SWING_START = PHASE_BOUNDARIES[5]


def phase_of(fraction: float, boundaries: Sequence[float] = PHASE_BOUNDARIES) -> GaitPhase:
    """Return the unique phase whose half-open interval contains ``fraction``."""
    if not 0.0 <= fraction < 1.0:
        raise ValueError(f"phase fraction {fraction!r} outside [0, 1)")
    return _PHASE_ORDER[bisect.bisect_right(boundaries, fraction) - 1]


@dataclass(frozen=True)
class ThighProfile:
    """Periodic thigh angle built by cosine interpolation between control points.

    Cosine blending gives zero slope at every control point, so the curve
    and its first derivative are continuous, including across the 1 -> 0 wrap
    (the first and last control values must match).
    """

    fractions: tuple[float, ...] = (0.0, 0.50, 0.75, 1.0)
    angles: tuple[float, ...] = (0.35, -0.17, 0.44, 0.35)

    def __post_init__(self):
        if len(self.fractions) != len(self.angles) or len(self.fractions) < 2:
            raise ValueError("need matching control fractions and angles")
        if self.fractions[0] != 0.0 or self.fractions[-1] != 1.0:
            raise ValueError("control fractions must span [0, 1]")
        if any(b <= a for a, b in zip(self.fractions, self.fractions[1:])):
            raise ValueError("control fractions must increase")
        if self.angles[0] != self.angles[-1]:
            raise ValueError("profile must be periodic")

    def __call__(self, f):
        if isinstance(f, float):
            return self._scalar(f)
        xs = np.asarray(self.fractions)
        ys = np.asarray(self.angles)
        f_arr = np.remainder(np.asarray(f, dtype=float), 1.0)
        k = np.clip(np.searchsorted(xs, f_arr, side="right") - 1, 0, len(xs) - 2)
        u = (f_arr - xs[k]) / (xs[k + 1] - xs[k])
        w = 0.5 * (1.0 - np.cos(math.pi * u))
        out = ys[k] + (ys[k + 1] - ys[k]) * w
        return float(out) if np.ndim(out) == 0 else out

    def _scalar(self, f: float) -> float:
        f %= 1.0
        xs, ys = self.fractions, self.angles
        k = min(bisect.bisect_right(xs, f) - 1, len(xs) - 2)
        w = 0.5 * (1.0 - math.cos(math.pi * (f - xs[k]) / (xs[k + 1] - xs[k])))
        return ys[k] + (ys[k + 1] - ys[k]) * w


DEFAULT_PROFILE = ThighProfile()


def thigh_angle_profile(phase_fraction, profile: ThighProfile = DEFAULT_PROFILE):
    return profile(phase_fraction)


def swing_bump(f, swing_start: float = SWING_START):
    """Smooth unit bump over the swing window, zero (with zero slope) at its edges."""
    if isinstance(f, float):
        u = (f - swing_start) / (1.0 - swing_start)
        return math.sin(math.pi * u) ** 2 if 0.0 <= u < 1.0 else 0.0
    f_arr = np.asarray(f, dtype=float)
    u = (f_arr - swing_start) / (1.0 - swing_start)
    out = np.where((u >= 0.0) & (u < 1.0), np.sin(math.pi * u) ** 2, 0.0)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class RopeGeometry:
    """Sagittal-plane rope geometry.

    ``l1`` points from the hip joint to the rope attachment on the thigh
    (hip frame, thigh hanging straight down at zero angle); ``l2`` points
    from the motor anchor to the hip joint (body frame).  x forward, y up.
    """

    l1: tuple[float, float] = (0.05, -0.20)
    l2: tuple[float, float] = (-0.12, -0.10)

    def __post_init__(self):
        if math.hypot(*self.l1) <= 0.0 or math.hypot(*self.l2) <= 0.0:
            raise ValueError("rope geometry vectors must be non-zero")


DEFAULT_GEOMETRY = RopeGeometry()


def rope_length(theta, geom: RopeGeometry = DEFAULT_GEOMETRY):
    """Length of ``R(theta) @ l1 + l2`` for scalar or array ``theta``."""
    if isinstance(theta, float):
        c, s = math.cos(theta), math.sin(theta)
        (ax, ay), (bx, by) = geom.l1, geom.l2
        return math.hypot(c * ax - s * ay + bx, s * ax + c * ay + by)
    c, s = np.cos(theta), np.sin(theta)
    (ax, ay), (bx, by) = geom.l1, geom.l2
    x = c * ax - s * ay + bx
    y = s * ax + c * ay + by
    out = np.hypot(x, y)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class LegState:
    phase_fraction: float
    thigh_angle: float
    stride_length: float
    phase: GaitPhase
    # stride modulation latched for the current swing, and the share of its
    # extra distance already travelled
    swing_mod: float = 0.0
    extra_done: float = 0.0


@dataclass(frozen=True)
class StepEvent:
    leg: str
    t: float
    stride: float
    dpsi: float


@dataclass(frozen=True)
class PedestrianState:
    position: tuple[float, float]
    heading: float
    left: LegState
    right: LegState
    cadence: float
    base_stride: float
    w_hip: float = 0.30
    t: float = 0.0
    steps: int = 0
    events: tuple[StepEvent, ...] = field(default=(), compare=False)

    @property
    def speed(self) -> float:
        return self.base_stride * self.cadence


def make_leg(
    fraction: float,
    stride: float,
    profile: ThighProfile = DEFAULT_PROFILE,
) -> LegState:
    f = fraction % 1.0
    return LegState(f, profile(f), stride, phase_of(f))


def initial_state(
    position=(0.0, 0.0),
    heading: float = 0.0,
    base_stride: float = 0.45,
    cadence: float | None = None,
    speed: float = 0.8,
    w_hip: float = 0.30,
    right_fraction: float = 0.0,
    profile: ThighProfile = DEFAULT_PROFILE,
) -> PedestrianState:
    """Walker with anti-phase legs; cadence defaults to ``speed / base_stride``."""
    if cadence is None:
        cadence = speed / base_stride
    if cadence <= 0 or base_stride <= 0 or w_hip <= 0:
        raise ValueError("cadence, base_stride and w_hip must be positive")
    return PedestrianState(
        position=(float(position[0]), float(position[1])),
        heading=wrap_angle(float(heading)),
        left=make_leg(right_fraction + 0.5, base_stride, profile),
        right=make_leg(right_fraction, base_stride, profile),
        cadence=float(cadence),
        base_stride=float(base_stride),
        w_hip=float(w_hip),
    )


def _advance_leg(leg, name, sign, mod, state, dt, dphase, swing_gain, profile):
    base = state.base_stride
    f = leg.phase_fraction
    latched = leg.swing_mod
    extra_done = leg.extra_done
    if f >= SWING_START and latched == 0.0 and mod != 0.0:
        latched = mod
    extra = 0.0
    if f >= SWING_START and latched != 0.0:
        target = base * latched
        rate = target * state.cadence / (2.0 * (1.0 - SWING_START))
        extra = rate * dt
        if abs(extra_done + extra) > abs(target):
            extra = target - extra_done
        extra_done += extra
    f_new = f + dphase
    event = None
    if f_new >= 1.0:
        stride = base * (1.0 + latched)
        extra += base * latched - extra_done
        dpsi = sign * (stride - base) / state.w_hip
        t_event = state.t + dt * (1.0 - f) / dphase
        event = StepEvent(name, t_event, stride, dpsi)
        f_new -= 1.0
        latched = 0.0
        extra_done = 0.0
        leg_stride = stride
    else:
        leg_stride = leg.stride_length
    theta = profile(f_new) + swing_gain * latched * swing_bump(f_new)
    new_leg = LegState(f_new, theta, leg_stride, phase_of(f_new), latched, extra_done)
    return new_leg, extra, event


def advance_gait(
    state: PedestrianState,
    dt: float,
    mod_left: float = 0.0,
    mod_right: float = 0.0,
    *,
    mod_max: float = 0.3,
    swing_gain: float = 0.6,
    profile: ThighProfile = DEFAULT_PROFILE,
) -> PedestrianState:
    """Advance the walker by ``dt`` seconds.

    A stride modulation only takes effect on a leg that is in swing; the
    first non-zero value seen during a swing is held until that leg's next
    initial contact, where the step event commits the stride and the
    heading change.  Forward travel runs at ``base_stride * cadence`` plus
    the extra length of any modulated stride, spread over its swing.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    for m in (mod_left, mod_right):
        if abs(m) > mod_max + 1e-12:
            raise ModulationOutOfRange(f"|{m}| exceeds mod_max={mod_max}")
    dphase = state.cadence * dt / 2.0
    left, extra_l, ev_l = _advance_leg(
        state.left, "left", -1.0, mod_left, state, dt, dphase, swing_gain, profile
    )
    right, extra_r, ev_r = _advance_leg(
        state.right, "right", 1.0, mod_right, state, dt, dphase, swing_gain, profile
    )
    dist = state.cadence * dt * state.base_stride + extra_l + extra_r
    x, y = state.position
    x += dist * math.cos(state.heading)
    y += dist * math.sin(state.heading)
    events = tuple(sorted((e for e in (ev_l, ev_r) if e is not None), key=lambda e: e.t))
    heading = state.heading
    for e in events:
        heading = wrap_angle(heading + e.dpsi)
    return replace(
        state,
        position=(x, y),
        heading=heading,
        left=left,
        right=right,
        t=state.t + dt,
        steps=state.steps + len(events),
        events=events,
    )


@dataclass(frozen=True)
class RopeSample:
    t: float
    left_len: float
    right_len: float


def _as_rng(rng, index: int = 0) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng([0 if rng is None else int(rng), int(index)])


def emit_rope_samples(
    state: PedestrianState,
    geom: RopeGeometry = DEFAULT_GEOMETRY,
    t: float | None = None,
    noise_sigma: float = 0.0,
    rng=None,
    index: int = 0,
) -> RopeSample:
    """Encoder reading of both rope lengths.

    ``rng`` is either a Generator (consumed sequentially) or an integer
    seed, in which case the noise is keyed on ``(seed, index)``.
    """
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be non-negative")
    left = rope_length(state.left.thigh_angle, geom)
    right = rope_length(state.right.thigh_angle, geom)
    if noise_sigma > 0:
        n = _as_rng(rng, index).normal(0.0, noise_sigma, 2)
        left += n[0]
        right += n[1]
    return RopeSample(state.t if t is None else t, float(left), float(right))


def simulate_walk(
    state: PedestrianState,
    n_ticks: int,
    dt: float = 0.01,
    geom: RopeGeometry = DEFAULT_GEOMETRY,
    noise_sigma: float = 0.0,
    seed: int = 0,
    mod_left: float = 0.0,
    mod_right: float = 0.0,
):
    """Run the walker open-loop and collect rope samples plus ground truth.

    Returns ``(samples, states)``: the rope sample taken at each tick
    (before advancing) and the matching true states.
    """
    rng = np.random.default_rng(seed)
    samples, states = [], []
    for _ in range(n_ticks):
        samples.append(emit_rope_samples(state, geom, noise_sigma=noise_sigma, rng=rng))
        states.append(state)
        state = advance_gait(state, dt, mod_left, mod_right)
    return samples, states
