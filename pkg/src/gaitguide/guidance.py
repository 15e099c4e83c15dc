"""Gait-based steering controller.

Proportional heading control with saturation, expressed as stride
modulation.  A positive heading error (target to the left) lengthens the
right (outer) stride; with ``assist_inner`` the left (inner) stride is also
shortened during its own swing, so every step contributes to the turn.
Modulation is only ever issued while the recogniser places that leg inside
its swing window, and it is held for the rest of that swing.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .gait_model import SWING_START, Coarse, wrap_angle
from .gait_sense import GaitEstimate, LegEstimate

LEGS = ("left", "right")


class Tension(enum.Enum):
    RELAXED = "Relaxed"
    DAMPED = "Damped"
    ASSIST = "Assist"


class Audio(enum.Enum):
    NONE = "None"
    TURN_LEFT = "TurnLeft"
    TURN_RIGHT = "TurnRight"
    OBSTACLE = "Obstacle"


@dataclass(frozen=True)
class ControllerConfig:
    kp: float = 0.8
    deadband: float = math.radians(2.0)
    audio_threshold: float = math.radians(45.0)
    mod_max: float = 0.3
    assist_inner: bool = True
    # keep clear of the estimated swing edges by this many cycle fractions
    edge_margin: float = 0.02

    def __post_init__(self):
        if min(self.kp, self.deadband, self.audio_threshold, self.mod_max) <= 0:
            raise ValueError("controller parameters must be positive")
        if not self.deadband < self.audio_threshold:
            raise ValueError("deadband must be below the audio threshold")


@dataclass(frozen=True)
class GuidanceCommand:
    left_tension: Tension = Tension.RELAXED
    right_tension: Tension = Tension.RELAXED
    left_mod: float = 0.0
    right_mod: float = 0.0
    audio: Audio = Audio.NONE
    left_pending: bool = False
    right_pending: bool = False

    def __post_init__(self):
        for mod, tension in ((self.left_mod, self.left_tension), (self.right_mod, self.right_tension)):
            if mod != 0.0 and tension is not Tension.ASSIST:
                raise ValueError("non-zero modulation requires Assist tension")
        if self.left_tension is Tension.ASSIST and self.right_tension is Tension.ASSIST:
            raise ValueError("only one leg may be assisted at a time")

    def mod(self, leg: str) -> float:
        return self.left_mod if leg == "left" else self.right_mod


RELAXED = GuidanceCommand()


def in_swing_window(leg: LegEstimate, cfg: ControllerConfig) -> bool:
    if leg.phase is not Coarse.SWING or leg.phase_hat is None:
        return False
    return SWING_START + cfg.edge_margin <= leg.phase_hat <= 1.0 - cfg.edge_margin


def _audio_for(error: float, cfg: ControllerConfig) -> Audio:
    if error > cfg.audio_threshold:
        return Audio.TURN_LEFT
    if error < -cfg.audio_threshold:
        return Audio.TURN_RIGHT
    return Audio.NONE


def steering_update(cfg: ControllerConfig, heading_error: float, gait: GaitEstimate) -> GuidanceCommand:
    """One controller evaluation, without any hold across ticks."""
    e = heading_error
    if abs(e) <= cfg.deadband:
        return RELAXED
    u = max(-cfg.mod_max, min(cfg.mod_max, cfg.kp * e))
    desired = {"right": u, "left": -u}
    outer = "right" if e > 0 else "left"
    inner = "left" if outer == "right" else "right"
    candidates = (outer, inner) if cfg.assist_inner else (outer,)
    mods = {"left": 0.0, "right": 0.0}
    tension = {"left": Tension.DAMPED, "right": Tension.DAMPED}
    pending = {"left": False, "right": False}
    assisted = False
    for name in candidates:
        if not assisted and in_swing_window(gait.leg(name), cfg):
            mods[name] = desired[name]
            tension[name] = Tension.ASSIST
            assisted = True
        else:
            pending[name] = True
    return GuidanceCommand(
        tension["left"], tension["right"], mods["left"], mods["right"],
        _audio_for(e, cfg), pending["left"], pending["right"],
    )


def straight_walk_regulator(
    cfg: ControllerConfig, imu_heading: float, reference: float, gait: GaitEstimate
) -> GuidanceCommand:
    return steering_update(cfg, wrap_angle(reference - imu_heading), gait)


class SteeringController:
    """Closed-loop steering with a per-leg zero-order hold across each swing.

    ``audio_onsets`` counts the one-shot turn cues raised when the error
    first exceeds the audio threshold.
    """

    def __init__(self, cfg: ControllerConfig | None = None):
        self.cfg = cfg or ControllerConfig()
        self._held = {"left": 0.0, "right": 0.0}
        self._last_audio = Audio.NONE
        self.audio_onsets = 0

    def update(self, heading_error: float, gait: GaitEstimate) -> GuidanceCommand:
        cfg = self.cfg
        cmd = steering_update(cfg, heading_error, gait)
        for name in LEGS:
            if not in_swing_window(gait.leg(name), cfg):
                self._held[name] = 0.0
            elif self._held[name] == 0.0 and cmd.mod(name) != 0.0:
                other = "right" if name == "left" else "left"
                if self._held[other] == 0.0:
                    self._held[name] = cmd.mod(name)
        if cmd.audio is not Audio.NONE and cmd.audio is not self._last_audio:
            self.audio_onsets += 1
        self._last_audio = cmd.audio

        if self._held["left"] == 0.0 and self._held["right"] == 0.0:
            if cmd.left_mod == 0.0 and cmd.right_mod == 0.0:
                return cmd
        tension = {}
        for name in LEGS:
            tension[name] = Tension.ASSIST if self._held[name] != 0.0 else Tension.DAMPED
        return GuidanceCommand(
            tension["left"], tension["right"], self._held["left"], self._held["right"],
            cmd.audio, cmd.left_pending, cmd.right_pending,
        )

    def straight(self, imu_heading: float, reference: float, gait: GaitEstimate) -> GuidanceCommand:
        return self.update(wrap_angle(reference - imu_heading), gait)
