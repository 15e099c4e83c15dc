"""Device-side gait recognition from the two rope-length channels.

Each channel is processed independently:

1. A hysteresis detector on the rope shortening, measured from the
   longest length in a sliding window and normalised by the window's
   peak-to-peak range, separates flexion episodes ("raw swing") from
   extension episodes ("raw stance").  Stride modulation only reshapes
   the swing, so the extension peaks stay intact.
2. The longest rope length inside each raw-stance interval marks peak thigh
   extension, which the gait template places at a fixed cycle fraction.
   Its time is refined to sub-sample precision with a three-point parabola.
3. Those anchors drive a phase clock per leg.  The coarse stance/swing
   label and the step event (initial contact) are read off the clock,
   so a step is timestamped at ``anchor + (1 - anchor_phase) * T``.

Step intervals come from consecutive anchors of either leg, smoothed with
an exponentially weighted mean.  The first second of samples is buffered to
establish the signal range and then replayed, so early steps are kept,
except a contact within ``start_guard`` of the first sample, whose timing
cannot be told apart from the stream start.  Anchors are also the
pedometer's stride source: the excursion between peak extension and peak
flexion is converted to a thigh swing amplitude through the rope geometry.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from .errors import NonMonotonicTime, NotCalibrated
from .gait_model import DEFAULT_GEOMETRY, SWING_START, Coarse, RopeGeometry, RopeSample, rope_length


@dataclass(frozen=True)
class RecognizerConfig:
    rate_hz: float = 100.0
    h_hi: float = 0.30
    h_lo: float = 0.15
    window_s: float = 3.0
    baseline_s: float = 1.0
    min_excursion: float = 0.01
    anchor_phase: float = 0.50  # peak extension in the default thigh profile
    swing_start: float = SWING_START
    interval_alpha: float = 0.25
    default_stride: float = 0.45
    start_guard: float = 0.10  # cycle fraction after the first sample


@dataclass(frozen=True)
class LegEstimate:
    phase: Coarse = Coarse.STANCE
    last_step_time: float | None = None
    step_count: int = 0
    phase_hat: float | None = None  # estimated cycle fraction, None until locked


@dataclass(frozen=True)
class StepRecord:
    leg: str
    t: float
    stride: float


@dataclass(frozen=True)
class GaitEstimate:
    left: LegEstimate = LegEstimate()
    right: LegEstimate = LegEstimate()
    cadence_hat: float = 0.0
    stride_hat: float = 0.45
    step_count: int = 0
    new_steps: tuple[StepRecord, ...] = ()

    def leg(self, name: str) -> LegEstimate:
        return self.left if name == "left" else self.right


class _RunningExtreme:
    """Sliding-window max (or min) over timestamped samples."""

    def __init__(self, window: float, sign: float):
        self.window = window
        self.sign = sign
        self.q: deque[tuple[float, float]] = deque()

    def push(self, t: float, v: float) -> None:
        s = self.sign * v
        q = self.q
        while q and self.sign * q[-1][1] <= s:
            q.pop()
        q.append((t, v))
        while q[0][0] < t - self.window:
            q.popleft()

    @property
    def value(self) -> float:
        return self.q[0][1]


@dataclass
class _Leg:
    name: str
    cfg: RecognizerConfig
    raw: Coarse = Coarse.STANCE
    hi: _RunningExtreme | None = None
    lo: _RunningExtreme | None = None
    # three samples bracketing the largest length in the current raw stance
    peak: tuple | None = None
    prev: tuple[float, float] | None = None
    anchor_t: float | None = None
    anchor_len: float = 0.0
    flex_min: float = math.inf
    pending: tuple[float, float] | None = None  # (anchor time, extension length)
    backfill: float | None = None  # first anchor, used to recover the step before it
    overdue: list = field(default_factory=list)  # (anchor time, raw stride) not yet emitted
    step_count: int = 0
    last_step_time: float | None = None

    def __post_init__(self):
        self.hi = _RunningExtreme(self.cfg.window_s, 1.0)
        self.lo = _RunningExtreme(self.cfg.window_s, -1.0)


def _parabola_vertex(p0, p1, p2) -> float:
    (t0, y0), (t1, y1), (t2, y2) = p0, p1, p2
    denom = y0 - 2.0 * y1 + y2
    if denom == 0.0:
        return t1
    h = 0.5 * (t2 - t0)
    return t1 + 0.5 * h * (y0 - y2) / denom


@dataclass
class Recognizer:
    """Streaming stance/swing recogniser and pedometer for both legs."""

    cfg: RecognizerConfig = field(default_factory=RecognizerConfig)
    geom: RopeGeometry = DEFAULT_GEOMETRY
    calibration: float | None = None

    def __post_init__(self):
        self.legs = {n: _Leg(n, self.cfg) for n in ("left", "right")}
        self._buffer: list[RopeSample] | None = []
        self._buffer_ptp = {"left": 0.0, "right": 0.0}
        self._buffer_max = {"left": -math.inf, "right": -math.inf}
        self._replaying = False
        self.last_t: float | None = None
        self.t0: float | None = None
        self.interval: float | None = None  # smoothed step interval (s)
        self._last_anchor: float | None = None
        self.total_steps = 0
        self.raw_strides: list[tuple[str, float, float]] = []  # (leg, t, raw stride)
        self._estimate = GaitEstimate(stride_hat=self.cfg.default_stride)
        # suspended stretches: samples are skipped and the internal clock
        # ("walking time") excludes them
        self._hold_until = -math.inf
        self._offset = 0.0
        self._breaks: list[tuple[float, float]] = []  # (walking time, offset after it)
        self._last_tau: float | None = None

    # ------------------------------------------------------------------
    @property
    def ready(self) -> bool:
        """True once the baseline buffer has been replayed."""
        return self._buffer is None

    @property
    def cycle_period(self) -> float | None:
        return None if self.interval is None else 2.0 * self.interval

    def ingest(self, sample: RopeSample) -> GaitEstimate:
        if self.last_t is not None and not sample.t > self.last_t:
            raise NonMonotonicTime(f"t={sample.t} after t={self.last_t}")
        self.last_t = sample.t
        if sample.t < self._hold_until:
            return self._quiet()
        tau = sample.t - self._offset
        if self._last_tau is not None and tau <= self._last_tau + 0.5 / self.cfg.rate_hz:
            # the still posture seen again as the walker restarts
            return self._quiet()
        self._last_tau = tau
        if self._offset:
            sample = RopeSample(tau, sample.left_len, sample.right_len)
        if self.t0 is None:
            self.t0 = sample.t
        if self._buffer is not None:
            self._buffer.append(sample)
            if sample.t - self.t0 < self.cfg.baseline_s:
                return self._estimate
            self._start_from_buffer()
            self._estimate = self._to_real(self._estimate)
            return self._estimate
        self._estimate = self._to_real(self._process(sample))
        return self._estimate

    def _start_from_buffer(self) -> None:
        buf, self._buffer = self._buffer, None
        for name in ("left", "right"):
            vals = np.array([getattr(s, f"{name}_len") for s in buf])
            self._buffer_max[name] = float(vals.max())
            self._buffer_ptp[name] = float(np.ptp(vals))
        self._replaying = True
        new_steps: list[StepRecord] = []
        for s in buf:
            est = self._process(s)
            new_steps.extend(est.new_steps)
        self._replaying = False
        self._estimate = GaitEstimate(
            left=est.left,
            right=est.right,
            cadence_hat=est.cadence_hat,
            stride_hat=est.stride_hat,
            step_count=est.step_count,
            new_steps=tuple(new_steps),
        )

    # ------------------------------------------------------------------
    def _process(self, s: RopeSample) -> GaitEstimate:
        new_steps = []
        for name in ("left", "right"):
            leg = self.legs[name]
            self._update_leg(leg, s.t, getattr(s, f"{name}_len"))
        for name in ("left", "right"):
            new_steps.extend(self._maybe_step(self.legs[name], s.t))
        new_steps.sort(key=lambda r: r.t)
        return GaitEstimate(
            left=self._leg_estimate(self.legs["left"], s.t),
            right=self._leg_estimate(self.legs["right"], s.t),
            cadence_hat=self.cadence_hat,
            stride_hat=self._latest_stride(),
            step_count=self.total_steps,
            new_steps=tuple(new_steps),
        )

    def _update_leg(self, leg: _Leg, t: float, length: float) -> None:
        cfg = self.cfg
        leg.hi.push(t, length)
        leg.lo.push(t, length)
        hi = leg.hi.value
        ptp = hi - leg.lo.value
        if self._replaying:
            hi = max(hi, self._buffer_max[leg.name])
            ptp = max(ptp, self._buffer_ptp[leg.name])
        ptp = max(ptp, cfg.min_excursion)
        dev = (hi - length) / ptp
        if leg.anchor_t is not None:
            leg.flex_min = min(leg.flex_min, length)

        if leg.raw is Coarse.STANCE:
            if dev > cfg.h_hi:
                leg.raw = Coarse.SWING
                self._close_stance(leg)
            else:
                self._track_peak(leg, t, length)
        elif dev < cfg.h_lo:
            leg.raw = Coarse.STANCE
            leg.peak = None
            leg.prev = None
            self._track_peak(leg, t, length)
        leg.prev = (t, length) if leg.raw is Coarse.STANCE else None

    def _track_peak(self, leg: _Leg, t: float, length: float) -> None:
        pk = leg.peak
        if pk is None or length > pk[1][1]:
            leg.peak = (leg.prev, (t, length), None)
        elif pk[2] is None:
            leg.peak = (pk[0], pk[1], (t, length))

    def _close_stance(self, leg: _Leg) -> None:
        pk = leg.peak
        leg.peak = None
        if pk is None or pk[0] is None or pk[2] is None:
            return
        t_anchor = _parabola_vertex(*pk)
        # an unemitted step from the previous cycle (period still unknown) is dropped
        if leg.anchor_t is None:
            leg.backfill = t_anchor
        if leg.pending is not None:
            # the cycle ran long (e.g. the walker stopped): the step is overdue
            a_t, ext = leg.pending
            leg.overdue.append((a_t, self._raw_stride(ext, leg.flex_min)))
            leg.pending = None
        leg.anchor_t = t_anchor
        leg.anchor_len = pk[1][1]
        leg.flex_min = math.inf
        leg.pending = (t_anchor, pk[1][1])
        if self._last_anchor is not None:
            dt = t_anchor - self._last_anchor
            if self.interval is None:
                self.interval = dt
            elif 0.25 * self.interval < dt < 1.6 * self.interval:  # skip pauses
                a = self.cfg.interval_alpha
                self.interval = (1.0 - a) * self.interval + a * dt
        if self._last_anchor is None or t_anchor > self._last_anchor:
            self._last_anchor = t_anchor

    def _maybe_step(self, leg: _Leg, t: float) -> list[StepRecord]:
        if self.interval is None:
            return []
        out = []
        if leg.backfill is not None:
            # the walker was already mid-stride when the stream began; a
            # contact within the timing error of the first sample is the
            # posture the stream started in, not a step
            t_prev = leg.backfill - self.cfg.anchor_phase * 2.0 * self.interval
            leg.backfill = None
            if t_prev > self.t0 + self.cfg.start_guard * 2.0 * self.interval:
                out.append(self._emit(leg, t_prev, float("nan")))
        for a_t, raw in leg.overdue:
            out.append(self._emit(leg, min(t, a_t + (1.0 - self.cfg.anchor_phase) * 2.0 * self.interval), raw))
        leg.overdue.clear()
        if leg.pending is None:
            return out
        anchor_t, ext_len = leg.pending
        t_step = anchor_t + (1.0 - self.cfg.anchor_phase) * 2.0 * self.interval
        if t < t_step:
            return out
        leg.pending = None
        out.append(self._emit(leg, t_step, self._raw_stride(ext_len, leg.flex_min)))
        return out

    def _emit(self, leg: _Leg, t_step: float, raw: float) -> StepRecord:
        leg.step_count += 1
        leg.last_step_time = t_step
        self.total_steps += 1
        if math.isfinite(raw):
            self.raw_strides.append((leg.name, t_step, raw))
        return StepRecord(leg.name, t_step, self._scale(raw))

    def _leg_estimate(self, leg: _Leg, t: float) -> LegEstimate:
        phase_hat = None
        phase = leg.raw
        T = self.cycle_period
        if leg.anchor_t is not None and T is not None and t - leg.anchor_t < 1.5 * T:
            phase_hat = (self.cfg.anchor_phase + (t - leg.anchor_t) / T) % 1.0
            phase = Coarse.SWING if self.cfg.swing_start <= phase_hat < 1.0 else Coarse.STANCE
        return LegEstimate(phase, leg.last_step_time, leg.step_count, phase_hat)

    def suspend(self, t: float, duration: float) -> None:
        """Stop the clock for ``duration`` seconds from ``t``.

        For halts the device itself calls (the obstacle cue): samples until
        ``t + duration`` are ignored and the phase clocks resume where they
        stopped, so no step is predicted while the legs are still.
        """
        if duration <= 0:
            return
        tau = t - self._offset
        self._offset += duration
        self._hold_until = max(self._hold_until, t + duration)
        self._breaks.append((tau, self._offset))

    def _real(self, tau: float | None) -> float | None:
        """Map walking time back to stream time."""
        if tau is None or not self._breaks:
            return tau
        off = 0.0
        for b_tau, b_off in self._breaks:
            if tau >= b_tau:
                off = b_off
            else:
                break
        return tau + off

    def _quiet(self) -> GaitEstimate:
        e = self._estimate
        return e if not e.new_steps else replace(e, new_steps=())

    def _to_real(self, est: GaitEstimate) -> GaitEstimate:
        if not self._breaks:
            return est
        return replace(
            est,
            left=replace(est.left, last_step_time=self._real(est.left.last_step_time)),
            right=replace(est.right, last_step_time=self._real(est.right.last_step_time)),
            new_steps=tuple(replace(r, t=self._real(r.t)) for r in est.new_steps),
        )

    # ------------------------------------------------------------------
    @property
    def cadence_hat(self) -> float:
        if self.total_steps < 2 or self.interval is None:
            return 0.0
        return 1.0 / self.interval

    @property
    def estimate(self) -> GaitEstimate:
        return self._estimate

    def _raw_stride(self, ext_len: float, flex_len: float) -> float:
        if not math.isfinite(flex_len):
            return float("nan")
        amp = theta_from_length(flex_len, self.geom) - theta_from_length(ext_len, self.geom)
        return 2.0 * math.hypot(*self.geom.l1) * math.sin(abs(amp) / 2.0)

    def _scale(self, raw: float) -> float:
        if self.calibration is None or not math.isfinite(raw):
            return self.cfg.default_stride
        return self.calibration * raw

    def _latest_stride(self) -> float:
        if not self.raw_strides:
            return self.cfg.default_stride
        return self._scale(self.raw_strides[-1][2])

    def calibrate(self, known_stride: float, n_steps: int = 4) -> float:
        """Fit the stride scale so the last ``n_steps`` average ``known_stride``."""
        raws = [r for _, _, r in self.raw_strides[-n_steps:] if math.isfinite(r)]
        if not raws:
            raise NotCalibrated("no completed steps to calibrate on")
        self.calibration = known_stride / float(np.mean(raws))
        return self.calibration


def theta_from_length(length: float, geom: RopeGeometry = DEFAULT_GEOMETRY) -> float:
    """Invert ``rope_length`` on the branch that contains ``theta = 0``."""
    (ax, ay), (bx, by) = geom.l1, geom.l2
    # rope is shortest when R(theta) l1 points along -l2
    theta_short = math.atan2(-by, -bx) - math.atan2(ay, ax)
    theta_short = math.remainder(theta_short, 2 * math.pi)
    if theta_short <= 0.0:
        theta_short += 2 * math.pi
    lo, hi = theta_short - math.pi + 1e-9, theta_short - 1e-9
    f_lo, f_hi = rope_length(lo, geom) - length, rope_length(hi, geom) - length
    if f_lo <= 0.0:
        return lo
    if f_hi >= 0.0:
        return hi
    return brentq(lambda th: rope_length(th, geom) - length, lo, hi, xtol=1e-12)


def ingest(recognizer: Recognizer, sample: RopeSample) -> tuple[Recognizer, GaitEstimate]:
    """Functional form of :meth:`Recognizer.ingest` (mutates and returns the recogniser)."""
    est = recognizer.ingest(sample)
    return recognizer, est


def estimate_stride(
    recognizer: Recognizer, geom: RopeGeometry | None = None, strict: bool = False
) -> float:
    """Latest per-step stride estimate in metres.

    Falls back to the configured default stride when no step has completed
    or no calibration is set, unless ``strict`` is true.
    """
    if geom is not None and geom != recognizer.geom:
        recognizer = _with_geometry(recognizer, geom)
    if not recognizer.raw_strides:
        if strict:
            raise NotCalibrated("no completed steps")
        return recognizer.cfg.default_stride
    if recognizer.calibration is None:
        if strict:
            raise NotCalibrated("stride scale not calibrated")
        return recognizer.cfg.default_stride
    return recognizer._latest_stride()


def _with_geometry(rec: Recognizer, geom: RopeGeometry) -> Recognizer:
    clone = Recognizer(rec.cfg, geom, rec.calibration)
    clone.raw_strides = list(rec.raw_strides)
    return clone


def read_rope_csv(path) -> list[RopeSample]:
    """Load a replay stream with columns ``t,left_len,right_len``."""
    data = np.genfromtxt(path, delimiter=",", names=True)
    missing = {"t", "left_len", "right_len"} - set(data.dtype.names or ())
    if missing:
        raise ValueError(f"rope CSV missing columns: {sorted(missing)}")
    return [RopeSample(float(r["t"]), float(r["left_len"]), float(r["right_len"])) for r in np.atleast_1d(data)]
