"""Fixed-step closed-loop simulation of one scenario.

Per tick (100 Hz by default): the true walker emits rope samples, the
recogniser updates its gait estimate, the IMU heading is filtered, the
navigation belief is updated (pedometer, GPS, LIDAR mapping and scan
matching), the planner proposes a heading, and the walker model turns
that into stride modulation that feeds back into the gait.

Three walkers share the same world, seed and gait kinematics:

* ``Guided``: the device closes the loop through stride modulation.
* ``AudioOnly``: the device only speaks every ``cue_period`` seconds; the
  person then turns by the announced error plus execution noise, open
  loop, using their own stride asymmetry.
* ``CaneContact``: a cane user who knows the route, walks slower near
  walls and stops briefly whenever the cane touches something ahead.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from ..errors import GoalBlocked, NoPath, PathExhausted, PoseOutOfBounds, StartBlocked, TimedOut
from ..gait_model import (
    DEFAULT_GEOMETRY,
    SWING_START,
    PedestrianState,
    advance_gait,
    emit_rope_samples,
    initial_state,
    wrap_angle,
)
from ..gait_sense import GaitEstimate, Recognizer
from ..guidance import RELAXED, Audio, GuidanceCommand, SteeringController
from ..planner import (
    Blocked,
    PlannedPath,
    WaypointFollower,
    avoid_obstacles,
    clearance_mask,
    path_blocked,
    path_length,
    plan_path,
)
from ..world_sense.grid import OccupancyGrid, localize, rasterize_segments, update_occupancy
from ..world_sense.nav import Mode, NavEstimate, dead_reckon, fuse_gps, mode_switch
from ..world_sense.sensors import ScanFrame, simulate_gps, simulate_imu, simulate_lidar
from ..world_sense.world import distance_to_segments, raycast
from .scenario import HEADING_KINDS, Kind, ScenarioConfig, Walker
from .trace import RunMetrics, Trace, compute_metrics, fmt, fmt_meta

# independent random streams, keyed with the scenario seed
_ROPE, _IMU, _LIDAR, _GPS, _VEER, _EXEC = range(1, 7)
LATE_SWING = 0.9


class HeadingFilter:
    """Step-synchronous circular mean of the IMU heading.

    The walker's heading only changes at initial contacts, so samples taken
    since the last estimated step (after a short guard interval that covers
    step-timing error) all measure the same heading.
    """

    def __init__(self, dt: float, guard: float = 0.05, window: float = 1.0):
        self.guard = guard
        self.maxlen = max(1, int(round(window / dt)))
        self.buf: deque[tuple[float, float]] = deque()
        self.sum_s = 0.0
        self.sum_c = 0.0
        self.since = -math.inf
        self.value: float | None = None

    def restart(self, t: float) -> None:
        """Forget samples before ``t`` (plus the guard), e.g. after a known turn."""
        if t + self.guard > self.since:
            self.since = t + self.guard
            self.buf.clear()
            self.sum_s = self.sum_c = 0.0

    def update(self, t: float, imu: float, new_step_times=()) -> float:
        for ts in new_step_times:
            self.restart(ts)
        if t >= self.since:
            sc = (math.sin(imu), math.cos(imu))
            self.buf.append(sc)
            self.sum_s += sc[0]
            self.sum_c += sc[1]
            if len(self.buf) > self.maxlen:
                old = self.buf.popleft()
                self.sum_s -= old[0]
                self.sum_c -= old[1]
        if self.buf:
            self.value = math.atan2(self.sum_s, self.sum_c)
        elif self.value is None:
            self.value = imu
        return self.value


@dataclass
class _AudioPlan:
    remaining: float = 0.0
    pending: float = 0.0
    next_cue: float = 0.0


def _target_heading(cfg: ScenarioConfig, t: float) -> float:
    h0 = cfg.task.start[2]
    if cfg.kind in (Kind.TURN90, Kind.STEER_TO_ANGLE) and t >= cfg.task.onset - 1e-9:
        return wrap_angle(h0 + cfg.task.target)
    return wrap_angle(h0)


def _dpsi_for(leg: str, mod: float, st: PedestrianState) -> float:
    sign = 1.0 if leg == "right" else -1.0
    return sign * st.base_stride * mod / st.w_hip


def _human_mod(leg: str, turn: float, st: PedestrianState, mod_max: float) -> float:
    """Stride change a person chooses on ``leg`` to turn by ``turn`` radians."""
    sign = 1.0 if leg == "right" else -1.0
    return float(np.clip(sign * turn * st.w_hip / st.base_stride, -mod_max, mod_max))


def _pivot_heading(scan: ScanFrame, heading: float, desired: float) -> float:
    """Bearing of the most open direction, preferring the desired side."""
    r = np.minimum(np.where(np.isfinite(scan.ranges), scan.ranges, 30.0), 3.0)
    absolute = heading + scan.angles
    score = r - 0.2 * np.abs(wrap_angle(absolute - desired))
    return float(wrap_angle(absolute[int(np.argmax(score))]))


def _true_route(cfg: ScenarioConfig) -> PlannedPath | None:
    """Route known to the cane user (and the fallback for heading-free plans)."""
    if cfg.task.waypoints:
        wps = (tuple(cfg.task.start[:2]),) + tuple(cfg.task.waypoints)
        return PlannedPath(wps, path_length(wps))
    if cfg.task.goal is None:
        return None
    grid = OccupancyGrid.covering(cfg.world.bounds, cfg.perception.resolution, margin=0.5 * cfg.perception.resolution)
    grid.log_odds[rasterize_segments(grid, cfg.world.segments)] = 5.0
    try:
        return plan_path(grid, cfg.task.start, cfg.task.goal, cfg.planner.inflation)
    except (NoPath, PoseOutOfBounds):
        wps = (tuple(cfg.task.start[:2]), tuple(cfg.task.goal))
        return PlannedPath(wps, path_length(wps))


def _shift(nav: NavEstimate, dx: float, dy: float) -> NavEstimate:
    x, y, h = nav.pose_hat
    return replace(nav, pose_hat=(x + dx, y + dy, h))


def _unshift(nav: NavEstimate, dx: float, dy: float) -> NavEstimate:
    return _shift(nav, -dx, -dy)


def _meta(cfg: ScenarioConfig) -> dict[str, str]:
    task = cfg.task
    m = {
        "format": "gaitguide-trace v1",
        "name": cfg.name,
        "kind": cfg.kind.value,
        "walker": cfg.walker.value,
        "seed": str(cfg.seed),
        "dt": fmt_meta(cfg.dt),
        "duration": fmt_meta(cfg.duration),
        "onset": fmt_meta(task.onset),
        "tolerance": fmt_meta(task.tolerance),
        "collision_range": fmt_meta(cfg.planner.collision_range),
        "start": " ".join(fmt_meta(v) for v in task.start),
        "ref_line": " ".join(fmt_meta(v) for v in task.start),
    }
    if cfg.kind in HEADING_KINDS:
        m["target_heading"] = fmt_meta(_target_heading(cfg, math.inf))
    if task.goal is not None:
        m["goal"] = " ".join(fmt_meta(v) for v in task.goal)
        sx, sy = task.start[:2]
        gx, gy = task.goal
        m["ref_line"] = " ".join(fmt_meta(v) for v in (sx, sy, math.atan2(gy - sy, gx - sx)))
    m["world"] = ";".join(" ".join(fmt_meta(v) for v in s) for s in cfg.world.segments)
    return m


class _Sim:
    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        p = cfg.pedestrian
        x, y, h = cfg.task.start
        self.st = initial_state((x, y), h, p.base_stride, speed=p.speed, w_hip=p.w_hip, right_fraction=p.right_fraction)
        self.rngs = {k: np.random.default_rng([int(cfg.seed), k]) for k in (_ROPE, _IMU, _LIDAR, _GPS, _VEER, _EXEC)}
        self.rec = Recognizer()
        self.ctl = SteeringController(cfg.controller)
        self.hfilter = HeadingFilter(cfg.dt)
        self.nav = NavEstimate(mode=cfg.task.initial_mode, pose_hat=tuple(cfg.task.start))
        self.pose_now = self.nav.pose_hat
        self.has_lidar = len(cfg.world.segments) > 0
        self.scan: ScanFrame | None = None
        self.min_range = math.inf
        self.grid = None
        self.slam_used = False
        self.path: PlannedPath | None = None
        self.follower: WaypointFollower | None = None
        self.last_plan = -math.inf
        self.paused_until = -math.inf
        self.cooldown_until = -math.inf
        self.audio_plan = _AudioPlan(next_cue=cfg.task.onset if cfg.kind in HEADING_KINDS else 1.0)
        self.end_reason = "complete"
        self._avoid_scan: ScanFrame | None = None
        self._avoid = (0.0, True)
        self._next_probe = 0.0
        self._cane_speed = cfg.baseline.cane_speed_far
        self._lead = (0.0, 0.0)  # partial stride since the last estimated step
        self.heading_corr = 0.0  # IMU heading correction learnt from scan matching
        self.every = {
            name: max(1, int(round(1.0 / (hz * cfg.dt))))
            for name, hz in (
                ("lidar", cfg.perception.lidar_hz),
                ("map", cfg.perception.map_hz),
                ("loc", cfg.perception.localize_hz),
                ("gps", cfg.perception.gps_hz),
            )
        }
        if cfg.task.goal is not None or cfg.task.waypoints:
            if self.has_lidar and cfg.walker is not Walker.CANE_CONTACT:
                self.grid = OccupancyGrid.covering(
                    cfg.world.bounds, cfg.perception.resolution, margin=0.5 * cfg.perception.resolution
                )
            if cfg.task.waypoints or cfg.walker is Walker.CANE_CONTACT:
                self._set_path(_true_route(cfg))

    # ------------------------------------------------------------------
    def _set_path(self, path: PlannedPath | None) -> None:
        self.path = path
        self.follower = None if path is None else WaypointFollower(path, self.cfg.task.capture_radius)

    def _perceive(self, k: int, t: float, est: GaitEstimate, heading_hat: float) -> None:
        cfg = self.cfg
        st = self.st
        pose = (st.position[0], st.position[1], st.heading)
        # the pedometer moves in whole strides; sensing uses the pose
        # extrapolated to now, corrections are mapped back onto the step pose
        nav = self._dead_reckon(t, est, heading_hat)
        lx, ly = self._lead
        if k % self.every["gps"] == 0 and (cfg.world.gps_regions or nav.mode is Mode.OUTDOOR_GPS):
            fix = simulate_gps(pose, cfg.world, self.rngs[_GPS], cfg.noise.gps_sigma)
            nav = mode_switch(nav, fix is not None)
            if nav.mode is Mode.OUTDOOR_GPS:
                nav = _unshift(fuse_gps(_shift(nav, lx, ly), fix, cfg.perception.gps_gain), lx, ly)
        if self.has_lidar and k % self.every["lidar"] == 0:
            self.scan = simulate_lidar(pose, cfg.world, cfg.perception.n_beams, self.rngs[_LIDAR], cfg.noise.lidar_sigma, stamp=t)
            self.min_range = self.scan.min_range
            # the pedometer is only trusted once the recogniser is calibrated
            if self.grid is not None and nav.mode is Mode.INDOOR_SLAM and self.rec.calibration is not None:
                self.slam_used = True
                now = _shift(nav, lx, ly)
                if k % self.every["loc"] == 0 and self.grid.log_odds.any():
                    try:
                        now = self._localize(now)
                    except Exception:  # degenerate scans leave the belief alone
                        pass
                if k % self.every["map"] == 0:
                    update_occupancy(self.grid, now.pose_hat, self.scan)
                nav = _unshift(now, lx, ly)
        self.nav = nav
        self.pose_now = _shift(nav, lx, ly).pose_hat

    def _localize(self, now: NavEstimate) -> NavEstimate:
        """Coarse then fine scan match; the heading offset feeds the IMU correction."""
        pp = self.cfg.perception
        pose, conf = localize(self.grid, now.pose_hat, self.scan, beam_stride=pp.localize_beam_stride)
        if conf < pp.min_confidence:
            return now
        pose, _ = localize(
            self.grid, pose, self.scan,
            xy_half=0.04, xy_step=0.01, th_half=math.radians(1.0), th_step=math.radians(0.25),
            beam_stride=max(1, pp.localize_beam_stride // 2),
        )
        h = now.pose_hat[2]
        dh = pp.heading_gain * wrap_angle(pose[2] - h)
        self.heading_corr = wrap_angle(self.heading_corr + dh)
        return replace(now, pose_hat=(pose[0], pose[1], wrap_angle(h + dh)), confidence=conf)

    def _dead_reckon(self, t: float, est: GaitEstimate, heading: float) -> NavEstimate:
        """Whole strides from the pedometer plus the partial stride walked since.

        The partial stride is integrated tick by tick along the heading held
        at the time, so a turn on the spot mid-stride does not swing the
        distance already covered.  A completed step is booked along that
        integrated direction.
        """
        T = self.rec.interval
        lx, ly = self._lead
        if est.new_steps:
            n = math.hypot(lx, ly)
            step_heading = math.atan2(ly, lx) if n > 1e-9 and len(est.new_steps) == 1 else heading
            nav = dead_reckon(self.nav, est, step_heading)
            nav = replace(nav, pose_hat=nav.pose_hat[:2] + (heading,))
            # the part of the current stride walked after the step time
            d = 0.0 if T is None else est.stride_hat * min(max(t - est.new_steps[-1].t, 0.0), T) / T
            self._lead = (d * math.cos(heading), d * math.sin(heading))
            return nav
        nav = dead_reckon(self.nav, est, heading)
        if T is not None and t >= self.paused_until and (est.left.last_step_time or est.right.last_step_time):
            ds = est.stride_hat * self.cfg.dt / T
            nx, ny = lx + ds * math.cos(heading), ly + ds * math.sin(heading)
            n = math.hypot(nx, ny)
            if n > est.stride_hat:  # a step is overdue: hold at one stride
                nx, ny = nx * est.stride_hat / n, ny * est.stride_hat / n
            self._lead = (nx, ny)
        return nav

    def _plan(self, t: float) -> None:
        cfg = self.cfg
        if self.grid is None or cfg.task.waypoints or t - self.last_plan < cfg.planner.replan_period:
            return
        self.last_plan = t
        if self.path is not None and not path_blocked(self.grid, self.path, cfg.planner.inflation):
            return
        # a pose estimate hugging an obstacle would block the start cell, so
        # retry with thinner inflation before giving up
        radius = cfg.planner.inflation
        while True:
            try:
                self._set_path(plan_path(self.grid, self.pose_now, cfg.task.goal, radius))
                return
            except (StartBlocked, GoalBlocked):
                if radius <= 0.15 + 1e-9:
                    break
                radius = max(0.15, radius - 0.1)
            except (NoPath, PoseOutOfBounds):
                break
        self._set_path(None)

    def _desired(self, t: float, pose) -> float:
        """Heading the device (or the cane user) wants next; raises PathExhausted on arrival."""
        cfg = self.cfg
        if cfg.kind is Kind.STRAIGHT_WALK and cfg.task.cross_track_gain > 0:
            x0, y0, h0 = cfg.task.start
            offset = -(pose[0] - x0) * math.sin(h0) + (pose[1] - y0) * math.cos(h0)
            return wrap_angle(h0 - math.atan(cfg.task.cross_track_gain * offset))
        if cfg.kind in HEADING_KINDS:
            return _target_heading(cfg, t)
        if self.follower is not None:
            return self.follower.target_heading(pose)
        gx, gy = cfg.task.goal
        if math.hypot(gx - pose[0], gy - pose[1]) <= cfg.task.capture_radius:
            raise PathExhausted("arrived")
        return math.atan2(gy - pose[1], gx - pose[0])

    # ------------------------------------------------------------------
    def run(self) -> Trace:
        cfg = self.cfg
        n_ticks = int(round(cfg.duration / cfg.dt))
        rows = []
        for k in range(n_ticks + 1):
            t = k * cfg.dt
            st = self.st
            if not cfg.world.contains(*st.position):
                self.end_reason = "out_of_bounds"
                break
            sample = emit_rope_samples(st, DEFAULT_GEOMETRY, t, cfg.noise.rope_sigma, self.rngs[_ROPE])
            est = self.rec.ingest(sample)
            if self.rec.calibration is None and self.rec.total_steps >= cfg.perception.calibrate_after:
                self.rec.calibrate(cfg.pedestrian.base_stride, cfg.perception.calibrate_after)
            imu = simulate_imu(st.heading, self.rngs[_IMU], t, cfg.noise.imu_sigma_deg, cfg.noise.imu_bias_deg_per_s)
            heading_hat = wrap_angle(self.hfilter.update(t, imu, [s.t for s in est.new_steps]) + self.heading_corr)
            self._perceive(k, t, est, heading_hat)
            self._plan(t)

            cmd, mods, done = self._decide(t, est, heading_hat)
            rows.append(self._row(t, sample, est, cmd))
            if done or k == n_ticks:
                if not done and cfg.kind not in HEADING_KINDS:
                    self.end_reason = "timeout"
                break
            self._actuate(t, mods)
        trace = Trace(_meta(cfg), rows, self.grid if self.slam_used else None)
        trace.meta["end_reason"] = self.end_reason
        if self.path is not None:
            trace.meta["path"] = ";".join(f"{fmt(x)} {fmt(y)}" for x, y in self.path.waypoints)
        return trace

    def _decide(self, t: float, est: GaitEstimate, heading_hat: float):
        """Return (device command, walker's own stride mods, finished)."""
        cfg = self.cfg
        st = self.st
        walker = cfg.walker
        if walker is Walker.CANE_CONTACT:
            pose = (st.position[0], st.position[1], st.heading)
        else:
            pose = (self.pose_now[0], self.pose_now[1], heading_hat)
        try:
            desired = self._desired(t, pose)
        except PathExhausted:
            self.end_reason = "arrived"
            return RELAXED, (0.0, 0.0), True
        if t < self.paused_until:
            return RELAXED, (0.0, 0.0), False

        if cfg.kind not in HEADING_KINDS and self.scan is not None and walker is not Walker.CANE_CONTACT:
            pl = cfg.planner
            if self.scan is not self._avoid_scan:
                # evaluated once per scan; in between, the correction carries over
                adj = avoid_obstacles(self.scan, desired, pl.d_safe, pl.corridor, heading=heading_hat)
                ahead_clear = clearance_mask(self.scan, np.zeros(1), pl.stop_range, pl.corridor)[0]
                shift = None if adj is Blocked else wrap_angle(adj - desired)
                self._avoid_scan, self._avoid = self.scan, (shift, ahead_clear)
            shift, ahead_clear = self._avoid
            adj = Blocked if shift is None else wrap_angle(desired + shift)
            if adj is Blocked or not ahead_clear:
                # too close to steer around by stride changes: stop and turn
                if adj is Blocked:
                    new_heading = _pivot_heading(self.scan, st.heading, desired)
                else:
                    new_heading = wrap_angle(st.heading + wrap_angle(adj - heading_hat))
                self._pivot(t, new_heading)
                return GuidanceCommand(audio=Audio.OBSTACLE), (0.0, 0.0), False
            desired = adj

        if walker is Walker.GUIDED:
            cmd = self.ctl.update(wrap_angle(desired - heading_hat), est)
            return cmd, (cmd.left_mod, cmd.right_mod), False
        if walker is Walker.AUDIO_ONLY:
            return self._audio_only(t, desired, heading_hat)
        return self._cane(t, desired)

    def _pivot(self, t: float, new_heading: float, pause: float | None = None) -> None:
        """Stop, then turn on the spot (a person's reaction to an obstacle cue)."""
        pause = self.cfg.planner.pivot_pause if pause is None else pause
        self.paused_until = t + pause
        # the device called the halt, so its step clock and pose
        # extrapolation hold still until the walker moves again
        self.rec.suspend(t, pause)
        self.hfilter.restart(t)
        self.st = replace(self.st, heading=new_heading)

    def _audio_only(self, t: float, desired: float, heading_hat: float):
        cfg = self.cfg
        plan = self.audio_plan
        audio = Audio.NONE
        if t >= plan.next_cue - 1e-9:
            plan.next_cue += cfg.baseline.cue_period
            err = wrap_angle(desired - heading_hat)
            noise = math.radians(cfg.baseline.exec_sigma_deg) * float(self.rngs[_EXEC].standard_normal())
            plan.remaining = err + noise - plan.pending
            audio = Audio.TURN_LEFT if err > 0 else Audio.TURN_RIGHT
        mods = self._self_steer(plan.remaining)
        return GuidanceCommand(audio=audio), mods, False

    def _self_steer(self, turn: float):
        """Stride mods a person applies on whichever leg is in swing."""
        st = self.st
        mod_max = self.cfg.controller.mod_max
        out = []
        for name in ("left", "right"):
            leg = getattr(st, name)
            # a stride can only be reshaped while the foot is still well in the air
            if SWING_START <= leg.phase_fraction < LATE_SWING and leg.swing_mod == 0.0 and abs(turn) > 1e-12:
                out.append(_human_mod(name, turn, st, mod_max))
            else:
                out.append(0.0)
        return tuple(out)

    def _cane(self, t: float, desired: float):
        cfg = self.cfg
        st = self.st
        b = cfg.baseline
        x, y = st.position
        probe = t >= self._next_probe - 1e-9 and len(cfg.world.segments) > 0
        if probe:
            # the cane sweeps the ground ahead a few times per second
            self._next_probe = t + 1.0 / b.probe_hz
            near = distance_to_segments(x, y, cfg.world.segments) < b.near_wall
            self._cane_speed = b.cane_speed_near if near else b.cane_speed_far
        if probe and t >= self.cooldown_until:
            ahead = raycast(x, y, st.heading + np.array([-0.3, 0.0, 0.3]), cfg.world.segments)
            if float(ahead.min()) < b.contact_reach:
                # stop on contact, then face along the route again
                self.cooldown_until = t + b.contact_pause + 2.0
                self._pivot(t, desired, b.contact_pause)
                return RELAXED, (0.0, 0.0), False
        speed = self._cane_speed
        cadence = speed / st.base_stride
        if cadence != st.cadence:
            self.st = replace(st, cadence=cadence)
        err = wrap_angle(desired - st.heading)
        if abs(err) <= cfg.controller.deadband:
            return RELAXED, (0.0, 0.0), False
        return RELAXED, self._self_steer(err), False

    def _actuate(self, t: float, mods) -> None:
        cfg = self.cfg
        if t < self.paused_until:
            self.st = replace(self.st, t=self.st.t + cfg.dt, events=())
            return
        before = {n: getattr(self.st, n).swing_mod for n in ("left", "right")}
        st = advance_gait(self.st, cfg.dt, mods[0], mods[1], mod_max=cfg.controller.mod_max)
        plan = self.audio_plan
        for name in ("left", "right"):
            leg = getattr(st, name)
            if before[name] == 0.0 and leg.swing_mod != 0.0:
                d = _dpsi_for(name, leg.swing_mod, st)
                plan.remaining -= d
                plan.pending += d
        if st.events:
            for e in st.events:
                if before[e.leg] != 0.0:
                    plan.pending -= e.dpsi
                else:  # latched and landed within this tick
                    plan.remaining -= e.dpsi
            if cfg.noise.veer_deg > 0:
                veer = math.radians(cfg.noise.veer_deg) * self.rngs[_VEER].standard_normal(len(st.events))
                st = replace(st, heading=wrap_angle(st.heading + float(veer.sum())))
        self.st = st

    def _row(self, t: float, sample, est: GaitEstimate, cmd: GuidanceCommand):
        st = self.st
        x, y, h = self.pose_now
        return (
            fmt(t), fmt(st.position[0]), fmt(st.position[1]), fmt(st.heading),
            fmt(x), fmt(y), fmt(h), self.nav.mode.value,
            fmt(sample.left_len), fmt(sample.right_len),
            est.left.phase.value, est.right.phase.value,
            cmd.left_tension.value, cmd.right_tension.value,
            fmt(cmd.left_mod), fmt(cmd.right_mod), cmd.audio.value,
            fmt(self.min_range), str(st.steps),
        )


def run_scenario(cfg: ScenarioConfig, strict: bool = False) -> tuple[RunMetrics, Trace]:
    """Run one scenario; with ``strict`` a run that hits the duration cap raises TimedOut."""
    trace = _Sim(cfg).run()
    metrics = compute_metrics(trace)
    if strict and trace.meta.get("end_reason") == "timeout":
        err = TimedOut(f"{cfg.name} seed {cfg.seed} hit the {cfg.duration} s cap")
        err.metrics, err.trace = metrics, trace
        raise err
    return metrics, trace
