"""Scenario definitions and the ``gaitguide-scenario v1`` file format.

A scenario file starts with the line ``gaitguide-scenario v1`` and is
followed by INI-style sections (``[scenario]``, ``[pedestrian]``,
``[controller]``, ``[noise]``, ``[task]``, ``[world]``, ``[perception]``,
``[planner]``, ``[baseline]``, ``[obstacles]``).  Every key is optional
and falls back to the defaults below.  List values use ``;`` between items
and whitespace (or ``,``) inside an item, e.g. ``boxes = 3 2 0.5 0.5; 6 4 0.4 0.4``.
See the README for the full key list.
"""
from __future__ import annotations

import configparser
import enum
import math
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np

from ..errors import ScenarioInvalid
from ..guidance import ControllerConfig
from ..world_sense.nav import Mode
from ..world_sense.world import WorldModel, box

HEADER = "gaitguide-scenario v1"


class Kind(enum.Enum):
    TURN90 = "Turn90"
    STRAIGHT_WALK = "StraightWalk"
    STEER_TO_ANGLE = "SteerToAngle"
    OBSTACLE_COURSE = "ObstacleCourse"
    HALLWAY = "Hallway"
    OUTDOOR_ROUTE = "OutdoorRoute"


class Walker(enum.Enum):
    GUIDED = "Guided"
    AUDIO_ONLY = "AudioOnly"
    CANE_CONTACT = "CaneContact"


HEADING_KINDS = (Kind.TURN90, Kind.STRAIGHT_WALK, Kind.STEER_TO_ANGLE)


@dataclass(frozen=True)
class PedestrianParams:
    base_stride: float = 0.45
    speed: float = 0.8
    w_hip: float = 0.30
    right_fraction: float = 0.0

    @property
    def cadence(self) -> float:
        return self.speed / self.base_stride


@dataclass(frozen=True)
class NoiseParams:
    imu_sigma_deg: float = 0.0
    imu_bias_deg_per_s: float = 0.0
    rope_sigma: float = 0.0
    lidar_sigma: float = 0.0
    gps_sigma: float = 0.8
    veer_deg: float = 0.0  # heading perturbation per step (natural veering)


@dataclass(frozen=True)
class TaskParams:
    start: tuple[float, float, float] = (0.0, 0.0, 0.0)  # x, y, heading (rad)
    onset: float = 3.0  # time at which a heading target is issued
    target: float = 0.0  # heading change requested at onset (rad)
    tolerance: float = math.radians(5.0)
    goal: tuple[float, float] | None = None
    waypoints: tuple[tuple[float, float], ...] = ()
    capture_radius: float = 0.5
    # StraightWalk: steer back towards the reference line by atan(gain * offset)
    cross_track_gain: float = 0.0
    initial_mode: Mode = Mode.INDOOR_SLAM


@dataclass(frozen=True)
class PerceptionParams:
    n_beams: int = 360
    lidar_hz: float = 10.0
    map_hz: float = 10.0
    localize_hz: float = 2.0
    localize_beam_stride: int = 4
    min_confidence: float = 0.05
    heading_gain: float = 0.3
    gps_hz: float = 1.0
    gps_gain: float = 0.2
    resolution: float = 0.10
    calibrate_after: int = 4


@dataclass(frozen=True)
class PlannerParams:
    inflation: float = 0.35
    d_safe: float = 1.0
    corridor: float = 0.6
    replan_period: float = 1.0
    collision_range: float = 0.25
    pivot_pause: float = 1.0
    stop_range: float = 0.5


@dataclass(frozen=True)
class BaselineParams:
    cue_period: float = 2.0
    exec_sigma_deg: float = 4.0
    cane_speed_near: float = 0.55
    cane_speed_far: float = 0.65
    near_wall: float = 1.2
    contact_reach: float = 0.9
    contact_pause: float = 1.0
    probe_hz: float = 10.0


@dataclass(frozen=True)
class ObstacleParams:
    room: tuple[float, float] = (10.0, 6.0)
    count: tuple[int, int] = (5, 8)
    size: tuple[float, float] = (0.3, 0.6)
    min_spacing: float = 1.6
    clearance: float = 1.5
    margin: float = 0.8


@dataclass(frozen=True)
class ScenarioConfig:
    kind: Kind
    name: str = "scenario"
    walker: Walker = Walker.GUIDED
    seed: int = 0
    duration: float = 30.0
    dt: float = 0.01
    world: WorldModel = field(default_factory=WorldModel)
    pedestrian: PedestrianParams = PedestrianParams()
    controller: ControllerConfig = ControllerConfig()
    noise: NoiseParams = NoiseParams()
    task: TaskParams = TaskParams()
    perception: PerceptionParams = PerceptionParams()
    planner: PlannerParams = PlannerParams()
    baseline: BaselineParams = BaselineParams()
    obstacles: ObstacleParams | None = None

    def __post_init__(self):
        validate(self)

    def with_seed(self, seed: int) -> "ScenarioConfig":
        cfg = replace(self, seed=int(seed))
        if cfg.obstacles is not None:
            cfg = replace(cfg, world=obstacle_course_world(cfg.obstacles, cfg.task, cfg.seed))
        return cfg

    def with_walker(self, walker: Walker) -> "ScenarioConfig":
        return replace(self, walker=walker)


def validate(cfg: ScenarioConfig) -> None:
    def bad(msg):
        raise ScenarioInvalid(msg)

    if not cfg.duration > 0:
        bad("duration cap must be positive")
    if not 0 < cfg.dt <= 0.1:
        bad("dt must lie in (0, 0.1]")
    p = cfg.pedestrian
    if min(p.base_stride, p.speed, p.w_hip) <= 0:
        bad("pedestrian parameters must be positive")
    if cfg.kind in (Kind.OBSTACLE_COURSE, Kind.HALLWAY) and cfg.task.goal is None:
        bad(f"{cfg.kind.value} needs a goal")
    if cfg.kind is Kind.OUTDOOR_ROUTE and not cfg.task.waypoints:
        bad("OutdoorRoute needs waypoints")
    if not cfg.world.contains(*cfg.task.start[:2]):
        bad("start pose outside world bounds")
    if cfg.task.goal is not None and not cfg.world.contains(*cfg.task.goal):
        bad("goal outside world bounds")
    if cfg.perception.n_beams < 10:
        bad("need at least 10 LIDAR beams")
    for name in ("lidar_hz", "map_hz", "localize_hz", "gps_hz"):
        hz = getattr(cfg.perception, name)
        if hz <= 0 or hz > 1.0 / cfg.dt + 1e-9:
            bad(f"{name} must lie in (0, 1/dt]")


# ----------------------------------------------------------------------
# obstacle courses


def obstacle_course_world(op: ObstacleParams, task: TaskParams, seed: int) -> WorldModel:
    """Room with randomly placed boxes, keyed on ``seed`` only.

    Box centres keep ``min_spacing`` from each other and ``clearance`` from
    the start and the goal; sizes are uniform in ``op.size``.
    """
    rng = np.random.default_rng([int(seed), 0x0B5])
    w, h = op.room
    n_target = int(rng.integers(op.count[0], op.count[1] + 1))
    keep_clear = [task.start[:2]] + ([task.goal] if task.goal is not None else [])
    centres: list[tuple[float, float]] = []
    for _ in range(10000):
        if len(centres) == n_target:
            break
        c = (float(rng.uniform(op.margin, w - op.margin)), float(rng.uniform(op.margin, h - op.margin)))
        if any(math.dist(c, k) < op.clearance for k in keep_clear):
            continue
        if any(math.dist(c, o) < op.min_spacing for o in centres):
            continue
        centres.append(c)
    segs = box(w / 2, h / 2, w, h)
    for cx, cy in centres:
        bw, bh = rng.uniform(op.size[0], op.size[1], 2)
        segs += box(cx, cy, float(bw), float(bh))
    return WorldModel(segs, [], (0.0, 0.0, w, h))


# ----------------------------------------------------------------------
# parsing


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def _items(text: str) -> list[list[float]]:
    return [_floats(item) for item in text.split(";") if item.strip()]


def _polygons(text: str) -> list[np.ndarray]:
    out = []
    for item in text.split(";"):
        if item.strip():
            pts = [_floats(p) for p in item.split(",") if p.strip()]
            out.append(np.asarray(pts, dtype=float))
    return out


def _bool(text: str) -> bool:
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _dataclass_from(section, cls, renames=None, conv=None):
    renames = renames or {}
    conv = conv or {}
    kwargs = {}
    names = {f.name: f for f in fields(cls)}
    for key, raw in section.items():
        name = renames.get(key, key)
        if name in conv:
            name, value = conv[name](raw)
            kwargs[name] = value
            continue
        if name not in names:
            raise ScenarioInvalid(f"unknown key {key!r} in [{section.name}]")
        default = names[name].default
        if isinstance(default, bool):
            kwargs[name] = _bool(raw)
        elif isinstance(default, int):
            kwargs[name] = int(raw)
        elif isinstance(default, tuple):
            kwargs[name] = tuple(type(d)(v) for d, v in zip(default, _floats(raw)))
        else:
            kwargs[name] = float(raw)
    return cls(**kwargs)


_SECTIONS = {"scenario", "pedestrian", "controller", "noise", "task", "world", "perception", "planner", "baseline", "obstacles"}


def parse_text(text: str, overrides=()) -> ScenarioConfig:
    lines = text.splitlines()
    if not lines or lines[0].strip() != HEADER:
        raise ScenarioInvalid(f"missing header line {HEADER!r}")
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        cp.read_string("\n".join(lines[1:]))
    except configparser.Error as exc:
        raise ScenarioInvalid(str(exc)) from exc
    for ov in overrides:
        key, sep, value = ov.partition("=")
        section, dot, option = key.strip().partition(".")
        if not sep or not dot:
            raise ScenarioInvalid(f"override {ov!r} is not section.key=value")
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section, option, value.strip())
    unknown = set(cp.sections()) - _SECTIONS
    if unknown:
        raise ScenarioInvalid(f"unknown sections: {sorted(unknown)}")
    try:
        return _build(cp)
    except ScenarioInvalid:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise ScenarioInvalid(str(exc)) from exc


def _section(cp, name):
    if cp.has_section(name):
        return cp[name]
    cp.add_section(name)
    return cp[name]


def _build(cp) -> ScenarioConfig:
    sc = _section(cp, "scenario")
    if "kind" not in sc:
        raise ScenarioInvalid("[scenario] kind is required")
    kind = Kind(sc["kind"])
    walker = Walker(sc.get("walker", Walker.GUIDED.value))
    known = {"kind", "walker", "name", "seed", "duration", "dt"}
    extra = set(sc) - known
    if extra:
        raise ScenarioInvalid(f"unknown keys in [scenario]: {sorted(extra)}")

    ctl = _section(cp, "controller")
    c_kwargs = {}
    for key, raw in ctl.items():
        if key in ("kp", "mod_max", "edge_margin"):
            c_kwargs[key] = float(raw)
        elif key in ("deadband_deg", "audio_threshold_deg"):
            c_kwargs[key[:-4]] = math.radians(float(raw))
        elif key == "assist_inner":
            c_kwargs[key] = _bool(raw)
        else:
            raise ScenarioInvalid(f"unknown key {key!r} in [controller]")
    try:
        controller = ControllerConfig(**c_kwargs)
    except ValueError as exc:
        raise ScenarioInvalid(str(exc)) from exc

    t = _section(cp, "task")
    t_kwargs = {}
    for key, raw in t.items():
        if key == "start":
            x, y, hdg = _floats(raw)
            t_kwargs["start"] = (x, y, math.radians(hdg))
        elif key == "onset":
            t_kwargs["onset"] = float(raw)
        elif key == "target_deg":
            t_kwargs["target"] = math.radians(float(raw))
        elif key == "tolerance_deg":
            t_kwargs["tolerance"] = math.radians(float(raw))
        elif key == "goal":
            x, y = _floats(raw)
            t_kwargs["goal"] = (x, y)
        elif key == "waypoints":
            t_kwargs["waypoints"] = tuple((p[0], p[1]) for p in _items(raw))
        elif key in ("capture_radius", "cross_track_gain"):
            t_kwargs[key] = float(raw)
        elif key == "initial_mode":
            t_kwargs["initial_mode"] = Mode(raw.strip())
        else:
            raise ScenarioInvalid(f"unknown key {key!r} in [task]")
    task = TaskParams(**t_kwargs)
    if kind is Kind.OUTDOOR_ROUTE and task.goal is None and task.waypoints:
        task = replace(task, goal=task.waypoints[-1])

    obstacles = None
    if cp.has_section("obstacles") or kind is Kind.OBSTACLE_COURSE:
        obstacles = _dataclass_from(_section(cp, "obstacles"), ObstacleParams)

    w = _section(cp, "world")
    segs: list = []
    regions: list = []
    bounds = None
    for key, raw in w.items():
        if key == "bounds":
            bounds = tuple(_floats(raw))
        elif key == "walls":
            segs += [tuple(s) for s in _items(raw)]
        elif key == "polylines":
            for poly in _polygons(raw):
                segs += [(a[0], a[1], b[0], b[1]) for a, b in zip(poly, poly[1:])]
        elif key == "boxes":
            for cx, cy, bw, bh in _items(raw):
                segs += box(cx, cy, bw, bh)
        elif key == "gps_regions":
            regions += _polygons(raw)
        else:
            raise ScenarioInvalid(f"unknown key {key!r} in [world]")
    if any(len(s) != 4 for s in segs):
        raise ScenarioInvalid("walls need four numbers each")
    if obstacles is not None:
        world = WorldModel(np.zeros((0, 4)), [], (0.0, 0.0) + tuple(obstacles.room))
    else:
        world = WorldModel(np.asarray(segs, dtype=float).reshape(-1, 4), regions,
                           bounds if bounds else (-50.0, -50.0, 50.0, 50.0))

    cfg = ScenarioConfig(
        kind=kind,
        name=sc.get("name", kind.value.lower()),
        walker=walker,
        seed=int(sc.get("seed", "0")),
        duration=float(sc.get("duration", "30")),
        dt=float(sc.get("dt", "0.01")),
        world=world,
        pedestrian=_dataclass_from(_section(cp, "pedestrian"), PedestrianParams),
        controller=controller,
        noise=_dataclass_from(_section(cp, "noise"), NoiseParams),
        task=task,
        perception=_dataclass_from(_section(cp, "perception"), PerceptionParams),
        planner=_dataclass_from(_section(cp, "planner"), PlannerParams),
        baseline=_dataclass_from(_section(cp, "baseline"), BaselineParams),
        obstacles=obstacles,
    )
    return cfg.with_seed(cfg.seed)


def load_scenario(path, overrides=()) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioInvalid(f"cannot read {path}: {exc}") from exc
    return parse_text(text, overrides)


def builtin_path(name: str) -> Path:
    """Path of a packaged default scenario such as ``"turn90"``."""
    p = resources.files("gaitguide") / "scenarios" / f"{name}.scn"
    return Path(str(p))


def builtin(name: str, overrides=()) -> ScenarioConfig:
    return load_scenario(builtin_path(name), overrides)


def builtin_names() -> list[str]:
    d = resources.files("gaitguide") / "scenarios"
    return sorted(p.name[:-4] for p in d.iterdir() if p.name.endswith(".scn"))


def resolve(name_or_path, overrides=()) -> ScenarioConfig:
    """Load a scenario file, or a packaged scenario when given a bare name."""
    p = Path(name_or_path)
    if p.exists():
        return load_scenario(p, overrides)
    if str(name_or_path) in builtin_names():
        return builtin(str(name_or_path), overrides)
    raise ScenarioInvalid(f"no scenario file or built-in named {name_or_path!r}")
