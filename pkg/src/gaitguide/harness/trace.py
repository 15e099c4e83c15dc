"""Per-tick trace schema, CSV round trip and the metrics computed from it.

A trace file is a CSV with a fixed header, preceded by ``# key=value``
comment lines that carry what the metrics need besides the rows (scenario
kind, targets, goal, reference line, world segments, planned path, end
reason).  Metrics are always computed from the formatted text values, so a
trace read back from disk yields exactly the metrics of the live run.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..errors import IoFailure
from ..gait_model import wrap_angle

COLUMNS = (
    "t", "true_x", "true_y", "true_heading", "est_x", "est_y", "est_heading", "mode",
    "L_left", "L_right", "phase_left", "phase_right", "tension_left", "tension_right",
    "mod_left", "mod_right", "audio", "min_scan_range", "step_count",
)
_FLOAT_COLS = (
    "t", "true_x", "true_y", "true_heading", "est_x", "est_y", "est_heading",
    "L_left", "L_right", "mod_left", "mod_right", "min_scan_range",
)


def fmt(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    s = "%.6f" % v
    return "0.000000" if s == "-0.000000" else s


def fmt_meta(v: float) -> str:
    return repr(float(v))


@dataclass
class Trace:
    meta: dict[str, str]
    rows: list[tuple[str, ...]]
    grid: object = field(default=None, repr=False)  # OccupancyGrid when mapping ran

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        j = COLUMNS.index(name)
        if name in _FLOAT_COLS:
            return np.array([float(r[j]) for r in self.rows])
        if name == "step_count":
            return np.array([int(r[j]) for r in self.rows])
        return np.array([r[j] for r in self.rows])

    def to_csv(self) -> str:
        buf = io.StringIO()
        for k, v in self.meta.items():
            buf.write(f"# {k}={v}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        w.writerows(self.rows)
        return buf.getvalue()


def read_trace(path) -> Trace:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoFailure(f"cannot read trace {path}: {exc}") from exc
    return parse_trace(text)


def parse_trace(text: str) -> Trace:
    meta: dict[str, str] = {}
    lines = text.splitlines()
    i = 0
    while i < len(lines) and lines[i].startswith("#"):
        k, _, v = lines[i][1:].strip().partition("=")
        meta[k] = v
        i += 1
    reader = csv.reader(lines[i:])
    header = next(reader, None)
    if header is None or tuple(header) != COLUMNS:
        raise ValueError("trace header does not match the fixed schema")
    rows = [tuple(r) for r in reader if r]
    if any(len(r) != len(COLUMNS) for r in rows):
        raise ValueError("trace row with wrong column count")
    return Trace(meta, rows)


def meta_floats(meta: dict, key: str) -> list[float]:
    v = meta.get(key, "")
    return [float(x) for x in v.split()] if v.strip() else []


def meta_points(meta: dict, key: str) -> np.ndarray:
    v = meta.get(key, "")
    pts = [[float(x) for x in item.split()] for item in v.split(";") if item.strip()]
    return np.asarray(pts, dtype=float)


# ----------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class RunMetrics:
    completion_time: float
    path_length: float
    lateral_rmse: float
    final_heading_error: float  # degrees, absolute
    collision_count: int
    steps: int
    arrived: bool

    def as_dict(self) -> dict:
        return asdict(self)


FIELDS = tuple(RunMetrics.__dataclass_fields__)


def _first_reach(t, heading, target, onset, tol):
    err = np.abs(wrap_angle(target - heading))
    hit = np.flatnonzero((t >= onset - 1e-9) & (err <= tol))
    return None if hit.size == 0 else float(t[hit[0]] - onset)


def compute_metrics(trace: Trace) -> RunMetrics:
    """Derive :class:`RunMetrics` from the trace rows and metadata alone."""
    if not trace.rows:
        raise ValueError("empty trace")
    m = trace.meta
    kind = m["kind"]
    t = trace.column("t")
    x, y, h = trace.column("true_x"), trace.column("true_y"), trace.column("true_heading")
    path_length = math.fsum(np.hypot(np.diff(x), np.diff(y))) if len(x) > 1 else 0.0
    x0, y0, h0 = meta_floats(m, "ref_line")
    cross = -(x - x0) * math.sin(h0) + (y - y0) * math.cos(h0)
    lateral = math.sqrt(math.fsum(cross * cross) / len(cross))
    collision_range = float(m.get("collision_range", "0.25"))
    collisions = int(np.count_nonzero(trace.column("min_scan_range") < collision_range))
    steps = int(trace.column("step_count")[-1])
    end_reason = m.get("end_reason", "complete")
    tol = float(m.get("tolerance", repr(math.radians(5.0))))

    if kind in ("Turn90", "SteerToAngle", "StraightWalk"):
        target = float(m["target_heading"])
        onset = float(m.get("onset", "0"))
        final_err = abs(wrap_angle(target - h[-1]))
        if kind == "Turn90":
            reach = _first_reach(t, h, target, onset, tol)
            arrived = reach is not None and final_err <= tol
            completion = reach if reach is not None else float(t[-1] - onset)
        elif kind == "SteerToAngle":
            completion = float(t[-1] - onset)
            arrived = final_err <= tol
        else:
            completion = float(t[-1])
            arrived = end_reason == "complete"
    else:
        gx, gy = meta_floats(m, "goal")
        final_err = abs(wrap_angle(math.atan2(gy - y[-1], gx - x[-1]) - h[-1]))
        completion = float(t[-1])
        arrived = end_reason == "arrived"
    return RunMetrics(
        completion_time=max(0.0, completion),
        path_length=path_length,
        lateral_rmse=lateral,
        final_heading_error=math.degrees(final_err),
        collision_count=collisions,
        steps=steps,
        arrived=bool(arrived),
    )


def write_text_atomic(path: Path, text: str | bytes) -> None:
    """Write through a temporary sibling so no partial file is left behind."""
    tmp = path.with_name(path.name + ".part")
    try:
        if isinstance(text, bytes):
            tmp.write_bytes(text)
        else:
            tmp.write_text(text)
        tmp.replace(path)
    except OSError as exc:
        tmp.unlink(missing_ok=True)
        raise IoFailure(f"cannot write {path}: {exc}") from exc
