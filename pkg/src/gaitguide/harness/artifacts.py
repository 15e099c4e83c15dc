"""Per-run output files: trace CSV, trajectory and rope-length SVGs, occupancy map.

SVGs are written by hand (SVG 1.1, no plotting dependency) so the files are
byte-stable across machines.
"""
from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np
from scipy.ndimage import maximum_filter1d, minimum_filter1d

from ..errors import IoFailure
from ..world_sense.grid import to_pgm_bytes, UNKNOWN_BAND
from .trace import Trace, meta_points, write_text_atomic

ASYMMETRY_LEVEL = 0.10


# ----------------------------------------------------------------------
# rope-channel analysis


def _cycle_ticks(trace: Trace) -> int:
    dt = float(trace.meta.get("dt", "0.01"))
    steps = trace.column("step_count")
    t = trace.column("t")
    # one gait cycle = two steps; fall back to the default walker's cycle
    if steps[-1] >= 4:
        period = 2.0 * (t[-1] - t[0]) / steps[-1]
    else:
        period = 1.125
    return max(2, int(round(period / dt)))


def rope_amplitudes(trace: Trace) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Peak-to-peak rope length of each channel over the trailing gait cycle.

    Returns ``(t, amp_left, amp_right)``; amplitudes are NaN until a full
    cycle has been seen.
    """
    w = _cycle_ticks(trace)
    out = []
    for name in ("L_left", "L_right"):
        x = trace.column(name)
        # origin shifts the window so it ends at the current sample
        origin = (w - 1) // 2
        hi = maximum_filter1d(x, w, origin=origin, mode="nearest")
        lo = minimum_filter1d(x, w, origin=origin, mode="nearest")
        amp = hi - lo
        amp[: w - 1] = np.nan
        out.append(amp)
    return trace.column("t"), out[0], out[1]


def rope_asymmetry(trace: Trace) -> tuple[np.ndarray, np.ndarray]:
    """Relative amplitude difference |R - L| / max(L, R) per tick."""
    t, a, b = rope_amplitudes(trace)
    den = np.maximum(np.fmax(a, b), 1e-12)
    return t, np.abs(b - a) / den


def turn_window(trace: Trace) -> tuple[float, float] | None:
    """First tick with any commanded modulation to one cycle after the last."""
    t = trace.column("t")
    active = np.flatnonzero((trace.column("mod_left") != 0.0) | (trace.column("mod_right") != 0.0))
    if active.size == 0:
        return None
    dt = float(trace.meta.get("dt", "0.01"))
    return float(t[active[0]]), float(t[active[-1]] + _cycle_ticks(trace) * dt)


# ----------------------------------------------------------------------
# SVG helpers


class _Frame:
    """Maps data coordinates into a plot box with y pointing up."""

    def __init__(self, xlim, ylim, width=640, height=480, pad=40, equal=False):
        (x0, x1), (y0, y1) = xlim, ylim
        if x1 - x0 <= 0:
            x1 = x0 + 1.0
        if y1 - y0 <= 0:
            y1 = y0 + 1.0
        sx = (width - 2 * pad) / (x1 - x0)
        sy = (height - 2 * pad) / (y1 - y0)
        if equal:
            sx = sy = min(sx, sy)
        self.x0, self.y0, self.sx, self.sy = x0, y0, sx, sy
        self.pad, self.width, self.height = pad, width, height

    def x(self, v):
        return self.pad + (np.asarray(v, dtype=float) - self.x0) * self.sx

    def y(self, v):
        return self.height - self.pad - (np.asarray(v, dtype=float) - self.y0) * self.sy


def _polyline(xs, ys, stroke, width=1.5, dash=None) -> str:
    pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(xs, ys))
    d = f' stroke-dasharray="{dash}"' if dash else ""
    return f'<polyline points="{pts}" fill="none" stroke="{stroke}" stroke-width="{width}"{d}/>'


def _svg(width, height, body: list[str], title: str) -> str:
    head = (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n'
        f"<title>{escape(title)}</title>\n"
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>\n'
    )
    return head + "\n".join(body) + "\n</svg>\n"


def _thin(n: int, limit: int = 2000) -> slice:
    return slice(None, None, max(1, n // limit))


def trajectory_svg(trace: Trace) -> str:
    """World segments, true and estimated paths, step and audio events."""
    m = trace.meta
    x, y = trace.column("true_x"), trace.column("true_y")
    ex, ey = trace.column("est_x"), trace.column("est_y")
    segs = meta_points(m, "world").reshape(-1, 4)
    xs = np.concatenate([x, ex, segs[:, 0], segs[:, 2]])
    ys = np.concatenate([y, ey, segs[:, 1], segs[:, 3]])
    goal = meta_points(m, "goal").reshape(-1)
    if goal.size == 2:
        xs, ys = np.append(xs, goal[0]), np.append(ys, goal[1])
    f = _Frame((xs.min() - 0.5, xs.max() + 0.5), (ys.min() - 0.5, ys.max() + 0.5), equal=True)
    body = ['<g id="world" stroke="black" stroke-width="2">']
    for a, b, c, d in segs:
        body.append(f'<line x1="{f.x(a):.2f}" y1="{f.y(b):.2f}" x2="{f.x(c):.2f}" y2="{f.y(d):.2f}"/>')
    body.append("</g>")
    path = meta_points(m, "path")
    if path.size:
        body.append(_polyline(f.x(path[:, 0]), f.y(path[:, 1]), "#9c9", 1.0, "2,3"))
    s = _thin(len(x))
    body.append(_polyline(f.x(x[s]), f.y(y[s]), "#1f5fbf", 2.0))
    body.append(_polyline(f.x(ex[s]), f.y(ey[s]), "#d2691e", 1.2, "5,3"))
    steps = trace.column("step_count")
    idx = np.flatnonzero(np.diff(steps) > 0) + 1
    body.append('<g id="steps" fill="#1f5fbf">')
    body += [f'<circle cx="{f.x(x[i]):.2f}" cy="{f.y(y[i]):.2f}" r="2"/>' for i in idx]
    body.append("</g>")
    audio = trace.column("audio")
    cue = np.flatnonzero((audio != "None") & np.r_[True, audio[1:] != audio[:-1]])
    body.append('<g id="audio" fill="none" stroke="#c00">')
    body += [f'<rect x="{f.x(x[i]) - 4:.2f}" y="{f.y(y[i]) - 4:.2f}" width="8" height="8"/>' for i in cue]
    body.append("</g>")
    if goal.size == 2:
        body.append(f'<circle cx="{f.x(goal[0]):.2f}" cy="{f.y(goal[1]):.2f}" r="6" fill="none" stroke="green" stroke-width="2"/>')
    label = f"{m.get('name', '')} {m.get('walker', '')} seed {m.get('seed', '')}: true (blue), estimated (dashed)"
    body.append(f'<text x="10" y="20" font-size="13" font-family="sans-serif">{escape(label)}</text>')
    return _svg(f.width, f.height, body, "trajectory")


def rope_svg(trace: Trace) -> str:
    """Both rope lengths over time; the turn window is shaded."""
    t = trace.column("t")
    left, right = trace.column("L_left"), trace.column("L_right")
    lo = float(min(left.min(), right.min()))
    hi = float(max(left.max(), right.max()))
    margin = 0.05 * (hi - lo + 1e-9)
    f = _Frame((float(t[0]), float(t[-1])), (lo - margin, hi + margin), width=800, height=360)
    body = []
    win = turn_window(trace)
    if win is not None:
        a, b = f.x(win[0]), f.x(min(win[1], t[-1]))
        body.append(
            f'<rect id="turn-window" x="{a:.2f}" y="{f.pad}" width="{b - a:.2f}" '
            f'height="{f.height - 2 * f.pad}" fill="#eee"/>'
        )
    s = _thin(len(t), 4000)
    body.append(_polyline(f.x(t[s]), f.y(left[s]), "#1f5fbf", 1.2))
    body.append(_polyline(f.x(t[s]), f.y(right[s]), "#c03030", 1.2))
    _, asym = rope_asymmetry(trace)
    peak = float(np.nanmax(asym, initial=0.0))
    label = f"rope length L (m): left (blue), right (red); peak amplitude asymmetry {100 * peak:.0f}%"
    body.append(f'<text x="10" y="20" font-size="13" font-family="sans-serif">{escape(label)}</text>')
    for v in np.linspace(t[0], t[-1], 6):
        body.append(
            f'<text x="{f.x(v):.1f}" y="{f.height - 12}" font-size="11" font-family="sans-serif" '
            f'text-anchor="middle">{v:.1f} s</text>'
        )
    return _svg(f.width, f.height, body, "rope length")


def _map_yaml(trace: Trace, image: str) -> str:
    g = trace.grid
    return (
        f"image: {image}\nresolution: {g.resolution}\n"
        f"origin: [{g.origin[0]}, {g.origin[1]}, 0.0]\n"
        f"free_thresh: {-UNKNOWN_BAND}\noccupied_thresh: {UNKNOWN_BAND}\n"
    )


def emit_artifacts(trace: Trace, out_dir) -> list[Path]:
    """Write ``trace.csv``, ``trajectory.svg``, ``rope.svg`` and, when the run
    mapped its surroundings, ``map.pgm`` with a ``map.yaml`` sidecar.

    Everything is rendered before the first write; if any write fails the
    files already written are removed and :class:`IoFailure` is raised.
    """
    if len(trace) == 0:
        raise ValueError("empty trace: nothing to write")
    files: list[tuple[str, str | bytes]] = [
        ("trace.csv", trace.to_csv()),
        ("trajectory.svg", trajectory_svg(trace)),
        ("rope.svg", rope_svg(trace)),
    ]
    if trace.grid is not None:
        files.append(("map.pgm", to_pgm_bytes(trace.grid)))
        files.append(("map.yaml", _map_yaml(trace, "map.pgm")))
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create {out}: {exc}") from exc
    written: list[Path] = []
    try:
        for name, content in files:
            write_text_atomic(out / name, content)
            written.append(out / name)
    except IoFailure:
        for p in written:
            p.unlink(missing_ok=True)
        raise
    return written


def asymmetry_confined(trace: Trace, level: float = ASYMMETRY_LEVEL) -> tuple[bool, float, float]:
    """Whether rope amplitude asymmetry reaches ``level`` inside the turn
    window and stays below it everywhere else.

    Returns ``(ok, peak inside, peak outside)``.
    """
    win = turn_window(trace)
    t, asym = rope_asymmetry(trace)
    if win is None:
        return False, 0.0, float(np.nanmax(asym, initial=0.0))
    inside = (t >= win[0]) & (t <= win[1])
    pin = float(np.nanmax(asym[inside], initial=0.0))
    pout = float(np.nanmax(asym[~inside], initial=0.0))
    return (pin >= level and pout < level), pin, pout


__all__ = [
    "ASYMMETRY_LEVEL",
    "asymmetry_confined",
    "emit_artifacts",
    "rope_amplitudes",
    "rope_asymmetry",
    "rope_svg",
    "trajectory_svg",
    "turn_window",
]
