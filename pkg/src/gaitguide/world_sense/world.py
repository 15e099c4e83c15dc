"""Line-segment worlds and the ray/segment geometry used by the sensors."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import PoseOutOfBounds


def box(cx: float, cy: float, w: float, h: float) -> list[tuple[float, float, float, float]]:
    """Four segments outlining an axis-aligned rectangle centred at (cx, cy)."""
    x0, x1, y0, y1 = cx - w / 2, cx + w / 2, cy - h / 2, cy + h / 2
    return [(x0, y0, x1, y0), (x1, y0, x1, y1), (x1, y1, x0, y1), (x0, y1, x0, y0)]


def polyline(points) -> list[tuple[float, float, float, float]]:
    pts = list(points)
    return [(a[0], a[1], b[0], b[1]) for a, b in zip(pts, pts[1:])]


@dataclass
class WorldModel:
    """Walls and obstacles as segments ``(x1, y1, x2, y2)`` plus GPS coverage."""

    segments: np.ndarray = field(default_factory=lambda: np.zeros((0, 4)))
    gps_regions: list[np.ndarray] = field(default_factory=list)
    bounds: tuple[float, float, float, float] = (-50.0, -50.0, 50.0, 50.0)

    def __post_init__(self):
        seg = np.asarray(self.segments, dtype=float).reshape(-1, 4)
        if not np.all(np.isfinite(seg)):
            raise ValueError("segments must be finite")
        lengths = np.hypot(seg[:, 2] - seg[:, 0], seg[:, 3] - seg[:, 1])
        if np.any(lengths <= 1e-6):
            raise ValueError("degenerate segment (length <= 1e-6 m)")
        self.segments = seg
        self.gps_regions = [np.asarray(p, dtype=float).reshape(-1, 2) for p in self.gps_regions]
        xmin, ymin, xmax, ymax = self.bounds
        if not (xmax > xmin and ymax > ymin):
            raise ValueError("empty world bounds")

    def contains(self, x: float, y: float) -> bool:
        xmin, ymin, xmax, ymax = self.bounds
        return xmin <= x <= xmax and ymin <= y <= ymax

    def check_pose(self, pose) -> None:
        if not self.contains(pose[0], pose[1]):
            raise PoseOutOfBounds(f"pose {tuple(pose[:2])} outside world bounds {self.bounds}")

    def gps_available(self, x: float, y: float) -> bool:
        return any(point_in_convex(p, x, y) for p in self.gps_regions)

    def mirrored(self) -> "WorldModel":
        """Reflection across the x-axis."""
        seg = self.segments * np.array([1.0, -1.0, 1.0, -1.0])
        xmin, ymin, xmax, ymax = self.bounds
        regions = [p * np.array([1.0, -1.0]) for p in self.gps_regions]
        return WorldModel(seg, regions, (xmin, -ymax, xmax, -ymin))


def point_in_convex(poly: np.ndarray, x: float, y: float) -> bool:
    """Containment in a convex polygon of either winding (boundary counts as inside)."""
    p = poly
    q = np.roll(poly, -1, axis=0)
    cross = (q[:, 0] - p[:, 0]) * (y - p[:, 1]) - (q[:, 1] - p[:, 1]) * (x - p[:, 0])
    return bool(np.all(cross >= 0) or np.all(cross <= 0))


def raycast(x: float, y: float, angles: np.ndarray, segments: np.ndarray) -> np.ndarray:
    """Distance along each absolute ray direction to the nearest segment (inf if none)."""
    angles = np.asarray(angles, dtype=float)
    if len(segments) == 0:
        return np.full(angles.shape, np.inf)
    dx = np.cos(angles)[:, None]
    dy = np.sin(angles)[:, None]
    px = segments[:, 0] - x
    py = segments[:, 1] - y
    ex = segments[:, 2] - segments[:, 0]
    ey = segments[:, 3] - segments[:, 1]
    denom = dx * ey - dy * ex
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (px * ey - py * ex) / denom
        u = (px * dy - py * dx) / denom
    hit = (denom != 0) & (t > 0) & (u >= 0) & (u <= 1)
    t = np.where(hit, t, np.inf)
    return t.min(axis=1)


def distance_to_segments(x: float, y: float, segments: np.ndarray) -> float:
    """Euclidean distance from a point to the nearest segment."""
    if len(segments) == 0:
        return float("inf")
    ax, ay, bx, by = segments.T
    ex, ey = bx - ax, by - ay
    u = np.clip(((x - ax) * ex + (y - ay) * ey) / (ex * ex + ey * ey), 0.0, 1.0)
    return float(np.min(np.hypot(ax + u * ex - x, ay + u * ey - y)))
