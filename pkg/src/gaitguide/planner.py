"""Grid path planning, waypoint following and reactive obstacle avoidance."""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DegenerateScan, GoalBlocked, NoPath, PathExhausted, PoseOutOfBounds, StartBlocked
from .gait_model import wrap_angle
from .world_sense.grid import OccupancyGrid
from .world_sense.sensors import ScanFrame

SQRT2 = math.sqrt(2.0)
# (drow, dcol, length in cells)
_MOVES = (
    (-1, -1, SQRT2), (-1, 0, 1.0), (-1, 1, SQRT2),
    (0, -1, 1.0), (0, 1, 1.0),
    (1, -1, SQRT2), (1, 0, 1.0), (1, 1, SQRT2),
)


@dataclass(frozen=True)
class PlannedPath:
    waypoints: tuple[tuple[float, float], ...]
    total_cost: float

    def __post_init__(self):
        if not self.waypoints:
            raise ValueError("a path needs at least one waypoint")

    def __len__(self) -> int:
        return len(self.waypoints)

    @property
    def goal(self) -> tuple[float, float]:
        return self.waypoints[-1]


def path_length(points) -> float:
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) < 2:
        return 0.0
    return math.fsum(np.hypot(*np.diff(pts, axis=0).T))


def inflate(grid: OccupancyGrid, radius: float) -> np.ndarray:
    """Cells within ``radius`` (centre to centre) of an occupied cell."""
    occ = grid.occupied()
    r = int(math.floor(radius / grid.resolution + 1e-9))
    if r <= 0 or not occ.any():
        return occ
    yy, xx = np.mgrid[-r : r + 1, -r : r + 1]
    disk = (xx * xx + yy * yy) * grid.resolution**2 <= radius * radius + 1e-12
    return ndimage.binary_dilation(occ, structure=disk)


def _cell(grid: OccupancyGrid, p, err):
    ix, iy = grid.to_cell(p[0], p[1])
    ix, iy = int(ix), int(iy)
    if not grid.inside(ix, iy):
        raise PoseOutOfBounds(f"{err} {tuple(p[:2])} outside the grid")
    return iy, ix


def _astar(blocked: np.ndarray, start, goal) -> list[tuple[int, int]] | None:
    ny, nx = blocked.shape
    gr, gc = goal
    g_best = np.full(blocked.shape, np.inf)
    parent = {}
    closed = np.zeros(blocked.shape, dtype=bool)
    g_best[start] = 0.0
    # ties: larger g first, then row-major cell order
    heap = [(math.hypot(start[0] - gr, start[1] - gc), -0.0, start[0], start[1])]
    while heap:
        _, neg_g, r, c = heapq.heappop(heap)
        if closed[r, c]:
            continue
        closed[r, c] = True
        if (r, c) == goal:
            path = [(r, c)]
            while path[-1] != start:
                path.append(parent[path[-1]])
            return path[::-1]
        g = -neg_g
        for dr, dc, w in _MOVES:
            rr, cc = r + dr, c + dc
            if not (0 <= rr < ny and 0 <= cc < nx) or blocked[rr, cc] or closed[rr, cc]:
                continue
            ng = g + w
            if ng < g_best[rr, cc]:
                g_best[rr, cc] = ng
                parent[(rr, cc)] = (r, c)
                heapq.heappush(heap, (ng + math.hypot(rr - gr, cc - gc), -ng, rr, cc))
    return None


def plan_path(grid: OccupancyGrid, start, goal, inflation_radius: float = 0.35) -> PlannedPath:
    """Optimal 8-connected A* between the cells holding ``start`` and ``goal``.

    Cells with positive log-odds, dilated by ``inflation_radius``, are
    blocked; unknown cells are traversable.  Waypoints are cell centres.
    """
    blocked = inflate(grid, inflation_radius)
    s = _cell(grid, start, "start")
    g = _cell(grid, goal, "goal")
    if blocked[s]:
        raise StartBlocked(f"start {tuple(start[:2])} is inside inflated obstacles")
    if blocked[g]:
        raise GoalBlocked(f"goal {tuple(goal[:2])} is inside inflated obstacles")
    cells = _astar(blocked, s, g)
    if cells is None:
        raise NoPath(f"no path from {tuple(start[:2])} to {tuple(goal[:2])}")
    rows = np.array([rc[0] for rc in cells])
    cols = np.array([rc[1] for rc in cells])
    xs, ys = grid.cell_center(cols, rows)
    wps = tuple((float(x), float(y)) for x, y in zip(xs, ys))
    return PlannedPath(wps, path_length(wps))


def path_blocked(grid: OccupancyGrid, path: PlannedPath, inflation_radius: float = 0.35) -> bool:
    """True if any waypoint now lies in inflated occupied space."""
    blocked = inflate(grid, inflation_radius)
    pts = np.asarray(path.waypoints)
    ix, iy = grid.to_cell(pts[:, 0], pts[:, 1])
    ok = grid.inside(ix, iy)
    return bool(blocked[iy[ok], ix[ok]].any())


class _Blocked:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "Blocked"

    def __bool__(self) -> bool:
        return False


Blocked = _Blocked()


def clearance_mask(scan: ScanFrame, headings: np.ndarray, d_safe: float, corridor: float) -> np.ndarray:
    """Admissibility of each candidate heading relative to the sensor frame.

    A beam of range ``r < d_safe`` blocks every candidate within
    ``atan(corridor / (2 r))`` of its bearing, i.e. it lies inside a
    corridor of width ``corridor`` along that candidate.
    """
    r = scan.ranges
    near = r < d_safe
    if not near.any():
        return np.ones(len(headings), dtype=bool)
    a = scan.angles[near]
    half = np.arctan2(corridor / 2.0, r[near])
    diff = np.abs(np.remainder(headings[:, None] - a[None, :] + math.pi, 2.0 * math.pi) - math.pi)
    return ~np.any(diff <= half[None, :], axis=1)


def avoid_obstacles(
    scan: ScanFrame,
    desired_heading: float,
    d_safe: float = 1.0,
    corridor: float = 0.6,
    heading: float = 0.0,
):
    """Gap-based heading choice from one scan.

    Headings are absolute; ``heading`` is the sensor's own heading.  The
    candidates are the desired heading and every beam bearing.  Returns
    the admissible candidate closest to ``desired_heading`` (ties go to the
    side of the desired offset from ``heading``, left when it is zero), or
    :data:`Blocked` when none is admissible.
    """
    if scan.n_beams == 0 or np.any(np.isnan(scan.ranges)):
        raise DegenerateScan("scan has no beams or NaN ranges")
    rel_desired = wrap_angle(desired_heading - heading)
    if clearance_mask(scan, np.array([rel_desired]), d_safe, corridor)[0]:
        return desired_heading
    cand = scan.angles
    ok = clearance_mask(scan, cand, d_safe, corridor)
    if not ok.any():
        return Blocked
    cand = cand[ok]
    dev = wrap_angle(cand - rel_desired)
    cost = np.round(np.abs(dev), 12)
    best = np.flatnonzero(cost == cost.min())
    if len(best) > 1:
        side = 1.0 if rel_desired >= 0 else -1.0
        pref = [i for i in best if np.sign(cand[i]) == side]
        best = pref or list(best)
    return wrap_angle(heading + float(cand[best[0]]))


class WaypointFollower:
    """Pure-pursuit style follower with a monotone waypoint index.

    The index first jumps to the nearest waypoint within ``window`` metres
    of path length ahead (so a walker pushed off the path does not circle a
    waypoint it has already passed, while a path that loops back near itself
    is not short-cut), then skips every waypoint within ``capture_radius``.
    """

    def __init__(self, path: PlannedPath, capture_radius: float = 0.5, window: float = 2.0):
        if len(path) == 0:
            raise ValueError("empty path")
        self.path = path
        self.capture_radius = capture_radius
        self.window = window
        self.index = 0
        self._wps = np.asarray(path.waypoints, dtype=float)
        seg = np.hypot(*np.diff(self._wps, axis=0).T) if len(self._wps) > 1 else np.zeros(0)
        self._arc = np.concatenate([[0.0], np.cumsum(seg)])

    def target_heading(self, pose_hat) -> float:
        x, y = pose_hat[0], pose_hat[1]
        wps = self._wps
        gx, gy = wps[-1]
        if math.hypot(gx - x, gy - y) <= self.capture_radius:
            raise PathExhausted("arrived within capture radius of the goal")
        d = np.hypot(wps[self.index :, 0] - x, wps[self.index :, 1] - y)
        # the next waypoint is always a candidate, however far it is
        n_win = max(2, int(np.searchsorted(self._arc, self._arc[self.index] + self.window, side="right")) - self.index)
        j = int(np.argmin(d[:n_win]))
        far = np.flatnonzero(d[j:] > self.capture_radius)
        self.index += j + (int(far[0]) if far.size else len(d) - 1 - j)
        tx, ty = wps[self.index]
        return math.atan2(ty - y, tx - x)


def follow_waypoints(path: PlannedPath, pose_hat, capture_radius: float = 0.5, follower: WaypointFollower | None = None) -> float:
    """Target heading for ``pose_hat``; pass a ``follower`` to keep progress between calls."""
    if follower is None:
        follower = WaypointFollower(path, capture_radius)
    return follower.target_heading(pose_hat)
