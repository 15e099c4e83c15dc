"""Log-odds occupancy grid, ray tracing and correlative scan matching."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DegenerateScan
from .sensors import ScanFrame

L_FREE = 0.4
L_OCC = 0.85
L_CLAMP = 5.0
UNKNOWN_BAND = 0.1


@dataclass
class OccupancyGrid:
    """Row ``iy``, column ``ix`` covers ``origin + (ix, iy) * resolution`` upwards."""

    resolution: float
    origin: tuple[float, float]
    log_odds: np.ndarray

    @classmethod
    def covering(cls, bounds, resolution: float = 0.10, margin: float = 0.0) -> "OccupancyGrid":
        xmin, ymin, xmax, ymax = bounds
        xmin, ymin, xmax, ymax = xmin - margin, ymin - margin, xmax + margin, ymax + margin
        nx = int(math.ceil((xmax - xmin) / resolution - 1e-9))
        ny = int(math.ceil((ymax - ymin) / resolution - 1e-9))
        return cls(resolution, (float(xmin), float(ymin)), np.zeros((ny, nx)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.log_odds.shape

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(self.resolution, self.origin, self.log_odds.copy())

    def to_cell(self, x, y):
        ix = np.floor((np.asarray(x) - self.origin[0]) / self.resolution).astype(int)
        iy = np.floor((np.asarray(y) - self.origin[1]) / self.resolution).astype(int)
        return ix, iy

    def cell_center(self, ix, iy):
        return (
            self.origin[0] + (np.asarray(ix) + 0.5) * self.resolution,
            self.origin[1] + (np.asarray(iy) + 0.5) * self.resolution,
        )

    def inside(self, ix, iy):
        ny, nx = self.shape
        return (ix >= 0) & (ix < nx) & (iy >= 0) & (iy < ny)

    def occupied(self) -> np.ndarray:
        return self.log_odds > 0.0


def bresenham(x0: int, y0: int, x1: int, y1: int) -> list[tuple[int, int]]:
    """Integer line from (x0, y0) to (x1, y1), both ends included.

    Classic decision-variable form; the minor coordinate only advances when
    the line is strictly past the half-cell mark.
    """
    dx, dy = x1 - x0, y1 - y0
    sx, sy = (1 if dx > 0 else -1), (1 if dy > 0 else -1)
    adx, ady = abs(dx), abs(dy)
    x_major = adx >= ady
    major, minor = (adx, ady) if x_major else (ady, adx)
    d = 2 * minor - major
    a = b = 0
    out = []
    for _ in range(major + 1):
        out.append((x0 + sx * a, y0 + sy * b) if x_major else (x0 + sx * b, y0 + sy * a))
        if d > 0:
            b += 1
            d -= 2 * major
        d += 2 * minor
        a += 1
    return out


def trace_cells(x0: int, y0: int, x1: np.ndarray, y1: np.ndarray):
    """Cells of every line from (x0, y0) to (x1[k], y1[k]), end cells excluded.

    Vectorised equivalent of :func:`bresenham`; returns flat ``(ix, iy)``.
    """
    x1 = np.asarray(x1, dtype=np.int64)
    y1 = np.asarray(y1, dtype=np.int64)
    dx, dy = x1 - x0, y1 - y0
    adx, ady = np.abs(dx), np.abs(dy)
    n = np.maximum(adx, ady)
    if n.size == 0 or n.max() == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    i = np.arange(n.max())[None, :]
    keep = i < n[:, None]
    xm = adx >= ady
    major = np.maximum(np.where(xm, adx, ady), 1)[:, None]
    minor = np.where(xm, ady, adx)[:, None]
    major_x = xm[:, None]
    # the minor coordinate is i * minor / major rounded, halves rounding down
    off = (2 * i * minor + major - 1) // (2 * major)
    sxv = np.sign(dx)[:, None]
    syv = np.sign(dy)[:, None]
    ix = np.where(major_x, x0 + i * sxv, x0 + off * sxv)
    iy = np.where(major_x, y0 + off * syv, y0 + i * syv)
    return ix[keep], iy[keep]


def scan_endpoints(pose, scan: ScanFrame):
    mask = scan.valid
    r = scan.ranges[mask]
    a = pose[2] + scan.angles[mask]
    return pose[0] + r * np.cos(a), pose[1] + r * np.sin(a)


def update_occupancy(
    grid: OccupancyGrid,
    pose_hat,
    scan: ScanFrame,
    l_free: float = L_FREE,
    l_occ: float = L_OCC,
    clamp: float = L_CLAMP,
) -> OccupancyGrid:
    """Integrate one scan in place and return the grid.

    Each cell is touched at most once per scan: traced cells lose ``l_free``,
    endpoint cells gain ``l_occ`` (an endpoint wins over a traversal).
    Beams without a return are ignored.
    """
    ex, ey = scan_endpoints(pose_hat, scan)
    if ex.size == 0:
        return grid
    ny, nx = grid.shape
    sx, sy = grid.to_cell(pose_hat[0], pose_hat[1])
    hx, hy = grid.to_cell(ex, ey)
    fx, fy = trace_cells(int(sx), int(sy), hx, hy)
    fin = grid.inside(fx, fy)
    hin = grid.inside(hx, hy)
    free = np.unique(fy[fin] * nx + fx[fin])
    hit = np.unique(hy[hin] * nx + hx[hin])
    free = np.setdiff1d(free, hit, assume_unique=True)
    flat = grid.log_odds.reshape(-1)
    flat[free] -= l_free
    flat[hit] += l_occ
    np.clip(flat, -clamp, clamp, out=flat)
    return grid


def _offsets(half: float, step: float) -> np.ndarray:
    n = int(round(half / step))
    return np.arange(-n, n + 1) * step


def localize(
    grid: OccupancyGrid,
    odom_prior_pose,
    scan: ScanFrame,
    xy_half: float = 0.2,
    xy_step: float = 0.05,
    th_half: float = math.radians(10.0),
    th_step: float = math.radians(2.0),
    min_beams: int = 10,
    beam_stride: int = 1,
):
    """Exhaustive correlative match of ``scan`` around the prior.

    Each candidate scores the summed log-odds of the cells under its beam
    endpoints.  Among equal best scores the smallest rotation, then the
    smallest ``|dx| + |dy|``, wins.  Returns ``(pose, confidence)`` where
    confidence is the best score's margin over the mean candidate score,
    divided by the full score range ``2 * n_valid * clamp``.  Only every
    ``beam_stride``-th beam is scored.
    """
    mask = scan.valid.copy()
    if beam_stride > 1:
        mask[np.arange(scan.n_beams) % beam_stride != 0] = False
    n_valid = int(mask.sum())
    if n_valid < min_beams:
        raise DegenerateScan(f"only {n_valid} valid beams")
    x0, y0, h0 = odom_prior_pose
    r = scan.ranges[mask]
    rel = scan.angles[mask]
    dxy = _offsets(xy_half, xy_step)
    dth = _offsets(th_half, th_step)
    gx, gy = np.meshgrid(dxy, dxy, indexing="ij")
    gx, gy = gx.reshape(-1), gy.reshape(-1)
    ny, nx = grid.shape
    padded = np.pad(grid.log_odds, 1)  # out-of-grid endpoints score zero
    res = grid.resolution
    scores = np.empty((len(dth), len(gx)))
    for k, d in enumerate(dth):
        a = h0 + d + rel
        px = x0 + r * np.cos(a) - grid.origin[0]
        py = y0 + r * np.sin(a) - grid.origin[1]
        ix = np.floor((px[None, :] + gx[:, None]) / res).astype(np.int64) + 1
        iy = np.floor((py[None, :] + gy[:, None]) / res).astype(np.int64) + 1
        np.clip(ix, 0, nx + 1, out=ix)
        np.clip(iy, 0, ny + 1, out=iy)
        scores[k] = padded[iy, ix].sum(axis=1)
    th_key = np.abs(dth)[:, None] * np.ones_like(gx)[None, :]
    xy_key = np.ones_like(dth)[:, None] * (np.abs(gx) + np.abs(gy))[None, :]
    flat = scores.reshape(-1)
    best = flat.max()
    tied = np.flatnonzero(flat >= best - 1e-9)
    order = np.lexsort((xy_key.reshape(-1)[tied], th_key.reshape(-1)[tied]))
    pick = tied[order[0]]
    k, j = divmod(int(pick), len(gx))
    margin = best - float(flat.mean())
    confidence = float(np.clip(margin / (2.0 * n_valid * L_CLAMP), 0.0, 1.0))
    return (x0 + float(gx[j]), y0 + float(gy[j]), h0 + float(dth[k])), confidence


def rasterize_segments(grid: OccupancyGrid, segments: np.ndarray) -> np.ndarray:
    """Boolean mask of the cells crossed by the given segments."""
    mask = np.zeros(grid.shape, dtype=bool)
    step = grid.resolution / 4.0
    for x1, y1, x2, y2 in np.asarray(segments).reshape(-1, 4):
        n = max(2, int(math.ceil(math.hypot(x2 - x1, y2 - y1) / step)) + 1)
        s = np.linspace(0.0, 1.0, n)
        ix, iy = grid.to_cell(x1 + s * (x2 - x1), y1 + s * (y2 - y1))
        ok = grid.inside(ix, iy)
        mask[iy[ok], ix[ok]] = True
    return mask


def to_pgm_bytes(grid: OccupancyGrid) -> bytes:
    """Binary PGM (P5): 255 free, 0 occupied, 128 unknown; top row is max y."""
    lo = grid.log_odds
    img = np.full(lo.shape, 128, dtype=np.uint8)
    img[lo >= UNKNOWN_BAND] = 0
    img[lo <= -UNKNOWN_BAND] = 255
    img = img[::-1]
    ny, nx = img.shape
    return f"P5\n{nx} {ny}\n255\n".encode("ascii") + img.tobytes()


def export_pgm(grid: OccupancyGrid, path) -> tuple[Path, Path]:
    """Write ``<path>.pgm`` and a ``.yaml`` sidecar holding resolution and origin."""
    path = Path(path)
    pgm = path.with_suffix(".pgm")
    side = path.with_suffix(".yaml")
    pgm.write_bytes(to_pgm_bytes(grid))
    side.write_text(
        f"image: {pgm.name}\n"
        f"resolution: {grid.resolution}\n"
        f"origin: [{grid.origin[0]}, {grid.origin[1]}, 0.0]\n"
        f"free_thresh: {-UNKNOWN_BAND}\noccupied_thresh: {UNKNOWN_BAND}\n"
    )
    return pgm, side


def read_pgm(path) -> np.ndarray:
    """Read a P5 image written by :func:`export_pgm` (top row first)."""
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM")
    nx, ny = (int(v) for v in parts[1].split())
    return np.frombuffer(parts[3], dtype=np.uint8).reshape(ny, nx)
