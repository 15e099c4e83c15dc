"""Independent reference computations shared by the unit and acceptance tests."""
import math

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra


def rope_oracle(theta, l1, l2):
    """Rope length by the law of cosines on the triangle anchor-hip-attachment."""
    a = math.hypot(*l1)
    b = math.hypot(*l2)
    # angle between R(theta) l1 and -l2 at the hip
    phi = theta + math.atan2(l1[1], l1[0]) - math.atan2(-l2[1], -l2[0])
    return math.sqrt(max(a * a + b * b - 2 * a * b * math.cos(phi), 0.0))


def march(x, y, a, segs, stop=5e-4, step=1e-3, max_range=17.0):
    """First 1 mm sample along the ray that comes within ``stop`` of a wall."""
    d = np.arange(0.0, max_range, step)
    px, py = x + d * math.cos(a), y + d * math.sin(a)
    ax, ay, bx, by = (segs[:, k][:, None] for k in range(4))
    ex, ey = bx - ax, by - ay
    u = np.clip(((px - ax) * ex + (py - ay) * ey) / (ex * ex + ey * ey), 0.0, 1.0)
    dist = np.hypot(ax + u * ex - px, ay + u * ey - py).min(axis=0)
    close = np.flatnonzero(dist < stop)
    return d[close[0]] if close.size else math.inf


def dijkstra_cost(blocked: np.ndarray, start, goal) -> float:
    """8-connected shortest path length in cells via scipy's Dijkstra."""
    ny, nx = blocked.shape
    rr, cc = np.nonzero(~blocked)
    rows, cols, w = [], [], []
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr == dc == 0:
                continue
            r2, c2 = rr + dr, cc + dc
            ok = (r2 >= 0) & (r2 < ny) & (c2 >= 0) & (c2 < nx)
            ok[ok] = ~blocked[r2[ok], c2[ok]]
            rows.append(rr[ok] * nx + cc[ok])
            cols.append(r2[ok] * nx + c2[ok])
            w.append(np.full(ok.sum(), math.hypot(dr, dc)))
    m = coo_matrix((np.concatenate(w), (np.concatenate(rows), np.concatenate(cols))), shape=(nx * ny,) * 2)
    return float(dijkstra(m.tocsr(), indices=start[0] * nx + start[1])[goal[0] * nx + goal[1]])


def truth_events(states):
    """Heel strikes recorded by the simulated walker."""
    return [e for x in states[1:] for e in x.events]
