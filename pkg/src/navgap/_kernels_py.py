"""Pure-Python implementations of the hot kernels.

These mirror ``_kernels.pyx`` operation for operation so both backends
produce bit-identical floats on the same inputs.
"""
import heapq
import math

import numpy as np

BACKEND = "python"

_TINY = 1e-12


def _clean(v):
    return 0.0 if abs(v) < _TINY else v


def raycast(obstacle, cells, resolution, x, y, angles, max_range):
    """Grid traversal (Amanatides-Woo) for every ray angle.

    Returns ``(depth, hit)`` where ``hit`` is the category id of the first
    obstacle cell or -1 when nothing is hit within ``max_range``.
    """
    ny, nx = obstacle.shape
    n = len(angles)
    depth = np.empty(n, dtype=np.float64)
    hit = np.empty(n, dtype=np.int64)
    ix0 = int(math.floor(x / resolution))
    iy0 = int(math.floor(y / resolution))
    ang = np.asarray(angles, dtype=np.float64)
    cs = np.cos(ang)
    sn = np.sin(ang)
    for k in range(n):
        dx = _clean(float(cs[k]))
        dy = _clean(float(sn[k]))
        ix = ix0
        iy = iy0
        sx = 1 if dx > 0 else -1
        sy = 1 if dy > 0 else -1
        t = 0.0
        d = max_range
        h = -1
        while True:
            if dx != 0.0:
                tx = ((ix + (1 if sx > 0 else 0)) * resolution - x) / dx
            else:
                tx = math.inf
            if dy != 0.0:
                ty = ((iy + (1 if sy > 0 else 0)) * resolution - y) / dy
            else:
                ty = math.inf
            if tx <= ty:
                t = tx
                ix += sx
            else:
                t = ty
                iy += sy
            if t > max_range:
                break
            if ix < 0 or iy < 0 or ix >= nx or iy >= ny:
                break
            if obstacle[iy, ix]:
                d = t
                h = int(cells[iy, ix])
                break
        depth[k] = d
        hit[k] = h
    return depth, hit


def _seg_box_dist2(x0, y0, x1, y1, bx0, by0, bx1, by1):
    # squared distance between segment and axis-aligned box; 0 if they intersect
    ddx = x1 - x0
    ddy = y1 - y0
    t0 = 0.0
    t1 = 1.0
    inside = True
    for p, q in ((-ddx, x0 - bx0), (ddx, bx1 - x0), (-ddy, y0 - by0), (ddy, by1 - y0)):
        if p == 0.0:
            if q < 0.0:
                inside = False
                break
        else:
            r = q / p
            if p < 0.0:
                if r > t1:
                    inside = False
                    break
                if r > t0:
                    t0 = r
            else:
                if r < t0:
                    inside = False
                    break
                if r < t1:
                    t1 = r
    if inside:
        return 0.0
    best = math.inf
    # segment endpoints against the box
    for px, py in ((x0, y0), (x1, y1)):
        cx = min(max(px, bx0), bx1)
        cy = min(max(py, by0), by1)
        d2 = (px - cx) ** 2 + (py - cy) ** 2
        if d2 < best:
            best = d2
    # box corners against the segment
    L2 = ddx * ddx + ddy * ddy
    for cx, cy in ((bx0, by0), (bx1, by0), (bx0, by1), (bx1, by1)):
        if L2 > 0.0:
            u = ((cx - x0) * ddx + (cy - y0) * ddy) / L2
            u = min(max(u, 0.0), 1.0)
        else:
            u = 0.0
        px = x0 + u * ddx
        py = y0 + u * ddy
        d2 = (px - cx) ** 2 + (py - cy) ** 2
        if d2 < best:
            best = d2
    return best


def swept_collision(obstacle, resolution, x0, y0, x1, y1, radius):
    """True if a disk of ``radius`` swept from (x0, y0) to (x1, y1) overlaps an obstacle cell.

    Cells outside the grid count as obstacles.
    """
    ny, nx = obstacle.shape
    r2 = radius * radius
    i_lo = int(math.floor((min(x0, x1) - radius) / resolution))
    i_hi = int(math.floor((max(x0, x1) + radius) / resolution))
    j_lo = int(math.floor((min(y0, y1) - radius) / resolution))
    j_hi = int(math.floor((max(y0, y1) + radius) / resolution))
    for j in range(j_lo, j_hi + 1):
        for i in range(i_lo, i_hi + 1):
            if 0 <= i < nx and 0 <= j < ny and not obstacle[j, i]:
                continue
            d2 = _seg_box_dist2(x0, y0, x1, y1, i * resolution, j * resolution,
                                (i + 1) * resolution, (j + 1) * resolution)
            if d2 < r2:
                return True
    return False


def forward_edges(obstacle, resolution, radius):
    """Validity of a one-cell move from each cell center in the four axis directions.

    Returns uint8 array ``[ny, nx, 4]``; direction index 0:+x, 1:+y, 2:-x, 3:-y.
    """
    ny, nx = obstacle.shape
    out = np.zeros((ny, nx, 4), dtype=np.uint8)
    steps = ((1, 0), (0, 1), (-1, 0), (0, -1))
    for j in range(ny):
        for i in range(nx):
            if obstacle[j, i]:
                continue
            cx = (i + 0.5) * resolution
            cy = (j + 0.5) * resolution
            for d in range(4):
                ex = cx + steps[d][0] * resolution
                ey = cy + steps[d][1] * resolution
                if not swept_collision(obstacle, resolution, cx, cy, ex, ey, radius):
                    out[j, i, d] = 1
    return out


def cost_to_go(state_ok, fwd_ok, goal_mask, n_headings, fwd_cost, turn_cost):
    """Backward uniform-cost search from every goal state on the (cell, heading) lattice.

    Forward moves exist only at axis-aligned headings (``h % (n_headings // 4) == 0``).
    Returns int64 array ``[ny, nx, n_headings]`` with -1 for unreachable states.
    """
    ny, nx = state_ok.shape
    H = n_headings
    q = H // 4
    INF = -1
    dist = np.full((ny, nx, H), INF, dtype=np.int64)
    heap = []
    for j in range(ny):
        for i in range(nx):
            if goal_mask[j, i] and state_ok[j, i]:
                for h in range(H):
                    dist[j, i, h] = 0
                    heap.append((0, (j * nx + i) * H + h))
    heapq.heapify(heap)
    steps = ((1, 0), (0, 1), (-1, 0), (0, -1))
    while heap:
        dcur, s = heapq.heappop(heap)
        h = s % H
        c = s // H
        i = c % nx
        j = c // nx
        if dist[j, i, h] != dcur:
            continue
        # predecessor by TurnLeft: (h - 1) -> h
        hp = (h - 1) % H
        nd = dcur + turn_cost
        old = dist[j, i, hp]
        if old == INF or nd < old:
            dist[j, i, hp] = nd
            heapq.heappush(heap, (nd, c * H + hp))
        # predecessor by TurnRight: (h + 1) -> h
        hp = (h + 1) % H
        old = dist[j, i, hp]
        if old == INF or nd < old:
            dist[j, i, hp] = nd
            heapq.heappush(heap, (nd, c * H + hp))
        # predecessor by GoForward
        if h % q == 0:
            d = h // q
            pi = i - steps[d][0]
            pj = j - steps[d][1]
            if 0 <= pi < nx and 0 <= pj < ny and state_ok[pj, pi] and fwd_ok[pj, pi, d]:
                nd = dcur + fwd_cost
                old = dist[pj, pi, h]
                if old == INF or nd < old:
                    dist[pj, pi, h] = nd
                    heapq.heappush(heap, (nd, (pj * nx + pi) * H + h))
    return dist
