# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the grid kernels in ``_kernels_py``.

Arithmetic follows ``_kernels_py`` step for step; the two backends are
expected to agree bit for bit.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor, fabs, INFINITY
from libc.stdlib cimport malloc, realloc, free

cnp.import_array()

BACKEND = "cython"

cdef double _TINY = 1e-12


cdef inline double _clean(double v) noexcept nogil:
    if fabs(v) < _TINY:
        return 0.0
    return v


def raycast(obstacle, cells, double resolution, double x, double y, angles, double max_range):
    cdef const cnp.uint8_t[:, :] obs = np.ascontiguousarray(obstacle, dtype=np.uint8)
    cdef const cnp.int16_t[:, :] cat = np.ascontiguousarray(cells, dtype=np.int16)
    # trig via numpy in both backends so they see identical direction vectors
    ang_arr = np.ascontiguousarray(angles, dtype=np.float64)
    cdef const double[:] cs = np.cos(ang_arr)
    cdef const double[:] sn = np.sin(ang_arr)
    cdef Py_ssize_t n = cs.shape[0]
    cdef Py_ssize_t ny = obs.shape[0]
    cdef Py_ssize_t nx = obs.shape[1]
    depth_arr = np.empty(n, dtype=np.float64)
    hit_arr = np.empty(n, dtype=np.int64)
    cdef double[:] depth = depth_arr
    cdef cnp.int64_t[:] hit = hit_arr
    cdef Py_ssize_t ix0 = <Py_ssize_t>floor(x / resolution)
    cdef Py_ssize_t iy0 = <Py_ssize_t>floor(y / resolution)
    cdef Py_ssize_t k, ix, iy
    cdef int sx, sy
    cdef double dx, dy, t, tx, ty, d
    cdef cnp.int64_t h
    with nogil:
        for k in range(n):
            dx = _clean(cs[k])
            dy = _clean(sn[k])
            ix = ix0
            iy = iy0
            sx = 1 if dx > 0 else -1
            sy = 1 if dy > 0 else -1
            d = max_range
            h = -1
            while True:
                if dx != 0.0:
                    tx = ((ix + (1 if sx > 0 else 0)) * resolution - x) / dx
                else:
                    tx = INFINITY
                if dy != 0.0:
                    ty = ((iy + (1 if sy > 0 else 0)) * resolution - y) / dy
                else:
                    ty = INFINITY
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
                if obs[iy, ix]:
                    d = t
                    h = cat[iy, ix]
                    break
            depth[k] = d
            hit[k] = h
    return depth_arr, hit_arr


cdef inline double _dmin(double a, double b) noexcept nogil:
    return a if a < b else b


cdef inline double _dmax(double a, double b) noexcept nogil:
    return a if a > b else b


cdef double _seg_box_dist2(double x0, double y0, double x1, double y1,
                           double bx0, double by0, double bx1, double by1) nogil:
    cdef double ddx = x1 - x0
    cdef double ddy = y1 - y0
    cdef double t0 = 0.0
    cdef double t1 = 1.0
    cdef bint inside = True
    cdef double ps[4]
    cdef double qs[4]
    cdef int m
    cdef double p, q, r
    ps[0] = -ddx; qs[0] = x0 - bx0
    ps[1] = ddx; qs[1] = bx1 - x0
    ps[2] = -ddy; qs[2] = y0 - by0
    ps[3] = ddy; qs[3] = by1 - y0
    for m in range(4):
        p = ps[m]
        q = qs[m]
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
    cdef double best = INFINITY
    cdef double px, py, cx, cy, d2, u, L2
    cdef double ex[2]
    cdef double ey[2]
    ex[0] = x0; ey[0] = y0
    ex[1] = x1; ey[1] = y1
    for m in range(2):
        px = ex[m]
        py = ey[m]
        cx = _dmin(_dmax(px, bx0), bx1)
        cy = _dmin(_dmax(py, by0), by1)
        d2 = (px - cx) * (px - cx) + (py - cy) * (py - cy)
        if d2 < best:
            best = d2
    L2 = ddx * ddx + ddy * ddy
    cdef double kx[4]
    cdef double ky[4]
    kx[0] = bx0; ky[0] = by0
    kx[1] = bx1; ky[1] = by0
    kx[2] = bx0; ky[2] = by1
    kx[3] = bx1; ky[3] = by1
    for m in range(4):
        cx = kx[m]
        cy = ky[m]
        if L2 > 0.0:
            u = ((cx - x0) * ddx + (cy - y0) * ddy) / L2
            u = _dmin(_dmax(u, 0.0), 1.0)
        else:
            u = 0.0
        px = x0 + u * ddx
        py = y0 + u * ddy
        d2 = (px - cx) * (px - cx) + (py - cy) * (py - cy)
        if d2 < best:
            best = d2
    return best


cdef bint _swept(const cnp.uint8_t[:, :] obs, double resolution, double x0, double y0,
                 double x1, double y1, double radius) nogil:
    cdef Py_ssize_t ny = obs.shape[0]
    cdef Py_ssize_t nx = obs.shape[1]
    cdef double r2 = radius * radius
    cdef Py_ssize_t i_lo = <Py_ssize_t>floor((_dmin(x0, x1) - radius) / resolution)
    cdef Py_ssize_t i_hi = <Py_ssize_t>floor((_dmax(x0, x1) + radius) / resolution)
    cdef Py_ssize_t j_lo = <Py_ssize_t>floor((_dmin(y0, y1) - radius) / resolution)
    cdef Py_ssize_t j_hi = <Py_ssize_t>floor((_dmax(y0, y1) + radius) / resolution)
    cdef Py_ssize_t i, j
    for j in range(j_lo, j_hi + 1):
        for i in range(i_lo, i_hi + 1):
            if 0 <= i < nx and 0 <= j < ny and not obs[j, i]:
                continue
            if _seg_box_dist2(x0, y0, x1, y1, i * resolution, j * resolution,
                              (i + 1) * resolution, (j + 1) * resolution) < r2:
                return True
    return False


def swept_collision(obstacle, double resolution, double x0, double y0,
                    double x1, double y1, double radius):
    cdef const cnp.uint8_t[:, :] obs = np.ascontiguousarray(obstacle, dtype=np.uint8)
    return bool(_swept(obs, resolution, x0, y0, x1, y1, radius))


def forward_edges(obstacle, double resolution, double radius):
    cdef const cnp.uint8_t[:, :] obs = np.ascontiguousarray(obstacle, dtype=np.uint8)
    cdef Py_ssize_t ny = obs.shape[0]
    cdef Py_ssize_t nx = obs.shape[1]
    out_arr = np.zeros((ny, nx, 4), dtype=np.uint8)
    cdef cnp.uint8_t[:, :, :] out = out_arr
    cdef int sxs[4]
    cdef int sys_[4]
    sxs[0] = 1; sys_[0] = 0
    sxs[1] = 0; sys_[1] = 1
    sxs[2] = -1; sys_[2] = 0
    sxs[3] = 0; sys_[3] = -1
    cdef Py_ssize_t i, j
    cdef int d
    cdef double cx, cy
    with nogil:
        for j in range(ny):
            for i in range(nx):
                if obs[j, i]:
                    continue
                cx = (i + 0.5) * resolution
                cy = (j + 0.5) * resolution
                for d in range(4):
                    if not _swept(obs, resolution, cx, cy, cx + sxs[d] * resolution,
                                  cy + sys_[d] * resolution, radius):
                        out[j, i, d] = 1
    return out_arr


# binary min-heap keyed on (cost, state); ties resolve on state id like heapq tuples
cdef struct Heap:
    cnp.int64_t* key
    cnp.int64_t* val
    Py_ssize_t size
    Py_ssize_t cap


cdef inline bint _less(Heap* hp, Py_ssize_t a, Py_ssize_t b) noexcept nogil:
    if hp.key[a] != hp.key[b]:
        return hp.key[a] < hp.key[b]
    return hp.val[a] < hp.val[b]


cdef inline void _swap(Heap* hp, Py_ssize_t a, Py_ssize_t b) noexcept nogil:
    cdef cnp.int64_t k = hp.key[a]
    cdef cnp.int64_t v = hp.val[a]
    hp.key[a] = hp.key[b]
    hp.val[a] = hp.val[b]
    hp.key[b] = k
    hp.val[b] = v


cdef int _push(Heap* hp, cnp.int64_t k, cnp.int64_t v) noexcept nogil:
    cdef Py_ssize_t i, parent
    cdef cnp.int64_t* nk
    cdef cnp.int64_t* nv
    if hp.size == hp.cap:
        nk = <cnp.int64_t*>realloc(hp.key, 2 * hp.cap * sizeof(cnp.int64_t))
        if nk == NULL:
            return -1
        hp.key = nk
        nv = <cnp.int64_t*>realloc(hp.val, 2 * hp.cap * sizeof(cnp.int64_t))
        if nv == NULL:
            return -1
        hp.val = nv
        hp.cap *= 2
    i = hp.size
    hp.key[i] = k
    hp.val[i] = v
    hp.size += 1
    while i > 0:
        parent = (i - 1) // 2
        if _less(hp, i, parent):
            _swap(hp, i, parent)
            i = parent
        else:
            break
    return 0


cdef void _pop(Heap* hp, cnp.int64_t* k, cnp.int64_t* v) noexcept nogil:
    cdef Py_ssize_t i = 0
    cdef Py_ssize_t l, r, m
    k[0] = hp.key[0]
    v[0] = hp.val[0]
    hp.size -= 1
    hp.key[0] = hp.key[hp.size]
    hp.val[0] = hp.val[hp.size]
    while True:
        l = 2 * i + 1
        r = l + 1
        m = i
        if l < hp.size and _less(hp, l, m):
            m = l
        if r < hp.size and _less(hp, r, m):
            m = r
        if m == i:
            break
        _swap(hp, i, m)
        i = m


def cost_to_go(state_ok, fwd_ok, goal_mask, int n_headings, cnp.int64_t fwd_cost,
               cnp.int64_t turn_cost):
    cdef const cnp.uint8_t[:, :] ok = np.ascontiguousarray(state_ok, dtype=np.uint8)
    cdef const cnp.uint8_t[:, :, :] fwd = np.ascontiguousarray(fwd_ok, dtype=np.uint8)
    cdef const cnp.uint8_t[:, :] goal = np.ascontiguousarray(goal_mask, dtype=np.uint8)
    cdef Py_ssize_t ny = ok.shape[0]
    cdef Py_ssize_t nx = ok.shape[1]
    cdef int H = n_headings
    cdef int q = H // 4
    dist_arr = np.full((ny, nx, H), -1, dtype=np.int64)
    cdef cnp.int64_t[:, :, :] dist = dist_arr
    cdef Heap heap
    heap.cap = 1024
    heap.size = 0
    heap.key = <cnp.int64_t*>malloc(heap.cap * sizeof(cnp.int64_t))
    heap.val = <cnp.int64_t*>malloc(heap.cap * sizeof(cnp.int64_t))
    if heap.key == NULL or heap.val == NULL:
        free(heap.key)
        free(heap.val)
        raise MemoryError()
    cdef int sxs[4]
    cdef int sys_[4]
    sxs[0] = 1; sys_[0] = 0
    sxs[1] = 0; sys_[1] = 1
    sxs[2] = -1; sys_[2] = 0
    sxs[3] = 0; sys_[3] = -1
    cdef Py_ssize_t i, j, pi, pj, c
    cdef int h, hp, d
    cdef cnp.int64_t dcur, s, nd, old
    cdef int err = 0
    with nogil:
        for j in range(ny):
            for i in range(nx):
                if goal[j, i] and ok[j, i]:
                    for h in range(H):
                        dist[j, i, h] = 0
                        err |= _push(&heap, 0, (j * nx + i) * H + h)
        while heap.size > 0 and err == 0:
            _pop(&heap, &dcur, &s)
            h = <int>(s % H)
            c = s // H
            i = c % nx
            j = c // nx
            if dist[j, i, h] != dcur:
                continue
            nd = dcur + turn_cost
            hp = (h - 1 + H) % H
            old = dist[j, i, hp]
            if old == -1 or nd < old:
                dist[j, i, hp] = nd
                err |= _push(&heap, nd, c * H + hp)
            hp = (h + 1) % H
            old = dist[j, i, hp]
            if old == -1 or nd < old:
                dist[j, i, hp] = nd
                err |= _push(&heap, nd, c * H + hp)
            if h % q == 0:
                d = h // q
                pi = i - sxs[d]
                pj = j - sys_[d]
                if 0 <= pi < nx and 0 <= pj < ny and ok[pj, pi] and fwd[pj, pi, d]:
                    nd = dcur + fwd_cost
                    old = dist[pj, pi, h]
                    if old == -1 or nd < old:
                        dist[pj, pi, h] = nd
                        err |= _push(&heap, nd, (pj * nx + pi) * H + h)
    free(heap.key)
    free(heap.val)
    if err:
        raise MemoryError()
    return dist_arr
