"""Polyline geometry: nearest-point queries, sausage rasters, square occupancy.

All kernels take segments as four float arrays ``ax, ay, bx, by``.
"""

import math

import numpy as np
from numba import njit


def segments_of(points):
    """Split a complex polyline into endpoint arrays."""
    p = np.asarray(points, dtype=np.complex128)
    return (np.ascontiguousarray(p[:-1].real), np.ascontiguousarray(p[:-1].imag),
            np.ascontiguousarray(p[1:].real), np.ascontiguousarray(p[1:].imag))


@njit(inline="always", cache=True)
def _seg_dist2(px, py, ax, ay, bx, by):
    dx = bx - ax
    dy = by - ay
    ll = dx * dx + dy * dy
    t = 0.0
    if ll > 0.0:
        t = ((px - ax) * dx + (py - ay) * dy) / ll
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
    qx = ax + t * dx - px
    qy = ay + t * dy - py
    return qx * qx + qy * qy, t


# --------------------------------------------------------------------------
# bounding-volume tree over consecutive segments
# --------------------------------------------------------------------------


@njit(cache=True)
def _build_bvh(ax, ay, bx, by, leaf):
    n = ax.size
    nb = max(1, (n + leaf - 1) // leaf)
    size = 1
    while size < nb:
        size *= 2
    x0 = np.full(2 * size, np.inf)
    y0 = np.full(2 * size, np.inf)
    x1 = np.full(2 * size, -np.inf)
    y1 = np.full(2 * size, -np.inf)
    for b in range(nb):
        nd = size + b
        for j in range(b * leaf, min(n, (b + 1) * leaf)):
            x0[nd] = min(x0[nd], ax[j], bx[j])
            x1[nd] = max(x1[nd], ax[j], bx[j])
            y0[nd] = min(y0[nd], ay[j], by[j])
            y1[nd] = max(y1[nd], ay[j], by[j])
    for nd in range(size - 1, 0, -1):
        x0[nd] = min(x0[2 * nd], x0[2 * nd + 1])
        x1[nd] = max(x1[2 * nd], x1[2 * nd + 1])
        y0[nd] = min(y0[2 * nd], y0[2 * nd + 1])
        y1[nd] = max(y1[2 * nd], y1[2 * nd + 1])
    return x0, y0, x1, y1, size


@njit(inline="always", cache=True)
def _box_d2(px, py, x0, y0, x1, y1):
    dx = max(x0 - px, 0.0, px - x1)
    dy = max(y0 - py, 0.0, py - y1)
    return dx * dx + dy * dy


@njit(cache=True)
def _nearest(px, py, ax, ay, bx, by, x0, y0, x1, y1, size, leaf, stack):
    best = np.inf
    bi = -1
    bt = 0.0
    n = ax.size
    stack[0] = 1
    sp = 1
    while sp > 0:
        sp -= 1
        nd = stack[sp]
        if _box_d2(px, py, x0[nd], y0[nd], x1[nd], y1[nd]) >= best:
            continue
        if nd >= size:
            lo = (nd - size) * leaf
            for j in range(lo, min(n, lo + leaf)):
                d2, t = _seg_dist2(px, py, ax[j], ay[j], bx[j], by[j])
                if d2 < best:
                    best = d2
                    bi = j
                    bt = t
            continue
        l = 2 * nd
        r = l + 1
        dl = _box_d2(px, py, x0[l], y0[l], x1[l], y1[l])
        dr = _box_d2(px, py, x0[r], y0[r], x1[r], y1[r])
        if dl < dr:
            stack[sp] = r
            stack[sp + 1] = l
        else:
            stack[sp] = l
            stack[sp + 1] = r
        sp += 2
    return math.sqrt(best), bi, bt


@njit(cache=True)
def _nearest_many(px, py, ax, ay, bx, by, x0, y0, x1, y1, size, leaf):
    stack = np.empty(256, np.int64)
    out = np.empty(px.size)
    for i in range(px.size):
        out[i] = _nearest(px[i], py[i], ax, ay, bx, by, x0, y0, x1, y1, size, leaf, stack)[0]
    return out


class SegmentIndex:
    """Nearest-segment queries over one or more polylines.

    Parameters
    ----------
    polylines : sequence of complex arrays
        Each array is a polyline with at least two vertices. Single points
        are stored as degenerate segments.
    leaf : int
        Segments per leaf box.
    """

    def __init__(self, polylines, leaf=8):
        parts = []
        owner = []
        for i, p in enumerate(polylines):
            p = np.asarray(p, dtype=np.complex128)
            if p.size == 1:
                p = np.repeat(p, 2)
            if p.size < 2:
                continue
            parts.append(segments_of(p))
            owner.append(np.full(p.size - 1, i, np.int64))
        if parts:
            self.ax, self.ay, self.bx, self.by = (np.concatenate([q[j] for q in parts]) for j in range(4))
            self.owner = np.concatenate(owner)
        else:
            self.ax = self.ay = self.bx = self.by = np.zeros(0)
            self.owner = np.zeros(0, np.int64)
        self.leaf = int(leaf)
        self.x0, self.y0, self.x1, self.y1, self.size = _build_bvh(self.ax, self.ay, self.bx, self.by, self.leaf)

    @property
    def arrays(self):
        return (self.ax, self.ay, self.bx, self.by, self.x0, self.y0, self.x1, self.y1, self.size, self.leaf)

    def distance(self, z):
        """Euclidean distance from each point of ``z`` to the segment set."""
        z = np.atleast_1d(np.asarray(z, dtype=np.complex128))
        if self.ax.size == 0:
            return np.full(z.size, np.inf)
        return _nearest_many(np.ascontiguousarray(z.real), np.ascontiguousarray(z.imag), *self.arrays)


# --------------------------------------------------------------------------
# sausage raster: cells within eps of the polyline, bucketed into tiles
# --------------------------------------------------------------------------


@njit(cache=True)
def _touched_tiles(ax, ay, bx, by, x0, y0, tw, th, ntx, nty, eps):
    out = np.empty(16, np.int64)
    cnt = 0
    for j in range(ax.size):
        i0 = int(math.floor((min(ax[j], bx[j]) - eps - x0) / tw))
        i1 = int(math.floor((max(ax[j], bx[j]) + eps - x0) / tw))
        j0 = int(math.floor((min(ay[j], by[j]) - eps - y0) / th))
        j1 = int(math.floor((max(ay[j], by[j]) + eps - y0) / th))
        i0 = max(i0, 0)
        j0 = max(j0, 0)
        i1 = min(i1, ntx - 1)
        j1 = min(j1, nty - 1)
        for i in range(i0, i1 + 1):
            for k in range(j0, j1 + 1):
                if cnt == out.size:
                    tmp = np.empty(2 * out.size, np.int64)
                    tmp[:cnt] = out[:cnt]
                    out = tmp
                out[cnt] = i * nty + k
                cnt += 1
    return out[:cnt]


@njit(cache=True)
def _mark_cells(ax, ay, bx, by, x0, y0, px, py, nx, ny, cpt, nty, tiles, eps):
    nt = tiles.size
    bits = np.zeros((nt, cpt, cpt), np.uint8)
    e2 = eps * eps
    for j in range(ax.size):
        c0 = int(math.floor((min(ax[j], bx[j]) - eps - x0) / px))
        c1 = int(math.floor((max(ax[j], bx[j]) + eps - x0) / px))
        r0 = int(math.floor((min(ay[j], by[j]) - eps - y0) / py))
        r1 = int(math.floor((max(ay[j], by[j]) + eps - y0) / py))
        c0 = max(c0, 0)
        r0 = max(r0, 0)
        c1 = min(c1, nx - 1)
        r1 = min(r1, ny - 1)
        for ci in range(c0, c1 + 1):
            cx = x0 + (ci + 0.5) * px
            ti = ci // cpt
            for ri in range(r0, r1 + 1):
                tid = ti * nty + ri // cpt
                slot = np.searchsorted(tiles, tid)
                if slot >= nt or tiles[slot] != tid:
                    continue
                if bits[slot, ci - ti * cpt, ri - (ri // cpt) * cpt]:
                    continue
                cy = y0 + (ri + 0.5) * py
                d2, _ = _seg_dist2(cx, cy, ax[j], ay[j], bx[j], by[j])
                if d2 <= e2:
                    bits[slot, ci - ti * cpt, ri - (ri // cpt) * cpt] = 1
    counts = np.empty(nt, np.int64)
    for s in range(nt):
        counts[s] = bits[s].sum()
    return counts


def sausage_counts(segs, x0, y0, pitch_x, pitch_y, nx, ny, cells_per_tile, eps):
    """Count raster cells whose centres lie within ``eps`` of the segments.

    The raster has ``nx * ny`` cells of size ``pitch_x * pitch_y`` anchored at
    ``(x0, y0)``, grouped into square tiles of ``cells_per_tile`` cells a side.

    Returns
    -------
    tiles : ndarray of int64
        Touched tile ids ``i * nty + j`` (sorted, unique).
    counts : ndarray of int64
        Marked cells per tile.
    nty : int
        Tiles along the vertical axis (to decode tile ids).
    """
    ax, ay, bx, by = segs
    cpt = int(cells_per_tile)
    ntx = -(-nx // cpt)
    nty = -(-ny // cpt)
    tw = pitch_x * cpt
    th = pitch_y * cpt
    tiles = np.unique(_touched_tiles(ax, ay, bx, by, x0, y0, tw, th, ntx, nty, eps))
    if tiles.size == 0:
        return tiles, np.zeros(0, np.int64), nty
    counts = _mark_cells(ax, ay, bx, by, x0, y0, pitch_x, pitch_y, nx, ny, cpt, nty, tiles, eps)
    keep = counts > 0
    return tiles[keep], counts[keep], nty


# --------------------------------------------------------------------------
# exact occupancy of closed grid squares
# --------------------------------------------------------------------------


@njit(inline="always", cache=True)
def _clip(ax, ay, dx, dy, xa, xb, ya, yb):
    t0 = 0.0
    t1 = 1.0
    for q in range(4):
        if q == 0:
            p, r = -dx, ax - xa
        elif q == 1:
            p, r = dx, xb - ax
        elif q == 2:
            p, r = -dy, ay - ya
        else:
            p, r = dy, yb - ay
        if p == 0.0:
            if r < 0.0:
                return False
        else:
            t = r / p
            if p < 0.0:
                if t > t1:
                    return False
                if t > t0:
                    t0 = t
            else:
                if t < t0:
                    return False
                if t < t1:
                    t1 = t
    return True


@njit(cache=True)
def _occupied(ax, ay, bx, by, x0, y0, side, n):
    out = np.empty(16, np.int64)
    cnt = 0
    for j in range(ax.size):
        i0 = max(int(math.floor((min(ax[j], bx[j]) - x0) / side)) - 1, 0)
        i1 = min(int(math.floor((max(ax[j], bx[j]) - x0) / side)) + 1, n - 1)
        k0 = max(int(math.floor((min(ay[j], by[j]) - y0) / side)) - 1, 0)
        k1 = min(int(math.floor((max(ay[j], by[j]) - y0) / side)) + 1, n - 1)
        dx = bx[j] - ax[j]
        dy = by[j] - ay[j]
        for i in range(i0, i1 + 1):
            xa = x0 + i * side
            xb = x0 + (i + 1) * side
            for k in range(k0, k1 + 1):
                ya = y0 + k * side
                yb = y0 + (k + 1) * side
                if _clip(ax[j], ay[j], dx, dy, xa, xb, ya, yb):
                    if cnt == out.size:
                        tmp = np.empty(2 * out.size, np.int64)
                        tmp[:cnt] = out[:cnt]
                        out = tmp
                    out[cnt] = i * n + k
                    cnt += 1
    return out[:cnt]


def occupied_cells(segs, x0, y0, side, n):
    """Ids ``i * n + k`` of closed grid squares met by any segment."""
    ax, ay, bx, by = segs
    return np.unique(_occupied(ax, ay, bx, by, x0, y0, side, n))


def segments_near(segs, x0, y0, x1, y1, margin):
    """Restrict segments to those whose bounding box meets the padded box."""
    ax, ay, bx, by = segs
    keep = ((np.maximum(ax, bx) >= x0 - margin) & (np.minimum(ax, bx) <= x1 + margin)
            & (np.maximum(ay, by) >= y0 - margin) & (np.minimum(ay, by) <= y1 + margin))
    return tuple(np.ascontiguousarray(q[keep]) for q in segs), keep
