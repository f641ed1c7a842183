"""Walk-on-spheres Brownian motion in the upper half-plane minus polylines.

Each move jumps to a uniform point on the largest circle around the walker
that avoids both the real axis and the slits, so walkers cannot tunnel
through a slit. A walker stops once it is within ``band`` of the boundary.
"""

import math

import numpy as np
from numba import njit

from .geometry import _nearest

AXIS = 0
CURVE = 1


@njit(cache=True)
def _wos(sx, sy, ax, ay, bx, by, x0, y0, x1, y1, size, leaf, band, max_steps, seed,
         out_im, out_x, out_kind, out_seg, out_side, out_ok):
    np.random.seed(seed)
    stack = np.empty(256, np.int64)
    for i in range(sx.size):
        x = sx[i]
        y = sy[i]
        out_ok[i] = False
        for _ in range(max_steps):
            dc, j, t = _nearest(x, y, ax, ay, bx, by, x0, y0, x1, y1, size, leaf, stack)
            if y <= band and y <= dc:
                out_im[i] = 0.0
                out_x[i] = x
                out_kind[i] = AXIS
                out_seg[i] = -1
                out_side[i] = 0
                out_ok[i] = True
                break
            if dc <= band:
                qx = ax[j] + t * (bx[j] - ax[j])
                qy = ay[j] + t * (by[j] - ay[j])
                out_im[i] = qy
                out_x[i] = qx
                out_kind[i] = CURVE
                out_seg[i] = j
                cr = (bx[j] - ax[j]) * (y - qy) - (by[j] - ay[j]) * (x - qx)
                out_side[i] = 1 if cr > 0.0 else -1
                out_ok[i] = True
                break
            r = y if y < dc else dc
            th = 2.0 * math.pi * np.random.random()
            x += r * math.cos(th)
            y += r * math.sin(th)


def run_walkers(index, start, band, max_steps, rng):
    """Run walkers from the points ``start`` until absorption.

    Parameters
    ----------
    index : SegmentIndex
        Slits removed from the half-plane.
    start : complex array
        Starting points (``Im > 0``).
    band : float
        Absorption distance.
    max_steps : int
        Per-walker move budget.
    rng : numpy.random.Generator
        Supplies the kernel seed.

    Returns
    -------
    im : ndarray
        Height of the boundary point where each walker stopped (0 on the axis).
    x : ndarray
        Real part of that boundary point.
    info : dict
        ``kind`` (0 axis, 1 slit), ``segment``, ``side`` (+1 left of the
        segment direction, -1 right, 0 on the axis).
    ok : ndarray of bool
        False for walkers that ran out of budget.
    """
    start = np.ascontiguousarray(np.atleast_1d(start), dtype=np.complex128)
    n = start.size
    out_im = np.zeros(n)
    out_x = np.zeros(n)
    kind = np.full(n, -1, np.int64)
    seg = np.full(n, -1, np.int64)
    side = np.zeros(n, np.int64)
    ok = np.zeros(n, bool)
    seed = int(rng.integers(0, 2**31 - 1))
    _wos(np.ascontiguousarray(start.real), np.ascontiguousarray(start.imag), *index.arrays,
         float(band), int(max_steps), seed, out_im, out_x, kind, seg, side, ok)
    return out_im, out_x, {"kind": kind, "segment": seg, "side": side}, ok
