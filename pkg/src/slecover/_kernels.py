"""Compiled kernels for vertical-slit Loewner maps.

Conventions: step ``k`` holds the driving constant at ``u[k]`` for a capacity
duration ``dt[k]``; the slit it grows has height ``h[k] = sqrt(2 a dt[k])``.

    forward  phi_k(w) = u + sqrt((w - u)^2 + h^2)
    inverse  psi_k(w) = u + sqrt((w - u)^2 - h^2)

with the square-root branch taken in the closed upper half-plane; on the real
axis the root keeps the sign of ``Re(w - u)``.
"""

import cmath
import math

import numpy as np
from numba import njit


@njit(inline="always", cache=True)
def _hsqrt(wr, wi, sgn):
    r = math.hypot(wr, wi)
    if wr >= 0.0:
        t = math.sqrt(0.5 * (r + wr))
        if t == 0.0:
            return 0.0, 0.0
        re = t
        im = wi / (2.0 * t)
    else:
        t = math.sqrt(0.5 * (r - wr))
        im = t
        re = wi / (2.0 * t)
    if im < 0.0 or (im == 0.0 and re * sgn < 0.0):
        re = -re
        im = -im
    return re, im


@njit(inline="always", cache=True)
def psi(w, u, h):
    dr = w.real - u
    di = w.imag
    re, im = _hsqrt(dr * dr - di * di - h * h, 2.0 * dr * di, dr)
    return complex(u + re, im)


@njit(inline="always", cache=True)
def phi(w, u, h):
    dr = w.real - u
    di = w.imag
    re, im = _hsqrt(dr * dr - di * di + h * h, 2.0 * dr * di, dr)
    return complex(u + re, im)


@njit(cache=True)
def _fwd_real(x, u, h, lo, hi):
    for k in range(lo, hi):
        d = x - u[k]
        r = math.sqrt(d * d + h[k] * h[k])
        x = u[k] + r if d >= 0.0 else u[k] - r
    return x


@njit(cache=True)
def tips_direct(u, h, offset):
    """All tips by brute-force backward composition, O(N^2)."""
    n = u.size
    out = np.empty(n + 1, np.complex128)
    out[0] = complex(u[0] if n > 0 else 0.0, 0.0)
    for k in range(n):
        w = complex(u[k], offset)
        for j in range(k, -1, -1):
            w = psi(w, u[j], h[j])
        out[k + 1] = w
    return out


@njit(cache=True)
def tip_at(u, h, n, offset):
    """Single tip after ``n`` steps, O(n)."""
    w = complex(u[n - 1], offset)
    for j in range(n - 1, -1, -1):
        w = psi(w, u[j], h[j])
    return w


@njit(cache=True)
def apply_direct(ws, nsteps, u, h):
    out = np.empty(ws.size, np.complex128)
    for i in range(ws.size):
        w = ws[i]
        for j in range(nsteps[i] - 1, -1, -1):
            w = psi(w, u[j], h[j])
        out[i] = w
    return out


# --------------------------------------------------------------------------
# hierarchical block zipper
# --------------------------------------------------------------------------
#
# Leaves are blocks of ``bsize`` consecutive maps; every tree node stores the
# composite inverse map of its range as a Laurent series about the centre of
# its real singular interval,
#
#     Psi(w) = w + rad * sum_{m=1..P} beta_m x^m,   x = rad / (w - cen),
#
# used whenever |w - cen| > rho * rad; otherwise the node is opened.


@njit(cache=True)
def _series(w, c, r, beta):
    x = r / (w - c)
    acc = complex(beta[beta.size - 1], 0.0)
    for m in range(beta.size - 2, -1, -1):
        acc = acc * x + beta[m]
    return w + r * acc * x


@njit(cache=True)
def _eval_range(w, root, mlimit, u, h, nlo, nhi, cen, rad, beta, rho, size, stack):
    sp = 1
    stack[0] = root
    while sp > 0:
        sp -= 1
        nd = stack[sp]
        lo = nlo[nd]
        hi = nhi[nd]
        if lo >= mlimit or lo >= hi:
            continue
        if hi <= mlimit and rad[nd] > 0.0:
            dw = w - cen[nd]
            if abs(dw) > rho * rad[nd]:
                w = _series(w, cen[nd], rad[nd], beta[nd])
                continue
        if nd >= size:
            top = hi if hi < mlimit else mlimit
            for j in range(top - 1, lo - 1, -1):
                w = psi(w, u[j], h[j])
            continue
        stack[sp] = 2 * nd
        stack[sp + 1] = 2 * nd + 1
        sp += 2
    return w


@njit(cache=True)
def build_tree(u, h, bsize, nterms, rho):
    n = u.size
    nb = (n + bsize - 1) // bsize
    size = 1
    while size < nb:
        size *= 2
    nn = 2 * size
    nlo = np.full(nn, n, np.int64)
    nhi = np.full(nn, n, np.int64)
    xlo = np.zeros(nn)
    xhi = np.zeros(nn)
    cen = np.zeros(nn)
    rad = np.zeros(nn)
    beta = np.zeros((nn, nterms))
    for b in range(nb):
        nd = size + b
        nlo[nd] = b * bsize
        nhi[nd] = min(n, (b + 1) * bsize)
    for nd in range(size - 1, 0, -1):
        nlo[nd] = min(nlo[2 * nd], nlo[2 * nd + 1])
        nhi[nd] = max(nhi[2 * nd], nhi[2 * nd + 1])
        if nlo[2 * nd] >= nhi[2 * nd]:
            nlo[nd] = n
            nhi[nd] = n
    kpts = 2 * nterms
    stack = np.empty(256, np.int64)
    th = np.empty(kpts // 2)
    for j in range(kpts // 2):
        th[j] = 2.0 * math.pi * (j + 0.5) / kpts
    for nd in range(nn - 1, 0, -1):
        lo = nlo[nd]
        hi = nhi[nd]
        if lo >= hi:
            continue
        if nd >= size:
            a = u[lo] - h[lo]
            bb = u[lo] + h[lo]
            for j in range(lo + 1, hi):
                a2 = _fwd_real(a, u, h, j, j + 1)
                b2 = _fwd_real(bb, u, h, j, j + 1)
                a = min(u[j] - h[j], a2)
                bb = max(u[j] + h[j], b2)
        else:
            L = 2 * nd
            R = 2 * nd + 1
            if nlo[R] >= nhi[R]:
                a = xlo[L]
                bb = xhi[L]
            else:
                a = min(xlo[R], _fwd_real(xlo[L], u, h, nlo[R], nhi[R]))
                bb = max(xhi[R], _fwd_real(xhi[L], u, h, nlo[R], nhi[R]))
        xlo[nd] = a
        xhi[nd] = bb
        c = 0.5 * (a + bb)
        r = 0.5 * (bb - a)
        cen[nd] = c
        # samples on the upper half of the circle |w - c| = rho r
        acc = np.zeros(nterms)
        for j in range(kpts // 2):
            w0 = complex(c + rho * r * math.cos(th[j]), rho * r * math.sin(th[j]))
            if nd >= size:
                w = w0
                for q in range(hi - 1, lo - 1, -1):
                    w = psi(w, u[q], h[q])
            else:
                w = _eval_range(w0, 2 * nd + 1, n, u, h, nlo, nhi, cen, rad, beta, rho, size, stack)
                w = _eval_range(w, 2 * nd, n, u, h, nlo, nhi, cen, rad, beta, rho, size, stack)
            dl = (w - w0) / r
            for m in range(1, nterms + 1):
                e = complex(math.cos(m * th[j]), math.sin(m * th[j]))
                acc[m - 1] += (dl * e).real
        scale = 1.0
        for m in range(nterms):
            scale *= rho
            beta[nd, m] = acc[m] * 2.0 / kpts * scale
        rad[nd] = r
    return nlo, nhi, cen, rad, beta, size


@njit(cache=True)
def tips_tree(u, h, offset, nlo, nhi, cen, rad, beta, rho, size, which):
    """Tips after ``which[i]`` steps using the block tree."""
    stack = np.empty(256, np.int64)
    out = np.empty(which.size, np.complex128)
    for i in range(which.size):
        n = which[i]
        if n == 0:
            out[i] = complex(0.0, 0.0)
            continue
        w = complex(u[n - 1], offset)
        out[i] = _eval_range(w, 1, n, u, h, nlo, nhi, cen, rad, beta, rho, size, stack)
    return out


@njit(cache=True)
def apply_inverse_tree(ws, nsteps, u, h, nlo, nhi, cen, rad, beta, rho, size):
    """Apply psi_0 o ... o psi_{nsteps[i]-1} to each point ``ws[i]``."""
    stack = np.empty(256, np.int64)
    out = np.empty(ws.size, np.complex128)
    for i in range(ws.size):
        out[i] = _eval_range(ws[i], 1, nsteps[i], u, h, nlo, nhi, cen, rad, beta, rho, size, stack)
    return out


# --------------------------------------------------------------------------
# forward flow of interior points
# --------------------------------------------------------------------------


@njit(cache=True)
def evolve_point_kernel(u, h, vnext, z, bound, swallow_tol):
    """Forward flow of one point through all steps.

    Returns ``(Z, logg, nrec, status)``: Z_k = g_{t_k}(z) - V(t_k) and
    log|g'_{t_k}(z)| for k < nrec; status 0 = alive at the end, 1 = swallowed
    during step nrec - 1, 2 = escaped past ``bound``.
    """
    n = u.size
    Z = np.empty(n + 1, np.complex128)
    logg = np.empty(n + 1)
    g = z
    lg = 0.0
    Z[0] = z - u[0] if n > 0 else z
    logg[0] = 0.0
    for k in range(n):
        d = g - u[k]
        s = phi(g, u[k], h[k])
        zz = s - vnext[k]
        if zz.imag <= 0.0 or zz.imag < swallow_tol * abs(zz):
            return Z, logg, k + 1, 1
        lg += math.log(abs(d)) - math.log(abs(s - u[k]))
        g = s
        if abs(zz) > bound:
            return Z, logg, k + 1, 2
        Z[k + 1] = zz
        logg[k + 1] = lg
    return Z, logg, n + 1, 0


@njit(cache=True)
def forward_map(u, h, nsteps, ws):
    """g_t(w) for points ``ws`` after ``nsteps`` steps (no swallow checks)."""
    out = ws.copy()
    for i in range(ws.size):
        g = ws[i]
        for k in range(nsteps):
            g = phi(g, u[k], h[k])
        out[i] = g
    return out


@njit(cache=True)
def capacity_coefficient(u, h, nsteps, y):
    """Re[z (g_t(z) - z)] at z = iy, accumulating g - z without cancellation."""
    z = complex(0.0, y)
    g = z
    delta = complex(0.0, 0.0)
    for k in range(nsteps):
        d = g - u[k]
        s = phi(g, u[k], h[k]) - u[k]
        inc = h[k] * h[k] / (s + d)
        delta += inc
        g = z + delta
    return (z * delta).real


@njit(cache=True)
def two_sided_chunk(Z, logY, t, V, normals, a, dt_max, step_scale, t_end, stop_log, times, values, start):
    """Advance the two-sided flow with one chunk of normals.

    Writes grid times and driving values from index ``start``. Returns
    ``(Z, logY, t, V, used, status)`` with status 0 = chunk exhausted,
    1 = stop radius reached, 2 = horizon reached, 3 = target lost.
    """
    c = 4.0 * a - 1.0
    i = start
    for j in range(normals.size):
        az2 = Z.real * Z.real + Z.imag * Z.imag
        dt = min(dt_max, step_scale * az2, t_end - t)
        w = Z * Z + 2.0 * a * dt
        s = cmath.sqrt(w)
        if s.imag < 0.0:
            s = -s
        logY += math.log(s.imag / Z.imag) + 0.5 * math.log((s.real * s.real + s.imag * s.imag) / az2)
        dV = c * Z.real / az2 * dt + math.sqrt(dt) * normals[j]
        Z = s - dV
        t += dt
        V += dV
        i += 1
        times[i] = t
        values[i] = V
        if logY <= stop_log:
            return Z, logY, t, V, j + 1, 1
        if Z.imag <= 0.0 or Z.imag < 1e-12 * abs(Z):
            return Z, logY, t, V, j + 1, 3
        if t >= t_end * (1.0 - 1e-12):
            return Z, logY, t, V, j + 1, 2
    return Z, logY, t, V, normals.size, 0
