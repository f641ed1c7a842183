"""l-adic squares, natural-mass proxies, big-square covers and box counting.

The unit square ``A = [0, 1]^2`` is translated by ``Z0 = -1/2 + 2i``; level-k
squares have side ``l^-k`` and are indexed by ``(n1, n2)`` from the lower-left
corner of ``A + Z0``. The natural mass of a square is estimated by the
Minkowski proxy ``eps^(d-2) * Area{z in square : dist(z, curve) <= eps}``,
with ``eps`` tied to the square's side.
"""

from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np
from scipy import stats

from .errors import ParamError, ResolutionError, StarvedError
from .geometry import occupied_cells, sausage_counts, segments_near, segments_of
from .loewner_core import Trace, evolve_point

Z0 = complex(-0.5, 2.0)
#: cells per side of a level square in the sausage raster (pitch = eps / 4)
CELLS_PER_SIDE = 40
#: eps_mink = side / EPS_DIVISOR
EPS_DIVISOR = 10


def dimension_of(kappa):
    """``1 + min(kappa / 8, 1)``."""
    return 1.0 + min(kappa / 8.0, 1.0)


def _points(obj):
    if isinstance(obj, Trace):
        return obj.points
    return np.atleast_1d(np.asarray(obj, dtype=np.complex128))


def _segments(pts):
    if pts.size == 1:
        pts = np.repeat(pts, 2)
    return segments_of(pts)


@dataclass(frozen=True, order=True)
class LadicSquare:
    """Closed square ``[n1, n1+1] x [n2, n2+1] * l^-level + offset``."""

    level: int
    n1: int
    n2: int
    base: int = 16
    offset: complex = Z0

    def __post_init__(self):
        if self.level < 0 or self.base < 2:
            raise ParamError("need level >= 0 and base >= 2")
        n = self.base ** self.level
        if not (0 <= self.n1 < n and 0 <= self.n2 < n):
            raise ParamError(f"index ({self.n1}, {self.n2}) outside level {self.level}")

    @property
    def side(self):
        return float(self.base) ** (-self.level)

    @property
    def rect(self):
        """``(x0, y0, x1, y1)``."""
        s = self.side
        x0 = self.offset.real + self.n1 * s
        y0 = self.offset.imag + self.n2 * s
        return x0, y0, x0 + s, y0 + s

    @property
    def center(self):
        x0, y0, x1, y1 = self.rect
        return complex(0.5 * (x0 + x1), 0.5 * (y0 + y1))

    def parent(self):
        if self.level == 0:
            return None
        return LadicSquare(self.level - 1, self.n1 // self.base, self.n2 // self.base, self.base, self.offset)

    def ancestor(self, level):
        f = self.base ** (self.level - level)
        return LadicSquare(level, self.n1 // f, self.n2 // f, self.base, self.offset)

    def children(self):
        b = self.base
        return [LadicSquare(self.level + 1, self.n1 * b + i, self.n2 * b + j, b, self.offset)
                for i in range(b) for j in range(b)]

    def contains(self, other):
        return other.level >= self.level and other.ancestor(self.level) == self


def enlarged(rect, factor):
    """Square with the same centre and ``factor`` times the side."""
    x0, y0, x1, y1 = rect
    cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    h = 0.5 * factor * (x1 - x0)
    return cx - h, cy - h, cx + h, cy + h


def _check_resolution(segs, limit, what):
    ax, ay, bx, by = segs
    if ax.size and np.hypot(bx - ax, by - ay).max() > limit * (1 + 1e-12):
        raise ResolutionError(f"trace step {np.hypot(bx - ax, by - ay).max():.3g} exceeds {limit:.3g} near {what}")


def minkowski_mass(trace, region, eps_mink, d, check_resolution=True):
    """Minkowski proxy of the natural mass of the curve inside a rectangle.

    Parameters
    ----------
    trace : Trace or complex array
        Polyline of the curve.
    region : (x0, y0, x1, y1)
    eps_mink : float
        Sausage radius.
    d : float
        Dimension used in the normalisation ``eps^(d-2)``.

    Notes
    -----
    The area is counted on a raster of pitch at most ``eps_mink / 4``
    anchored at the region's corner, using exact point-to-segment distances
    from the cell centres.
    """
    x0, y0, x1, y1 = map(float, region)
    if x1 < x0 or y1 < y0 or eps_mink <= 0:
        raise ParamError("bad region or eps_mink")
    if x1 == x0 or y1 == y0:
        return 0.0
    segs, _ = segments_near(_segments(_points(trace)), x0, y0, x1, y1, eps_mink)
    if segs[0].size == 0:
        return 0.0
    if check_resolution:
        _check_resolution(segs, eps_mink, region)
    nx = int(np.ceil((x1 - x0) / (0.25 * eps_mink) - 1e-9))
    ny = int(np.ceil((y1 - y0) / (0.25 * eps_mink) - 1e-9))
    px, py = (x1 - x0) / nx, (y1 - y0) / ny
    _, counts, _ = sausage_counts(segs, x0, y0, px, py, nx, ny, 64, eps_mink)
    return float(eps_mink ** (d - 2.0) * counts.sum() * px * py)


@dataclass(frozen=True)
class MeasureField:
    """Estimated mass per l-adic square; squares absent from ``mass`` have mass 0."""

    base: int
    m: int
    M: int
    offset: complex
    d: float
    levels: Tuple[int, ...]
    mass: Dict[LadicSquare, float] = field(default_factory=dict)

    def get(self, sq):
        return self.mass.get(sq, 0.0)

    def at_level(self, k):
        return {s: v for s, v in self.mass.items() if s.level == k}


def _level_masses(segs, l, k, offset, d):
    side = float(l) ** (-k)
    eps = side / EPS_DIVISOR
    n = l ** k
    pitch = side / CELLS_PER_SIDE
    tiles, counts, nty = sausage_counts(segs, offset.real, offset.imag, pitch, pitch,
                                        n * CELLS_PER_SIDE, n * CELLS_PER_SIDE, CELLS_PER_SIDE, eps)
    w = eps ** (d - 2.0) * pitch * pitch
    return {LadicSquare(k, int(t // nty), int(t % nty), l, offset): float(c * w) for t, c in zip(tiles, counts)}


def mu_field(trace, l, m, M, z0=Z0, d=None, levels=None, kappa=None, check_resolution=True):
    """Minkowski-proxy mass of every square of ``A + z0`` at levels ``m..M``.

    ``levels`` restricts the computation (the cover only needs ``m..M-1``).
    ``d`` defaults to ``1 + kappa/8`` taken from the trace's driving path.
    ``check_resolution=False`` accepts traces with segments that refinement
    could not shorten (see ``refine_near(strict=False)``).

    Raises
    ------
    ResolutionError
        If a trace step near ``A + z0`` exceeds the finest level's ``eps``.
    """
    if m < 0 or M < m:
        raise ParamError("need 0 <= m <= M")
    if d is None:
        if kappa is None:
            if not isinstance(trace, Trace):
                raise ParamError("d or kappa is required for a bare polyline")
            kappa = trace.driving.kappa
        d = dimension_of(kappa)
    z0 = complex(z0)
    levels = tuple(range(m, M + 1)) if levels is None else tuple(sorted(levels))
    pts = _points(trace)
    x0, y0 = z0.real, z0.imag
    finest = float(l) ** (-max(levels)) / EPS_DIVISOR
    coarsest = float(l) ** (-min(levels)) / EPS_DIVISOR
    segs, _ = segments_near(_segments(pts), x0, y0, x0 + 1, y0 + 1, coarsest)
    near_fine, _ = segments_near(segs, x0, y0, x0 + 1, y0 + 1, finest)
    if check_resolution:
        _check_resolution(near_fine, finest, "A + z0")
    mass = {}
    for k in levels:
        mass.update(_level_masses(segs, l, k, z0, d))
    return MeasureField(l, m, M, z0, float(d), levels, mass)


def occupancy(trace, l, k, z0=Z0, max_step=None):
    """Level-k squares of ``A + z0`` met by the polyline (closed squares).

    ``max_step`` optionally enforces the trace resolution near ``A + z0``.
    """
    z0 = complex(z0)
    side = float(l) ** (-k)
    segs, _ = segments_near(_segments(_points(trace)), z0.real, z0.imag, z0.real + 1, z0.imag + 1, 0.0)
    if max_step is not None:
        _check_resolution(segs, max_step, "A + z0")
    n = l ** k
    ids = occupied_cells(segs, z0.real, z0.imag, side, n)
    return frozenset(LadicSquare(k, int(i // n), int(i % n), l, z0) for i in ids)


@dataclass(frozen=True)
class CoverReport:
    """Maximal big squares plus residual finest-level squares, with their weights."""

    l: int
    m: int
    M: int
    epsilon: float
    d: float
    big_squares: Tuple[LadicSquare, ...]
    residual_squares: Tuple[LadicSquare, ...]
    y1: float
    y2: float

    @property
    def total(self):
        return self.y1 + self.y2


def cover_weights(big, residual, l, M, d):
    """``Y1 = sum l^(-d k)`` over big squares, ``Y2 = sum l^(-d M)`` over residual ones."""
    y1 = 0.0
    for sq in sorted(big):
        y1 += float(l) ** (-d * sq.level)
    y2 = 0.0
    for _ in sorted(residual):
        y2 += float(l) ** (-d * M)
    return y1, y2


def build_cover(field_, occ, epsilon):
    """Cover of the curve by maximal big squares and residual level-M squares.

    A level-k square is big when its mass exceeds ``l^(-d k) / epsilon``.
    Levels are scanned coarse to fine and a big square is admitted only if
    no ancestor was admitted, so the admitted squares are exactly the
    maximal ones.
    """
    if not epsilon > 0:
        raise ParamError(f"epsilon must be positive, got {epsilon}")
    l, m, M, d = field_.base, field_.m, field_.M, field_.d
    if m >= M:
        raise ParamError(f"need m < M, got m={m}, M={M}")
    missing = [k for k in range(m, M) if k not in field_.levels]
    if missing:
        raise ParamError(f"field lacks levels {missing}")
    for sq in occ:
        if sq.level != M or sq.base != l or sq.offset != field_.offset:
            raise ParamError("occupancy squares must be level-M squares of the field's grid")
    admitted = set()
    for k in range(m, M):
        thr = float(l) ** (-d * k) / epsilon
        for sq in sorted(s for s, v in field_.mass.items() if s.level == k and v > thr):
            if not any(sq.ancestor(j) in admitted for j in range(m, k)):
                admitted.add(sq)
    residual = [sq for sq in occ if not any(sq.ancestor(j) in admitted for j in range(m, M))]
    big = tuple(sorted(admitted))
    residual = tuple(sorted(residual))
    y1, y2 = cover_weights(big, residual, l, M, d)
    return CoverReport(l, m, M, float(epsilon), d, big, residual, y1, y2)


def cover_trace(trace, l, m, M, epsilons, z0=Z0, d=None, occupancy_step=None, check_resolution=True):
    """Field on levels ``m..M-1``, level-M occupancy and one cover per epsilon."""
    fld = mu_field(trace, l, m, M, z0=z0, d=d, levels=range(m, M), check_resolution=check_resolution)
    occ = occupancy(trace, l, M, z0=z0, max_step=occupancy_step)
    return [build_cover(fld, occ, e) for e in np.atleast_1d(epsilons)]


def hausdorff_upper(trace, alpha, scale_level, l, z0=Z0, check_resolution=True):
    """Upper bound on ``H^alpha_delta`` of the curve in ``A + z0``, ``delta = sqrt(2) l^-k``.

    Sums ``(sqrt(2) l^-k)^alpha`` over the occupied level-k squares.
    """
    side = float(l) ** (-scale_level)
    occ = occupancy(trace, l, scale_level, z0=z0, max_step=side / 4 if check_resolution else None)
    return len(occ) * (np.sqrt(2.0) * side) ** alpha


@dataclass(frozen=True)
class DimensionFit:
    scales: Tuple[float, ...]
    counts: Tuple[int, ...]
    slope: float
    r2: float
    intercept: float = 0.0


def box_dimension(trace, l, k_range, z0=Z0, check_resolution=True):
    """Least-squares slope of ``log N(k)`` against ``log l^k``.

    ``N(k)`` counts level-k squares of ``A + z0`` met by the curve; the trace
    must resolve the finest level to a quarter of its side. A list of traces
    pools the counts over all of them.
    """
    ks = sorted(set(int(k) for k in k_range))
    if len(ks) < 4:
        raise ParamError("box_dimension needs at least 4 levels")
    traces = trace if isinstance(trace, (list, tuple)) else [trace]
    finest = float(l) ** (-ks[-1])
    counts = []
    for k in ks:
        step = finest / 4 if (check_resolution and k == ks[-1]) else None
        counts.append(sum(len(occupancy(tr, l, k, z0=z0, max_step=step)) for tr in traces))
    if min(counts) == 0:
        raise ParamError("the curve does not meet A + z0")
    scales = tuple(float(l) ** (-k) for k in ks)
    fit = stats.linregress(-np.log(scales), np.log(counts))
    return DimensionFit(scales, tuple(counts), float(fit.slope), float(fit.rvalue ** 2), float(fit.intercept))


# --------------------------------------------------------------------------
# probability that a square in a nested chain fails to be big
# --------------------------------------------------------------------------


def square_chain(l, depth, z0=Z0):
    """``D_0 = A + z0`` and ``D_{j+1}`` = the child of ``D_j`` whose lower-left corner is the centre."""
    out = [LadicSquare(0, 0, 0, l, z0)]
    for _ in range(depth):
        p = out[-1]
        out.append(LadicSquare(p.level + 1, p.n1 * l + l // 2, p.n2 * l + l // 2, l, z0))
    return out


def _first_inside(pts, rect):
    x0, y0, x1, y1 = rect
    ins = (pts.real >= x0) & (pts.real <= x1) & (pts.imag >= y0) & (pts.imag <= y1)
    idx = np.flatnonzero(ins)
    return int(idx[0]) if idx.size else -1


def _meets(pts, rect):
    segs = _segments(pts)
    x0, y0, x1, y1 = rect
    near, _ = segments_near(segs, x0, y0, x1, y1, 0.0)
    if near[0].size == 0:
        return False
    return occupied_cells(near, x0, y0, x1 - x0, 1).size > 0


@dataclass(frozen=True)
class BigSquareEstimate:
    k: int
    epsilon: float
    threshold: float
    proposals: int
    accepted: int
    q_hat: float
    stderr: float


def chain_masses(cfg, k, l, n, enlargement=4.0, proposal="chordal", z0=Z0, screen_slack=1.05):
    """Masses of ``D_k`` accumulated between entering ``D_k*`` and ``D_{k+1}*``.

    Proposals are chordal SLE replicas ``cfg.replica .. cfg.replica + n - 1``
    (kept when the curve enters ``D_{k+1}``) or two-sided radial SLE aimed at
    the centre of ``D_{k+1}`` (kept on the same event). Stars denote the
    concentric squares ``enlargement`` times larger.

    Returns
    -------
    masses : ndarray
        One entry per accepted replica.
    proposals : int
    """
    from .sle_sampler import (RadialTarget, chordal_driving, refine_near, two_sided_run)
    from .rng import BRIDGE, replica_rng

    if proposal not in ("chordal", "two_sided"):
        raise ParamError(f"unknown proposal {proposal!r}")
    if k < 0:
        raise ParamError("k must be >= 0")
    chain = square_chain(l, k + 1, z0)
    dk, dk1 = chain[k], chain[k + 1]
    star_k = enlarged(dk.rect, enlargement)
    star_k1 = enlarged(dk1.rect, enlargement)
    if star_k[1] <= 0:
        raise ParamError("enlarged square reaches the real axis; lower the enlargement")
    x0, y0, x1, y1 = dk.rect
    if not (star_k1[0] >= x0 and star_k1[2] <= x1 and star_k1[1] >= y0 and star_k1[3] <= y1):
        raise ParamError("enlarged inner square is not inside the outer square; lower the enlargement")
    eps_k = dk.side / EPS_DIVISOR
    d = dimension_of(cfg.kappa)
    centre = dk1.center
    reach = np.sqrt(2.0) * dk1.side * screen_slack
    masses = []
    for r in range(cfg.replica, cfg.replica + n):
        c = cfg.with_replica(r)
        if proposal == "chordal":
            drv = chordal_driving(c)
            # Koebe: entering D_{k+1} forces Upsilon(centre) <= 2 dist <= sqrt(2) side
            traj = evolve_point(drv, centre)
            if traj.upsilon[-1] > reach and traj.status != "swallowed":
                continue
            rng = replica_rng(c.seed, r, BRIDGE)
            drv, tr = refine_near(drv, star_k, eps_k, rng=rng)
            drv, tr = refine_near(drv, dk1.rect, dk1.side / 4, rng=rng)
        else:
            target = RadialTarget(centre, dk1.side / 8)
            run = two_sided_run(c, target)
            tr = run.trace
        pts = tr.points
        if not _meets(pts, dk1.rect):
            continue
        i0 = _first_inside(pts, star_k)
        i1 = _first_inside(pts, star_k1)
        if i0 < 0 or i1 < 0:
            continue
        piece = pts[max(i0 - 1, 0): i1 + 1]
        masses.append(minkowski_mass(piece, dk.rect, eps_k, d, check_resolution=proposal == "chordal"))
    return np.array(masses), n


def big_square_prob_mc(cfg, k, epsilon, l=16, n=1000, min_accepted=100, masses=None, **kw):
    """Probability that ``D_k`` collects less than ``l^(-d k) / epsilon`` between entry times.

    Parameters
    ----------
    epsilon : float or sequence
        All levels share the same accepted replicas.
    masses : ndarray, optional
        Reuse masses from ``chain_masses`` instead of sampling.

    Raises
    ------
    StarvedError
        If fewer than ``min_accepted`` proposals are accepted.
    """
    if masses is None:
        masses, n = chain_masses(cfg, k, l, n, **kw)
    acc = masses.size
    if acc < min_accepted:
        raise StarvedError(f"only {acc} of {n} proposals entered the level-{k + 1} square")
    d = dimension_of(cfg.kappa)
    out = []
    for e in np.atleast_1d(epsilon):
        if not e > 0:
            raise ParamError("epsilon must be positive")
        thr = float(l) ** (-d * k) / e
        q = float((masses < thr).mean())
        out.append(BigSquareEstimate(k, float(e), thr, n, acc, q, float(np.sqrt(max(q * (1 - q), 1.0 / acc) / acc))))
    return out[0] if np.ndim(epsilon) == 0 else out
