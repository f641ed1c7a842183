"""Chordal Loewner flow with piecewise-constant driving.

Every capacity step ``[t_k, t_{k+1}]`` holds the driving function at
``V(t_k)`` and is solved exactly by a vertical-slit map of height
``sqrt(2 a dt_k)``, after which the frame is shifted to ``V(t_{k+1})``. The
curve is recovered by composing inverse slit maps (a zipper), either directly
or through a hierarchical tree of Laurent expansions.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels as K
from .errors import DomainError, ParamError, ResolutionError, SwallowedError, WalkerBudgetExceeded
from .geometry import SegmentIndex

#: below this many steps the O(N^2) direct zipper is used
DIRECT_LIMIT = 512
TREE_BLOCK = 16
TREE_TERMS = 32
TREE_RHO = 2.0


def _frozen(x, dtype):
    arr = np.array(x, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class DrivingPath:
    """Driving function sampled on a capacity-time grid.

    Parameters
    ----------
    kappa : float
        SLE parameter; the flow rate is ``a = 2 / kappa``.
    times : array_like
        Strictly increasing grid starting at 0.
    values : array_like
        ``V(t_i)``; ``values[0]`` must be 0.
    """

    kappa: float
    times: np.ndarray
    values: np.ndarray
    a: float = field(default=None)

    def __post_init__(self):
        kappa = float(self.kappa)
        if not kappa > 0 or not np.isfinite(kappa):
            raise ParamError(f"kappa must be positive, got {self.kappa}")
        a = 2.0 / kappa if self.a is None else float(self.a)
        if abs(a * kappa - 2.0) > 1e-12:
            raise ParamError(f"a * kappa must equal 2, got a={a}, kappa={kappa}")
        t = _frozen(self.times, np.float64)
        v = _frozen(self.values, np.float64)
        if t.ndim != 1 or t.size < 1 or t.shape != v.shape:
            raise ParamError("times and values must be 1-d arrays of equal length")
        if t[0] != 0.0:
            raise ParamError("times must start at 0")
        if np.any(np.diff(t) <= 0):
            raise ParamError("times must be strictly increasing")
        if v[0] != 0.0:
            raise ParamError("values[0] must be 0")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
            raise ParamError("driving contains non-finite entries")
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def n_steps(self):
        return self.times.size - 1

    @property
    def t_max(self):
        return float(self.times[-1])

    def step_arrays(self):
        """Per-step driving constants ``u`` and slit heights ``h``."""
        u = np.ascontiguousarray(self.values[:-1])
        h = np.sqrt(2.0 * self.a * np.diff(self.times))
        return u, h

    def index_of(self, t):
        """Grid index of time ``t``; raises if ``t`` is not a grid time."""
        i = int(np.searchsorted(self.times, t))
        if i < self.times.size and np.isclose(self.times[i], t, rtol=1e-12, atol=1e-15):
            return i
        if i > 0 and np.isclose(self.times[i - 1], t, rtol=1e-12, atol=1e-15):
            return i - 1
        raise ParamError(f"t={t} is not a grid time")

    def __eq__(self, other):
        if not isinstance(other, DrivingPath):
            return NotImplemented
        return (self.kappa == other.kappa and self.a == other.a
                and np.array_equal(self.times, other.times)
                and np.array_equal(self.values, other.values))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Trace:
    """Curve tips ``gamma(t_i)`` for every grid time of a driving path.

    ``degenerate`` flags times where the backward composition landed on the
    real axis (the stored point is then the real projection).
    """

    driving: DrivingPath
    points: np.ndarray
    degenerate: np.ndarray = field(default=None)
    offset: float = 0.0

    def __post_init__(self):
        p = _frozen(self.points, np.complex128)
        if p.shape != self.driving.times.shape:
            raise ParamError("one trace point per grid time is required")
        if np.any(p.imag < 0):
            raise DomainError("trace points must lie in the closed upper half-plane")
        deg = np.zeros(p.size, bool) if self.degenerate is None else self.degenerate
        object.__setattr__(self, "points", p)
        object.__setattr__(self, "degenerate", _frozen(deg, bool))

    @property
    def times(self):
        return self.driving.times

    def upto(self, t):
        """Polyline of the curve on ``[0, t]`` (``t`` a grid time)."""
        return self.points[: self.driving.index_of(t) + 1]

    def step_lengths(self):
        return np.abs(np.diff(self.points))

    def __eq__(self, other):
        if not isinstance(other, Trace):
            return NotImplemented
        return (self.driving == other.driving and self.offset == other.offset
                and np.array_equal(self.points, other.points))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class PointTrajectory:
    """History of one interior point under the forward flow.

    Records exist for grid times strictly before the swallowing time.
    ``Z = g_t(z) - V(t)``, ``upsilon = Im Z / |g_t'(z)|``, ``s = sin(arg Z)``.
    ``status`` is ``"alive"``, ``"swallowed"`` or ``"escaped"``.
    """

    z0: complex
    times: np.ndarray
    Z: np.ndarray
    g_prime_abs: np.ndarray
    swallow_time: Optional[float] = None
    status: str = "alive"

    def __post_init__(self):
        for name, dt in (("times", np.float64), ("Z", np.complex128), ("g_prime_abs", np.float64)):
            object.__setattr__(self, name, _frozen(getattr(self, name), dt))

    @property
    def upsilon(self):
        return self.Z.imag / self.g_prime_abs

    @property
    def s(self):
        return self.Z.imag / np.abs(self.Z)

    def __len__(self):
        return self.times.size


def slit_step(z, dV, dt, a):
    """One exact constant-driving step followed by the frame shift.

    Parameters
    ----------
    z : complex
        Point in the closed upper half-plane, in coordinates centred at the
        current driving value.
    dV : float
        Driving increment over the step.
    dt : float
        Capacity duration of the step (``dt = 0`` is the identity map).
    a : float
        Flow rate ``2 / kappa``.

    Returns
    -------
    complex
        ``sqrt(z**2 + 2 a dt) - dV`` on the upper-half-plane branch.

    Raises
    ------
    SwallowedError
        If an interior point reaches the real axis during the step.
    """
    z = complex(z)
    if dt < 0 or a <= 0:
        raise ParamError("dt must be >= 0 and a > 0")
    if z.imag < 0:
        raise DomainError(f"z={z} lies below the real axis")
    if z == 0:
        raise DomainError("z coincides with the slit base")
    w = K.phi(z, 0.0, float(np.sqrt(2.0 * a * dt)))
    if z.imag > 0 and w.imag <= 0:
        raise SwallowedError(f"z={z} is swallowed within the step")
    return w - dV


def evolve_point(driving, z, bound=1e9, swallow_tol=1e-8):
    """Flow an interior point forward along the whole driving path.

    The swallowing time is reported as the midpoint of the step during which
    ``sin(arg Z)`` falls below ``swallow_tol``. Points whose ``|Z|`` exceeds
    ``bound`` are marked escaped and their record stops there.
    """
    z = complex(z)
    if not z.imag > 0:
        raise DomainError(f"evolve_point needs Im z > 0, got {z}")
    u, h = driving.step_arrays()
    vnext = np.ascontiguousarray(driving.values[1:])
    Z, logg, nrec, status = K.evolve_point_kernel(u, h, vnext, z, float(bound), float(swallow_tol))
    times = driving.times[:nrec]
    swallow = None
    label = "alive"
    if status == 1:
        k = nrec - 1
        swallow = 0.5 * (driving.times[k] + driving.times[k + 1])
        label = "swallowed"
    elif status == 2:
        label = "escaped"
    return PointTrajectory(z, times, Z[:nrec], np.exp(logg[:nrec]), swallow, label)


def evolve_points(driving, zs, **kw):
    """``evolve_point`` for a sequence of points."""
    return [evolve_point(driving, z, **kw) for z in np.atleast_1d(zs)]


class Zipper:
    """Precomputed inverse maps ``f_{t_n} = psi_0 o ... o psi_{n-1}``.

    Parameters
    ----------
    driving : DrivingPath
    method : {"auto", "tree", "direct"}
        ``"direct"`` composes every map; ``"tree"`` uses block expansions.
    """

    def __init__(self, driving, method="auto"):
        if method not in ("auto", "tree", "direct"):
            raise ParamError(f"unknown zipper method {method!r}")
        self.driving = driving
        self.u, self.h = driving.step_arrays()
        n = self.u.size
        self.method = ("direct" if n <= DIRECT_LIMIT else "tree") if method == "auto" else method
        self._tree = None
        if self.method == "tree" and n > 0:
            self._tree = K.build_tree(self.u, self.h, TREE_BLOCK, TREE_TERMS, TREE_RHO)

    def tips(self, offset=0.0, start=0):
        """Tips ``f_{t_n}(V(t_{n-1}) + i*offset)`` for ``n >= start``."""
        n = self.u.size
        if n == 0:
            return np.zeros(1, np.complex128)[start:]
        if self._tree is None:
            return K.tips_direct(self.u, self.h, float(offset))[start:]
        nlo, nhi, cen, rad, beta, size = self._tree
        return K.tips_tree(self.u, self.h, float(offset), nlo, nhi, cen, rad, beta,
                           TREE_RHO, size, np.arange(start, n + 1, dtype=np.int64))

    def apply(self, ws, nsteps):
        """Apply ``f_{t_n}`` (without the driving shift) to points ``ws``."""
        ws = np.ascontiguousarray(np.atleast_1d(ws), dtype=np.complex128)
        ns = np.broadcast_to(np.asarray(nsteps, dtype=np.int64), ws.shape).copy()
        if self._tree is None:
            return K.apply_direct(ws, ns, self.u, self.h)
        nlo, nhi, cen, rad, beta, size = self._tree
        return K.apply_inverse_tree(ws, ns, self.u, self.h, nlo, nhi, cen, rad, beta, TREE_RHO, size)


def trace(driving, offset=0.0, method="auto", keep=None):
    """Reconstruct the curve at every grid time.

    The tip after ``n`` steps is the image of ``V(t_{n-1}) + i*offset`` under
    the composed inverse slit maps; with ``offset = 0`` this is the exact tip
    of the discrete hull. ``keep`` may supply already known leading tips
    (computed with the same offset and the same leading steps).
    """
    if offset < 0:
        raise ParamError("offset must be >= 0")
    nkeep = 0 if keep is None else len(keep)
    pts = Zipper(driving, method).tips(offset, start=nkeep)
    if nkeep:
        pts = np.concatenate([np.asarray(keep, np.complex128), pts])
    pts[0] = complex(driving.values[0], 0.0)
    deg = np.zeros(pts.size, bool)
    deg[1:] = pts[1:].imag <= 0.0
    pts.imag = np.maximum(pts.imag, 0.0)
    return Trace(driving, pts, deg, float(offset))


def hull_points(trace_, per_step=4, upto=None):
    """The slit images making up the discrete hull, one row per step.

    Row ``k`` samples ``f_{t_k}`` on the vertical slit above ``V(t_k)`` at
    ``per_step`` heights and ends at the tip ``gamma(t_{k+1})``. Its first
    point ``f_{t_k}(V(t_k))`` lies on the earlier hull or the real axis, not
    necessarily at ``gamma(t_k)``.

    Returns
    -------
    ndarray, shape (upto, per_step + 1)
    """
    drv = trace_.driving
    n = drv.n_steps if upto is None else int(upto)
    per_step = max(int(per_step), 1)
    if n == 0:
        return np.zeros((0, per_step + 1), np.complex128)
    u, h = drv.step_arrays()
    s = np.sqrt(np.arange(per_step) / per_step)
    ks = np.arange(n)
    ws = (u[:n, None] + 1j * h[:n, None] * s[None, :]).ravel()
    out = np.empty((n, per_step + 1), np.complex128)
    out[:, :-1] = Zipper(drv).apply(ws, np.repeat(ks, per_step)).reshape(n, per_step)
    out[:, -1] = trace_.points[1:n + 1]
    return out


def hull_distance(trace_, z, upto=None, rtol=0.01, max_rounds=40, zipper=None, max_pieces=2_000_000):
    """Distance from ``z`` to the discrete hull at step ``upto`` union the real axis.

    Step ``k`` of the hull is the image of the vertical slit above ``V(t_k)``
    under ``f_{t_k}``. That arc ends at the tip ``gamma(t_{k+1})`` but starts
    at ``f_{t_k}(V(t_k))``, which is generally not ``gamma(t_k)``; the chord
    between the two is not part of the hull. Each arc starts as four chords
    (uniform in squared height); chords that could still hold the nearest
    point are split in four until they are shorter than ``rtol`` times the
    current distance.

    Raises
    ------
    ResolutionError
        If the candidate chords do not settle within ``max_rounds`` splits or
        their number exceeds ``max_pieces``.
    """
    drv = trace_.driving
    n = drv.n_steps if upto is None else int(upto)
    z = complex(z)
    best = max(z.imag, 0.0)
    if n == 0:
        return best
    zp = zipper or Zipper(drv)
    u, h = zp.u, zp.h

    def image(k, q):
        out = zp.apply(u[k] + 1j * h[k] * np.sqrt(q), k)
        tip = q == 1.0
        out[tip] = trace_.points[k[tip] + 1]
        return out

    q = np.linspace(0.0, 1.0, 5)
    k = np.repeat(np.arange(n), 4)
    q0, q1 = np.tile(q[:-1], n), np.tile(q[1:], n)
    nodes = image(np.repeat(np.arange(n), 5), np.tile(q, n)).reshape(n, 5)
    a, b = nodes[:, :-1].ravel(), nodes[:, 1:].ravel()
    for _ in range(max_rounds):
        d = b - a
        L2 = np.maximum((d * d.conj()).real, 1e-300)
        t = np.clip(((z - a) * d.conj()).real / L2, 0.0, 1.0)
        dist = np.abs(z - (a + t * d))
        chord = np.sqrt(L2)
        best = min(best, float(dist.min()))
        # a piece of arc can only beat `best` if its chord is within one chord length of it
        keep = dist - chord <= best
        if not keep.any() or chord[keep].max() <= rtol * best:
            return best
        k, q0, q1, a, b = k[keep], q0[keep], q1[keep], a[keep], b[keep]
        if 4 * k.size > max_pieces:
            break
        frac = np.array([0.25, 0.5, 0.75])
        qm = q0[:, None] + (q1 - q0)[:, None] * frac[None, :]
        mid = image(np.repeat(k, 3), qm.ravel()).reshape(-1, 3)
        pts = np.column_stack([a, mid, b])
        qs = np.column_stack([q0, qm, q1])
        k = np.repeat(k, 4)
        a, b = pts[:, :-1].ravel(), pts[:, 1:].ravel()
        q0, q1 = qs[:, :-1].ravel(), qs[:, 1:].ravel()
    raise ResolutionError(f"hull distance from {z} did not settle (best {best:.3g})")


def capacity_from_maps(driving, t=None, y=None):
    """Half-plane capacity read off the 1/z coefficient of the composed map.

    Evaluates ``Re[z (g_t(z) - z)]`` at ``z = i y`` far above the hull, which
    equals the capacity up to ``O((R/y)^2)`` relative error.
    """
    n = driving.n_steps if t is None else driving.index_of(t)
    if n == 0:
        return 0.0
    if y is None:
        pts = trace(driving).points[: n + 1]
        y = 1e4 * max(np.abs(pts).max(), 1e-12)
    u, h = driving.step_arrays()
    return float(K.capacity_coefficient(u, h, n, float(y)))


def hcap_mc(trace_, t, n_walkers=100_000, y0=None, seed=0, band=None, max_steps=100_000):
    """Monte-Carlo half-plane capacity of the hull up to time ``t``.

    Brownian motion from ``i y0`` is simulated by walk-on-spheres until it
    comes within ``band`` of the real axis or the hull (the slit arcs of
    ``hull_points``); the capacity is ``y0 * E[Im B_tau]``, with the exit
    height read at the nearest boundary point.

    Returns
    -------
    (estimate, stderr) : tuple of float
    """
    from .walkers import run_walkers

    if n_walkers < 2:
        raise ParamError("n_walkers must be >= 2")
    n = trace_.driving.index_of(t)
    if n == 0:
        return 0.0, 0.0
    arcs = hull_points(trace_, per_step=4, upto=n)
    radius = float(np.abs(arcs).max())
    if y0 is None:
        y0 = 100.0 * radius
    if y0 <= radius:
        raise ParamError("y0 must exceed the hull radius")
    if band is None:
        band = 1e-5 * radius
    index = SegmentIndex(list(arcs))
    rng = np.random.default_rng(np.random.Philox(key=int(seed) & (2**64 - 1)))
    start = np.full(n_walkers, 1j * y0)
    hit_im, _, _, ok = run_walkers(index, start, band, max_steps, rng)
    if not ok.all():
        raise WalkerBudgetExceeded(f"{(~ok).sum()} walkers exceeded {max_steps} steps")
    vals = y0 * hit_im
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(n_walkers))
