"""Random driving functions: chordal SLE, two-sided radial SLE, rescaling.

Chordal driving is a standard Brownian motion on the capacity grid. Traces
can be refined locally by Brownian-bridge midpoint insertion, which keeps the
law of the driving path exact at every grid time.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ParamError, ResolutionError, TargetSwallowedEarly
from . import _kernels as K
from .loewner_core import DrivingPath, Trace, trace
from .rng import BRIDGE, DRIVING, TWO_SIDED, ReplicaNormals, replica_rng


@dataclass(frozen=True)
class SamplerConfig:
    """Simulation parameters for one replica.

    ``dt`` is the capacity step and ``t_max`` the horizon; the grid has
    ``ceil(t_max / dt)`` equal steps ending exactly at ``t_max``.
    """

    kappa: float
    dt: float
    t_max: float
    seed: int = 0
    replica: int = 0

    def __post_init__(self):
        if not 0 < self.kappa < 8:
            raise ParamError(f"kappa must lie in (0, 8), got {self.kappa}")
        if not self.dt > 0 or not self.t_max > 0:
            raise ParamError("dt and t_max must be positive")
        if self.dt > self.t_max:
            raise ParamError(f"dt={self.dt} exceeds t_max={self.t_max}")
        if self.replica < 0:
            raise ParamError("replica must be >= 0")

    @property
    def a(self):
        return 2.0 / self.kappa

    @property
    def n_steps(self):
        return int(np.ceil(self.t_max / self.dt - 1e-9))

    def with_replica(self, replica):
        return SamplerConfig(self.kappa, self.dt, self.t_max, self.seed, replica)


@dataclass(frozen=True)
class RadialTarget:
    """Interior point ``z`` and the conformal-radius level at which to stop."""

    z: complex
    stop_upsilon: float

    def __post_init__(self):
        z = complex(self.z)
        if not z.imag > 0:
            raise ParamError(f"target z must have Im z > 0, got {z}")
        if not 0 < self.stop_upsilon < z.imag:
            raise ParamError("stop_upsilon must lie in (0, Im z)")
        object.__setattr__(self, "z", z)


def chordal_driving(cfg):
    """Brownian driving path on the uniform grid of ``cfg``."""
    n = cfg.n_steps
    times = np.linspace(0.0, cfg.t_max, n + 1)
    rng = replica_rng(cfg.seed, cfg.replica, DRIVING)
    incr = rng.standard_normal(n) * np.sqrt(np.diff(times))
    values = np.concatenate([[0.0], np.cumsum(incr)])
    return DrivingPath(cfg.kappa, times, values)


def sample_chordal(cfg, offset=0.0, method="auto"):
    """Chordal SLE driving path and its trace."""
    drv = chordal_driving(cfg)
    return drv, trace(drv, offset=offset, method=method)


def refine_near(driving, region, max_step, seed=0, replica=0, margin=None, max_rounds=60, offset=0.0, rng=None,
                max_split=64, min_dt=None, strict=True):
    """Refine a Brownian driving path until the trace is fine near a region.

    Steps whose trace segment lies within ``margin`` of the rectangle
    ``region = (x0, y0, x1, y1)`` and is longer than ``max_step`` are split
    into about ``(length / max_step)^2`` (at most ``max_split``) equal pieces,
    with the new values drawn from the Brownian bridge. Repeats until no such
    segment remains. Bridge normals come from ``rng``
    if given, else from the replica's bridge stream.

    Steps shorter than ``min_dt`` (default ``1e-12 * max(1, t_max)``, well
    above the float spacing of the grid times) are never split. Inside nearly
    enclosed bubbles the tip can still move far in such a step.

    Returns
    -------
    (DrivingPath, Trace) or (DrivingPath, Trace, int)
        With ``strict=False`` the number of long segments left at the
        ``min_dt`` floor is returned as well.

    Raises
    ------
    ResolutionError
        If ``max_rounds`` rounds do not reach the target resolution, or, when
        ``strict``, if long segments remain at the ``min_dt`` floor.
    """
    if max_step <= 0:
        raise ParamError("max_step must be positive")
    x0, y0, x1, y1 = map(float, region)
    margin = 2.0 * max_step if margin is None else float(margin)
    if min_dt is None:
        min_dt = 1e-12 * max(1.0, driving.t_max)
    if rng is None:
        rng = replica_rng(seed, replica, BRIDGE)
    tr = trace(driving, offset=offset)
    for _ in range(max_rounds):
        p = tr.points
        a, b = p[:-1], p[1:]
        near = ((np.maximum(a.real, b.real) >= x0 - margin) & (np.minimum(a.real, b.real) <= x1 + margin)
                & (np.maximum(a.imag, b.imag) >= y0 - margin) & (np.minimum(a.imag, b.imag) <= y1 + margin))
        length = np.abs(b - a)
        long_ = np.flatnonzero(near & (length > max_step))
        dt = np.diff(driving.times)
        # the segment ending at tip k+1 also carries the driving jump of step k-1
        splittable = (dt[long_] >= min_dt) | ((long_ > 0) & (dt[np.maximum(long_ - 1, 0)] >= min_dt))
        bad = long_[splittable]
        if bad.size == 0:
            stalled = int(long_.size)
            if stalled and strict:
                raise ResolutionError(f"{stalled} segments near {region} stay longer than {max_step} "
                                      f"at the step floor {min_dt:g}")
            return (driving, tr) if strict else (driving, tr, stalled)
        pieces = np.zeros(length.size, np.int64)
        want = np.clip(np.ceil((length[bad] / max_step) ** 2), 2, max_split).astype(np.int64)
        pieces[bad] = want
        has_prev = bad > 0
        np.maximum.at(pieces, bad[has_prev] - 1, want[has_prev])
        pieces[dt < min_dt] = 0
        driving = _bridge_split(driving, pieces, rng)
        # tips up to the first split step are unchanged
        first = int(np.flatnonzero(pieces > 1)[0])
        tr = trace(driving, offset=offset, keep=tr.points[: first + 1])
    raise ResolutionError(f"trace near {region} still coarser than {max_step} after {max_rounds} rounds")


def _bridge_split(driving, pieces, rng):
    """Split step ``k`` into ``pieces[k]`` equal sub-steps (0 or 1 = keep).

    New values are an exact Brownian-bridge sample between the old ones: a
    free walk of ``pieces[k]`` Gaussian steps with its end tilted onto the
    known value.
    """
    t, v = driving.times, driving.values
    ks = np.flatnonzero(pieces > 1)
    m = pieces[ks]
    seg = np.repeat(np.arange(ks.size), m)
    start = np.concatenate([[0], np.cumsum(m)[:-1]])
    j = np.arange(seg.size) - start[seg] + 1
    dt = (t[ks + 1] - t[ks]) / m
    walk = np.cumsum(rng.standard_normal(seg.size) * np.sqrt(dt[seg]))
    walk -= np.concatenate([[0.0], walk])[start][seg]
    end = walk[start + m - 1][seg]
    frac = j / m[seg]
    vals = v[ks][seg] + walk + frac * (v[ks + 1][seg] - v[ks][seg] - end)
    times = t[ks][seg] + dt[seg] * j
    keep = j < m[seg]
    at = np.repeat(ks + 1, m - 1)
    return DrivingPath(driving.kappa, np.insert(t, at, times[keep]), np.insert(v, at, vals[keep]))


def sample_chordal_refined(cfg, region, max_step, **kw):
    """``sample_chordal`` followed by ``refine_near`` with the replica's bridge stream."""
    drv = chordal_driving(cfg)
    return refine_near(drv, region, max_step, seed=cfg.seed, replica=cfg.replica, **kw)


def two_sided_drift(Z, a):
    """Drift ``(4a - 1) Re Z / |Z|^2`` of the two-sided radial driving function.

    Weighting chordal SLE by ``M_t(z)`` adds ``d<V, log M>`` to the driving
    function; only ``S_t(z)^(4a-1)`` contributes and the result pulls ``V``
    towards ``Re g_t(z)``. Written with ``X = Re(V - g_t(z)) = -Re Z`` this is
    ``(1 - 4a) X / |Z|^2``.
    """
    Z = np.asarray(Z, dtype=np.complex128)
    return (4.0 * a - 1.0) * Z.real / (Z.real ** 2 + Z.imag ** 2)


def _upper_sqrt(w):
    s = np.sqrt(w)
    return np.where(s.imag < 0, -s, s)


@dataclass(frozen=True)
class TwoSidedRun:
    driving: DrivingPath
    trace: Trace
    reached: bool
    upsilon: float


def two_sided_run(cfg, target, step_scale=0.01, offset=0.0, trace_method="auto", chunk=4096):
    """Euler-Maruyama two-sided radial SLE aimed at ``target.z``.

    The step is ``min(cfg.dt, step_scale * |Z|^2)`` so that the drift, of size
    ``1/|Z|``, stays resolved as the curve closes in on the target. Slit
    steps are exact, so ``Upsilon`` tracked here equals the one of
    ``evolve_point`` on the returned driving path.

    Raises
    ------
    TargetSwallowedEarly
        If the flow loses the target before its conformal radius reaches
        ``target.stop_upsilon``.
    """
    z = target.z
    rng = replica_rng(cfg.seed, cfg.replica, TWO_SIDED)
    times = np.zeros(chunk + 1)
    values = np.zeros(chunk + 1)
    Z, logY, t, V = z, np.log(z.imag), 0.0, 0.0
    n = 0
    while True:
        if times.size < n + chunk + 1:
            times = np.concatenate([times, np.zeros(max(chunk, times.size))])
            values = np.concatenate([values, np.zeros(max(chunk, values.size))])
        Z, logY, t, V, used, status = K.two_sided_chunk(
            Z, logY, t, V, rng.standard_normal(chunk), cfg.a, cfg.dt, step_scale, cfg.t_max,
            np.log(target.stop_upsilon), times, values, n)
        n += used
        if status == 3:
            raise TargetSwallowedEarly(f"target {z} swallowed at t={t:.6g} before reaching the stop radius")
        if status:
            break
    drv = DrivingPath(cfg.kappa, times[: n + 1], values[: n + 1])
    return TwoSidedRun(drv, trace(drv, offset=offset, method=trace_method), status == 1, float(np.exp(logY)))


def sample_two_sided(cfg, target, **kw):
    """Two-sided radial SLE through ``target.z``; see ``two_sided_run``."""
    run = two_sided_run(cfg, target, **kw)
    return run.driving, run.trace


def rescale(driving, trace_, r):
    """Brownian rescaling: times ``t / r^2``, driving ``V / r``, curve ``gamma / r``."""
    if not r > 0:
        raise ParamError("r must be positive")
    r = float(r)
    drv = DrivingPath(driving.kappa, driving.times / (r * r), driving.values / r, driving.a)
    tr = Trace(drv, trace_.points / r, trace_.degenerate, trace_.offset / r)
    return drv, tr


class PointEnsemble:
    """Many independent replicas of the flow of one interior point.

    Only ``Z_t(z)`` and ``log Upsilon_t(z)`` are tracked, so no trace is
    built. Step ``k`` of replica ``i`` uses the ``k``-th normal of that
    replica's own random stream.

    Parameters
    ----------
    kappa : float
    z : complex
        Tracked point.
    replicas : array of int
        Replica indices (select the random streams).
    seed : int
    two_sided : bool
        Add the two-sided radial drift to the driving function.
    swallow_tol : float
        ``sin(arg Z)`` level below which the point counts as swallowed.
    """

    def __init__(self, kappa, z, replicas, seed, two_sided=False, swallow_tol=1e-8, stream=None):
        self.a = 2.0 / kappa
        self.z = complex(z)
        n = len(replicas)
        self.Z = np.full(n, self.z)
        self.logY = np.full(n, np.log(self.z.imag))
        self.t = np.zeros(n)
        self.swallowed = np.zeros(n, bool)
        self.two_sided = two_sided
        self.tol = swallow_tol
        if stream is None:
            stream = TWO_SIDED if two_sided else DRIVING
        self.normals = ReplicaNormals(seed, replicas, stream)

    def advance(self, idx, dt):
        """One exact slit step of length ``dt[j]`` for each replica ``idx[j]``."""
        Z = self.Z[idx]
        s = _upper_sqrt(Z * Z + 2.0 * self.a * dt)
        az2 = Z.real ** 2 + Z.imag ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            dlog = np.log(s.imag / Z.imag) + 0.5 * np.log((s.real ** 2 + s.imag ** 2) / az2)
        dV = np.sqrt(dt) * self.normals.draw(idx)
        if self.two_sided:
            dV += two_sided_drift(Z, self.a) * dt
        Znew = s - dV
        gone = ~(s.imag > 0) | (Znew.imag < self.tol * np.abs(Znew))
        ok = ~gone
        self.logY[idx[ok]] += dlog[ok]
        self.Z[idx[ok]] = Znew[ok]
        self.t[idx] += dt
        self.swallowed[idx[gone]] = True
        return gone
