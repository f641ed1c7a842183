"""Green's function, the one-point local martingale and their Monte-Carlo checks."""

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import DeadPointError, DomainError, HorizonError, ParamError, WalkerBudgetExceeded
from .geometry import SegmentIndex
from .rng import WALKERS, replica_rng
from .sle_sampler import PointEnsemble


@dataclass(frozen=True)
class GreenParams:
    """Exponents attached to ``kappa``: ``a = 2/kappa`` and ``d = 1 + min(kappa/8, 1)``."""

    kappa: float

    def __post_init__(self):
        if not 0 < self.kappa < 8:
            raise ParamError(f"kappa must lie in (0, 8), got {self.kappa}")
        # the sine exponent has two algebraic forms; they must agree
        alt = self.kappa / 8 + 8 / self.kappa - 2 + (2 - self.d)
        if abs(alt - self.sine_exponent) > 1e-12:
            raise ParamError("inconsistent Green exponents")

    @property
    def a(self):
        return 2.0 / self.kappa

    @property
    def d(self):
        return 1.0 + min(self.kappa / 8.0, 1.0)

    @property
    def sine_exponent(self):
        return 4.0 * self.a - 1.0


def _check_kappa(kappa):
    return GreenParams(float(kappa))


def green_h(z, kappa):
    """Half-plane Green's function ``Im(z)^(d-2) sin(arg z)^(4a-1)``.

    Accepts scalars or arrays; raises ``DomainError`` if any ``Im z <= 0``.
    """
    gp = _check_kappa(kappa)
    z = np.asarray(z, dtype=np.complex128)
    if np.any(~(z.imag > 0)):
        raise DomainError("green_h needs Im z > 0")
    s = z.imag / np.abs(z)
    out = z.imag ** (gp.d - 2.0) * s ** gp.sine_exponent
    return float(out) if out.ndim == 0 else out


def green_h_modulus_form(z, kappa):
    """Same function written as ``|z|^(d-2) sin(arg z)^(kappa/8 + 8/kappa - 2)``."""
    gp = _check_kappa(kappa)
    z = np.asarray(z, dtype=np.complex128)
    if np.any(~(z.imag > 0)):
        raise DomainError("green_h needs Im z > 0")
    s = z.imag / np.abs(z)
    out = np.abs(z) ** (gp.d - 2.0) * s ** (gp.kappa / 8 + 8 / gp.kappa - 2)
    return float(out) if out.ndim == 0 else out


def green_general(upsilon, s, kappa):
    """Domain Green's function from conformal radius and angle: ``Y^(d-2) S^(4a-1)``."""
    gp = _check_kappa(kappa)
    upsilon = np.asarray(upsilon, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(~(upsilon > 0)) or np.any(~(s > 0)) or np.any(s > 1):
        raise DomainError("need upsilon > 0 and s in (0, 1]")
    out = upsilon ** (gp.d - 2.0) * s ** gp.sine_exponent
    return float(out) if out.ndim == 0 else out


def local_mart(traj, kappa, t=None):
    """``M_t = |g_t'|^(2-d) G(Z_t)`` along a point trajectory.

    With ``t=None`` the whole record is returned; otherwise the value at grid
    time ``t``, raising ``DeadPointError`` once the point has been swallowed
    or the record has ended.
    """
    gp = _check_kappa(kappa)
    m = traj.g_prime_abs ** (2.0 - gp.d) * green_h(traj.Z, kappa)
    if t is None:
        return m
    if traj.swallow_time is not None and t >= traj.swallow_time:
        raise DeadPointError(f"t={t} is past the swallowing time {traj.swallow_time}")
    i = int(np.searchsorted(traj.times, t))
    if i >= traj.times.size or not np.isclose(traj.times[i], t, rtol=1e-12, atol=1e-15):
        raise DeadPointError(f"no live record at t={t}")
    return float(m[i])


def c_star(kappa):
    """``2 / int_0^pi sin(x)^(4a) dx`` by adaptive quadrature."""
    if not kappa > 0:
        raise ParamError("kappa must be positive")
    a = 2.0 / kappa
    val, _ = integrate.quad(lambda x: np.sin(x) ** (4.0 * a), 0.0, np.pi, epsabs=1e-13, epsrel=1e-13, limit=200)
    return 2.0 / val


def wilson_interval(hits, n, zval=1.0):
    """Wilson score interval ``(centre, half_width)`` for a binomial proportion."""
    if n <= 0:
        raise ParamError("n must be positive")
    p = hits / n
    den = 1.0 + zval * zval / n
    centre = (p + zval * zval / (2 * n)) / den
    half = zval * np.sqrt(p * (1 - p) / n + zval * zval / (4 * n * n)) / den
    return centre, half


@dataclass(frozen=True)
class GreenEstimate:
    """Monte-Carlo estimate of ``P(Upsilon_inf(z) <= epsilon)`` and its asymptotic prediction."""

    z: complex
    epsilon: float
    n: int
    hits: int
    p_hat: float
    theory: float
    ratio: float
    stderr: float

    @property
    def ratio_stderr(self):
        return self.stderr / self.theory


def _flow_to_stability(kappa, z, n, seed, replica0, rel_dt, t_max, eps_min,
                       stab_tol, escape_factor, checkpoints=None, eps_stop=None):
    """Advance a chordal point ensemble with scale-invariant steps.

    Each step has length ``rel_dt * |Z|^2`` (clipped to checkpoint times), so
    the flow is resolved at every scale the point visits. Replicas stop when
    ``Upsilon <= eps_min``, when swallowed, or when ``Upsilon`` has changed
    by less than ``stab_tol`` (relative) over the last doubling of capacity
    time while ``|Z| > escape_factor |z|`` and ``S^(4a-1) < stab_tol``.

    Returns the ensemble, per-replica ``stable`` flags and, if checkpoints are
    given, the stopped log-radius and ``S`` recorded at each checkpoint.
    """
    ens = PointEnsemble(kappa, z, np.arange(replica0, replica0 + n), seed)
    az = abs(z)
    active = np.ones(n, bool)
    stable = np.zeros(n, bool)
    next_dbl = np.full(n, az * az)
    prev_log = ens.logY.copy()
    log_eps = np.log(eps_min)
    cps = np.sort(np.asarray(checkpoints if checkpoints is not None else [], float))
    rec_logY = np.zeros((cps.size, n))
    rec_S = np.zeros((cps.size, n))
    cp_idx = np.zeros(n, np.int64)
    stopped = np.zeros(n, bool)
    t_floor = 1e-15 * az * az
    while active.any():
        idx = np.flatnonzero(active)
        Z = ens.Z[idx]
        t = ens.t[idx]
        dt = rel_dt * (Z.real ** 2 + Z.imag ** 2)
        bound = np.minimum(next_dbl[idx], t_max)
        if cps.size:
            nxt = np.where(cp_idx[idx] < cps.size, cps[np.minimum(cp_idx[idx], cps.size - 1)], np.inf)
            bound = np.minimum(bound, nxt)
        dt = np.maximum(np.minimum(dt, bound - t), t_floor)
        gone = ens.advance(idx, dt)
        t = ens.t[idx]
        logY = ens.logY[idx]
        hit = logY <= log_eps
        if eps_stop is not None:
            stopped[idx[hit]] = True
        if cps.size:
            # record checkpoints reached by this step (stopped values freeze)
            while True:
                has = cp_idx[idx] < cps.size
                at = has & (t >= cps[np.minimum(cp_idx[idx], cps.size - 1)] * (1 - 1e-12))
                if not at.any():
                    break
                j = idx[at]
                c = cp_idx[j]
                rec_logY[c, j] = ens.logY[j]
                Zj = ens.Z[j]
                rec_S[c, j] = np.where(ens.swallowed[j], 0.0, Zj.imag / np.abs(Zj))
                cp_idx[j] += 1
        done = hit | gone
        dbl = t >= next_dbl[idx] * (1 - 1e-12)
        if dbl.any():
            j = idx[dbl]
            Zj = ens.Z[j]
            # the angle must also be too close to the axis to come back: from
            # sin(arg Z) = S it returns to order one with probability ~ S^(4a-1)
            back = (Zj.imag / np.abs(Zj)) ** (4.0 * ens.a - 1.0)
            calm = (prev_log[j] - ens.logY[j] < stab_tol) & (np.abs(Zj) > escape_factor * az) & (back < stab_tol)
            stable[j[calm]] = True
            prev_log[j] = ens.logY[j]
            next_dbl[j] *= 2.0
            done[dbl] |= calm
        stable[idx[hit | gone]] = True
        over = t >= t_max * (1 - 1e-12)
        done |= over
        if cps.size:
            # keep running until every checkpoint has been recorded
            pend = cp_idx[idx] < cps.size
            fill = done & pend & ~over
            if fill.any():
                j = idx[fill]
                for c in range(cps.size):
                    m = cp_idx[j] <= c
                    rec_logY[c, j[m]] = ens.logY[j[m]]
                    Zj = ens.Z[j[m]]
                    rec_S[c, j[m]] = np.where(ens.swallowed[j[m]], 0.0, Zj.imag / np.abs(Zj))
                cp_idx[j] = cps.size
        active[idx[done]] = False
    return ens, stable, rec_logY, rec_S


def green_hit_prob_mc(z, epsilon, n, cfg, stab_tol=1e-4, escape_factor=10.0, horizon_frac=0.01):
    """Estimate ``P(Upsilon_inf(z) <= epsilon)`` for chordal SLE.

    Parameters
    ----------
    z : complex
    epsilon : float or sequence of float
        One ensemble serves every level given.
    n : int
        Replicas ``cfg.replica, ..., cfg.replica + n - 1``.
    cfg : SamplerConfig
        ``cfg.dt`` sets the relative step ``dt / |z|^2`` of the
        scale-invariant flow; ``cfg.t_max`` is the capacity horizon.

    Returns
    -------
    GreenEstimate or list of GreenEstimate

    Raises
    ------
    HorizonError
        If more than ``horizon_frac`` of the replicas have not stabilised by
        ``cfg.t_max``.
    """
    z = complex(z)
    if not z.imag > 0:
        raise DomainError("z must lie in the upper half-plane")
    eps = np.atleast_1d(np.asarray(epsilon, float))
    if np.any(eps <= 0) or n < 1:
        raise ParamError("epsilon must be positive and n >= 1")
    gp = GreenParams(cfg.kappa)
    cs = c_star(cfg.kappa)
    g = green_h(z, cfg.kappa)
    need = eps[eps < z.imag]
    if need.size:
        ens, stable, _, _ = _flow_to_stability(cfg.kappa, z, n, cfg.seed, cfg.replica, cfg.dt / abs(z) ** 2,
                                               cfg.t_max, need.min(), stab_tol, escape_factor)
        bad = (~stable).sum()
        if bad > horizon_frac * n:
            raise HorizonError(f"{bad} of {n} replicas did not stabilise by t_max={cfg.t_max}")
        y_inf = np.exp(ens.logY)
    else:
        y_inf = np.full(n, z.imag)
    out = []
    for e in eps:
        hits = int((y_inf <= e).sum())
        p = hits / n
        _, half = wilson_interval(hits, n)
        theory = cs * e ** (2.0 - gp.d) * g
        out.append(GreenEstimate(z, float(e), n, hits, p, theory, p / theory, float(half)))
    return out[0] if np.ndim(epsilon) == 0 else out


def stopped_martingale_mc(z, epsilon, times, n, cfg):
    """Ensemble mean of ``M_{t ^ tau_epsilon}(z)`` at each of ``times``.

    Returns
    -------
    list of (t, mean, stderr)
    """
    z = complex(z)
    gp = GreenParams(cfg.kappa)
    times = np.sort(np.asarray(times, float))
    if np.any(times <= 0):
        raise ParamError("times must be positive")
    t_end = float(times.max())
    ens, _, logY, S = _flow_to_stability(cfg.kappa, z, n, cfg.seed, cfg.replica, cfg.dt / abs(z) ** 2,
                                         t_end, epsilon, np.inf, np.inf, checkpoints=times, eps_stop=epsilon)
    out = []
    for c, t in enumerate(times):
        m = np.exp((gp.d - 2.0) * logY[c]) * S[c] ** gp.sine_exponent
        out.append((float(t), float(m.mean()), float(m.std(ddof=1) / np.sqrt(n))))
    return out


ARCS = ("negative_axis", "positive_axis", "curve", "curve_left", "curve_right", "left", "right")


def harmonic_measure_mc(domain_boundary, z, arc, n, seed=0, band=1e-4, max_steps=100_000):
    """Probability that Brownian motion from ``z`` leaves ``H`` minus the slits through ``arc``.

    Parameters
    ----------
    domain_boundary : sequence of complex arrays
        Polylines removed from the upper half-plane (may be empty).
    arc : str
        One of ``ARCS``. ``left`` is the negative axis together with the
        left-hand side of the polylines (relative to their direction);
        ``right`` is the mirror choice.

    Returns
    -------
    (estimate, stderr)
    """
    from .walkers import AXIS, CURVE, run_walkers

    if arc not in ARCS:
        raise ParamError(f"unknown arc {arc!r}; choose from {ARCS}")
    z = complex(z)
    if not z.imag > 0:
        raise DomainError("z must lie in the upper half-plane")
    index = SegmentIndex(list(domain_boundary))
    if np.isfinite(index.distance(z)[0]) and index.distance(z)[0] <= band:
        raise DomainError("z lies on the boundary")
    rng = replica_rng(seed, 0, WALKERS)
    _, x, info, ok = run_walkers(index, np.full(n, z), band, max_steps, rng)
    if not ok.all():
        raise WalkerBudgetExceeded(f"{(~ok).sum()} walkers exceeded {max_steps} steps")
    kind, side = info["kind"], info["side"]
    neg = (kind == AXIS) & (x < 0)
    pos = (kind == AXIS) & (x >= 0)
    cl = (kind == CURVE) & (side > 0)
    cr = (kind == CURVE) & (side < 0)
    sel = {"negative_axis": neg, "positive_axis": pos, "curve": cl | cr,
           "curve_left": cl, "curve_right": cr, "left": neg | cl, "right": pos | cr}[arc]
    p = sel.mean()
    return float(p), float(np.sqrt(max(p * (1 - p), 1.0 / n) / n))


def integrate_green(region, kappa, mesh=16, rtol=1e-6, max_mesh=8192):
    """Integral of ``green_h`` over the rectangle ``(x0, y0, x1, y1)``.

    Midpoint rule on a ``mesh x mesh`` grid, doubled until two successive
    Richardson-extrapolated values agree to ``rtol``.
    """
    x0, y0, x1, y1 = map(float, region)
    if x1 < x0 or y1 < y0:
        raise ParamError("region corners out of order")
    if y0 <= 0:
        raise DomainError("region must lie in the open upper half-plane")
    if x1 == x0 or y1 == y0:
        return 0.0

    def mid(m):
        hx = (x1 - x0) / m
        hy = (y1 - y0) / m
        xs = x0 + (np.arange(m) + 0.5) * hx
        ys = y0 + (np.arange(m) + 0.5) * hy
        total = 0.0
        for y in ys:
            total += green_h(xs + 1j * y, kappa).sum()
        return total * hx * hy

    prev = mid(mesh)
    prev_x = None
    m = mesh
    while m < max_mesh:
        m *= 2
        cur = mid(m)
        extr = cur + (cur - prev) / 3.0
        if prev_x is not None and abs(extr - prev_x) <= rtol * abs(extr):
            return float(extr)
        prev, prev_x = cur, extr
    raise ParamError(f"integrate_green did not converge below mesh {max_mesh}")
