"""Command line: ``slecover <command> [--config FILE] [--flag value ...]``.

Every command reads a flat ``key = value`` config file (optional) and lets
flags override it. The resolved parameters are written to ``manifest.json``
in the output directory next to the CSV, schema and SVG files. Exit status
is 0 on success, 2 for configuration errors and 3 for estimator failures.
"""

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction

import numpy as np

from . import fractal_measure as fm
from . import observables as obs
from .errors import ParamError, SLEError
from .loewner_core import capacity_from_maps, hcap_mc
from .report import emit_report
from .sle_sampler import SamplerConfig, chordal_driving, refine_near, sample_chordal
from .traceio import write_trace

OUTPUT_ENV = "SLECOVER_OUTPUT_DIR"
DEFAULT_OUTPUT = "slecover_out"


def parse_kappa(text):
    """Accept decimals and fractions such as ``8/3``."""
    try:
        return float(Fraction(str(text).strip()))
    except (ValueError, ZeroDivisionError) as exc:
        raise ParamError(f"kappa: cannot parse {text!r}") from exc


def parse_complex(text):
    """Accept ``0+1i``, ``1j``, ``-0.5+2i`` and plain reals."""
    s = str(text).strip().replace(" ", "").replace("i", "j")
    try:
        return complex(s)
    except ValueError as exc:
        raise ParamError(f"cannot parse complex number {text!r}") from exc


def parse_floats(text):
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise ParamError(f"cannot parse list of numbers {text!r}") from exc


def _int(text):
    try:
        v = float(text)
    except ValueError as exc:
        raise ParamError(f"cannot parse integer {text!r}") from exc
    if v != int(v):
        raise ParamError(f"expected an integer, got {text!r}")
    return int(v)


def _float(text):
    try:
        return float(text)
    except ValueError as exc:
        raise ParamError(f"cannot parse number {text!r}") from exc


# per command: key -> (parser, default, help)
_COMMON = {
    "seed": (_int, 0, "master seed"),
    "out": (str, None, f"output directory (default ${OUTPUT_ENV} or {DEFAULT_OUTPUT})"),
    "workers": (_int, 1, "worker processes"),
    "timestamp": (_int, 0, "1 keeps the creation date in SVG files"),
}

COMMANDS = {
    "sample": {
        "kappa": (parse_kappa, None, "SLE parameter"),
        "dt": (_float, 1e-4, "capacity step"),
        "t_max": (_float, 1.0, "capacity horizon"),
        "replicas": (_int, 1, "number of traces"),
        "offset": (_float, 0.0, "height above the driving point at which tips are taken"),
    },
    "green-verify": {
        "kappa": (parse_kappa, None, "SLE parameter"),
        "z": (parse_complex, 1j, "target point"),
        "eps": (parse_floats, [0.2, 0.1, 0.05], "comma-separated conformal-radius levels"),
        "n": (_int, 20000, "replicas"),
        "dt": (_float, 1e-3, "relative flow step (times |z|^2)"),
        "t_max": (_float, 1e8, "capacity horizon"),
    },
    "dimension": {
        "kappa": (parse_kappa, None, "SLE parameter"),
        "l": (_int, 2, "grid base"),
        "k_min": (_int, 3, "coarsest level"),
        "k_max": (_int, 7, "finest level"),
        "replicas": (_int, 12, "traces pooled into the fit"),
        "dt": (_float, 1e-3, "capacity step before refinement"),
        "t_max": (_float, 16.0, "capacity horizon"),
    },
    "natural-measure": {
        "kappa": (parse_kappa, None, "SLE parameter"),
        "l": (_int, 2, "grid base"),
        "m": (_int, 1, "level of the compared squares"),
        "replicas": (_int, 100, "traces"),
        "dt": (_float, 1e-3, "capacity step before refinement"),
        "t_max": (_float, 16.0, "capacity horizon"),
    },
    "cover": {
        "kappa": (parse_kappa, None, "SLE parameter"),
        "l": (_int, 16, "grid base"),
        "m": (_int, 1, "coarsest cover level"),
        "M": (_int, 3, "residual level"),
        "eps": (parse_floats, [0.5, 0.1, 0.02], "comma-separated thresholds"),
        "replicas": (_int, 50, "traces"),
        "dt": (_float, 1e-3, "capacity step before refinement"),
        "t_max": (_float, 16.0, "capacity horizon"),
    },
    "hcap-check": {
        "kappa": (parse_kappa, None, "SLE parameter"),
        "dt": (_float, 1e-4, "capacity step"),
        "t": (_float, 1.0, "capacity time checked"),
        "walkers": (_int, 100000, "Brownian walkers"),
    },
}


def read_config(path):
    """Flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParamError(f"{path}:{lineno}: expected key = value")
            k, v = line.split("=", 1)
            out[k.strip().replace("-", "_")] = v.strip()
    return out


def resolve(command, flags, config=None, env=None):
    """Merge defaults, config file, environment and flags (later wins).

    Raises
    ------
    ParamError
        On unknown keys or unparsable values; the message names the key.
    """
    spec = dict(_COMMON, **COMMANDS[command])
    env = os.environ if env is None else env
    merged = {k: v[1] for k, v in spec.items()}
    raw = {}
    for k, v in (config or {}).items():
        if k not in spec:
            raise ParamError(f"unknown config key {k!r} for {command}")
        raw[k] = v
    if env.get(OUTPUT_ENV):
        raw["out"] = env[OUTPUT_ENV]
    raw.update({k: v for k, v in flags.items() if v is not None})
    for k, v in raw.items():
        try:
            merged[k] = spec[k][0](v)
        except ParamError as exc:
            raise ParamError(f"{k}: {exc}") from exc
    if merged["out"] is None:
        merged["out"] = DEFAULT_OUTPUT
    missing = [k for k, v in merged.items() if v is None]
    if missing:
        raise ParamError(f"missing required parameter(s): {', '.join(missing)}")
    if merged["workers"] < 1:
        raise ParamError("workers must be >= 1")
    return merged


def build_parser():
    p = argparse.ArgumentParser(prog="slecover", description="Chordal SLE simulation and covering estimates.")
    sub = p.add_subparsers(dest="command", required=True)
    for name, spec in COMMANDS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=None, help="flat key = value file; flags override it")
        for k, (_, default, text) in dict(_COMMON, **spec).items():
            flag = "--" + k.replace("_", "-")
            sp.add_argument(flag, dest=k, default=None, help=f"{text} (default {default})")
    return p


def _pool_map(fn, items, workers):
    if workers <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------- pipelines


def _sample_one(job):
    cfg, offset, out = job
    _, tr = sample_chordal(cfg, offset=offset)
    name = f"trace_{cfg.replica:05d}.txt"
    write_trace(os.path.join(out, name), tr, dt=cfg.dt, seed=cfg.seed, replica=cfg.replica)
    return {"replica": cfg.replica, "file": name, "points": tr.points.size, "t_max": cfg.t_max,
            "max_height": float(tr.points.imag.max())}


def run_sample(p):
    os.makedirs(p["out"], exist_ok=True)
    base = SamplerConfig(p["kappa"], p["dt"], p["t_max"], p["seed"])
    jobs = [(base.with_replica(r), p["offset"], p["out"]) for r in range(p["replicas"])]
    return _pool_map(_sample_one, jobs, p["workers"]), "sample"


def run_green(p):
    cfg = SamplerConfig(p["kappa"], p["dt"], p["t_max"], p["seed"])
    est = obs.green_hit_prob_mc(p["z"], p["eps"], p["n"], cfg)
    rows = [{"z": e.z, "epsilon": e.epsilon, "n": e.n, "hits": e.hits, "p_hat": e.p_hat, "stderr": e.stderr,
             "theory": e.theory, "ratio": e.ratio} for e in est]
    return rows, "green"


def _dimension_trace(job):
    cfg, l, k_max = job
    region = (fm.Z0.real, fm.Z0.imag, fm.Z0.real + 1, fm.Z0.imag + 1)
    _, tr, stalled = refine_near(chordal_driving(cfg), region, float(l) ** (-k_max) / 4,
                                 seed=cfg.seed, replica=cfg.replica, strict=False)
    return tr, stalled


def run_dimension(p):
    base = SamplerConfig(p["kappa"], p["dt"], p["t_max"], p["seed"])
    got = _pool_map(_dimension_trace, [(base.with_replica(r), p["l"], p["k_max"])
                                       for r in range(p["replicas"])], p["workers"])
    traces = [tr for tr, _ in got]
    p["stalled_segments"] = int(sum(s for _, s in got))
    # segments stalled at the step floor are reported, not rejected
    fit = fm.box_dimension(traces, p["l"], range(p["k_min"], p["k_max"] + 1),
                           check_resolution=p["stalled_segments"] == 0)
    rows = [{"kappa": p["kappa"], "scale": s, "count": c, "slope": fit.slope, "intercept": fit.intercept,
             "r2": fit.r2, "expected": 1.0 + p["kappa"] / 8.0} for s, c in zip(fit.scales, fit.counts)]
    return rows, "dimension"


def _level_squares(l, k):
    n = l ** k
    return [fm.LadicSquare(k, i, j, l) for i in range(n) for j in range(n)]


def _natural_one(job):
    cfg, l, m = job
    region = (fm.Z0.real, fm.Z0.imag, fm.Z0.real + 1, fm.Z0.imag + 1)
    _, tr, stalled = refine_near(chordal_driving(cfg), region, float(l) ** (-m) / fm.EPS_DIVISOR,
                                 seed=cfg.seed, replica=cfg.replica, strict=False)
    fld = fm.mu_field(tr, l, m, m, levels=[m], check_resolution=stalled == 0)
    return [fld.get(sq) for sq in _level_squares(l, m)], stalled


def natural_measure(kappa, l, m, replicas, dt, t_max, seed=0, workers=1):
    """Mean Minkowski mass of each level-m square against the integral of G over it."""
    base = SamplerConfig(kappa, dt, t_max, seed)
    got = _pool_map(_natural_one, [(base.with_replica(r), l, m) for r in range(replicas)], workers)
    masses = np.array([x for x, _ in got])
    stalled = int(sum(s for _, s in got))
    rows = []
    for j, sq in enumerate(_level_squares(l, m)):
        x0, y0, x1, y1 = sq.rect
        g = obs.integrate_green(sq.rect, kappa)
        mean = float(masses[:, j].mean())
        se = float(masses[:, j].std(ddof=1) / np.sqrt(replicas)) if replicas > 1 else float("nan")
        rows.append({"square": f"({sq.n1},{sq.n2})", "x0": x0, "y0": y0, "side": x1 - x0, "replicas": replicas,
                     "mean_mass": mean, "stderr": se, "green_integral": g, "ratio": mean / g,
                     "stalled_segments": stalled})
    return rows


def run_natural(p):
    return natural_measure(p["kappa"], p["l"], p["m"], p["replicas"], p["dt"], p["t_max"], p["seed"],
                           p["workers"]), "natural-measure"


def _cover_one(job):
    cfg, l, m, M, eps = job
    region = (fm.Z0.real, fm.Z0.imag, fm.Z0.real + 1, fm.Z0.imag + 1)
    _, tr, stalled = refine_near(chordal_driving(cfg), region, float(l) ** (-(M - 1)) / fm.EPS_DIVISOR,
                                 seed=cfg.seed, replica=cfg.replica, strict=False)
    covers = fm.cover_trace(tr, l, m, M, eps, check_resolution=stalled == 0)
    return [(c.y1, c.y2, len(c.big_squares), stalled) for c in covers]


def cover_experiment(kappa, l, m, M, eps, replicas, dt, t_max, seed=0, workers=1):
    """Mean ``Y1``, ``Y2`` over independent traces, one row per epsilon."""
    base = SamplerConfig(kappa, dt, t_max, seed)
    per = np.array(_pool_map(_cover_one, [(base.with_replica(r), l, m, M, tuple(eps)) for r in range(replicas)],
                             workers))
    rows = []
    for j, e in enumerate(eps):
        y1, y2, nb = per[:, j, 0], per[:, j, 1], per[:, j, 2]
        stalled = int(per[:, j, 3].sum())
        tot = y1 + y2
        se = float(tot.std(ddof=1) / np.sqrt(replicas)) if replicas > 1 else float("nan")
        rows.append({"epsilon": float(e), "replicas": replicas, "mean_y1": float(y1.mean()),
                     "mean_y2": float(y2.mean()), "mean_total": float(tot.mean()), "stderr_total": se,
                     "mean_big": float(nb.mean()), "stalled_segments": stalled})
    return rows


def run_cover(p):
    if not p["m"] < p["M"]:
        raise ParamError("need m < M")
    return cover_experiment(p["kappa"], p["l"], p["m"], p["M"], p["eps"], p["replicas"], p["dt"], p["t_max"],
                            p["seed"], p["workers"]), "cover"


def run_hcap(p):
    cfg = SamplerConfig(p["kappa"], p["dt"], p["t"], p["seed"])
    drv, tr = sample_chordal(cfg)
    est, se = hcap_mc(tr, p["t"], n_walkers=p["walkers"], seed=p["seed"])
    return [{"t": p["t"], "estimate": est, "stderr": se, "expected": drv.a * p["t"],
             "maps": capacity_from_maps(drv, p["t"])}], "hcap"


_RUNNERS = {"sample": run_sample, "green-verify": run_green, "dimension": run_dimension,
            "natural-measure": run_natural, "cover": run_cover, "hcap-check": run_hcap}


def _jsonable(v):
    if isinstance(v, complex):
        return {"re": v.real, "im": v.imag}
    return v


def run_cli(argv=None):
    """Run one command; returns the exit status."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    flags = {k: v for k, v in vars(ns).items() if k not in ("command", "config")}
    try:
        config = read_config(ns.config) if ns.config else None
        params = resolve(ns.command, flags, config)
        rows, kind = _RUNNERS[ns.command](params)
        paths = emit_report(rows, kind, params["out"], timestamp=bool(params["timestamp"]))
        manifest = {"command": ns.command, "params": {k: _jsonable(v) for k, v in sorted(params.items())},
                    "outputs": sorted(os.path.basename(x) for x in paths)}
        with open(os.path.join(params["out"], "manifest.json"), "w", encoding="ascii") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        print(f"slecover: error: {exc}", file=sys.stderr)
        return 2
    except SLEError as exc:
        print(f"slecover: {exc.code}: {exc}", file=sys.stderr)
        return exc.exit_status
    return 0


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
