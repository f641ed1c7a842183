"""CSV + schema + SVG emission for experiment results.

Every report kind has a fixed column list, written to a JSON sidecar next to
the CSV. Floats go through ``repr`` so identical results give identical
bytes.
"""

import csv
import json
import os

import numpy as np

from .errors import ParamError

SCHEMAS = {
    "sample": [
        ("replica", "replica index"),
        ("file", "trace file name"),
        ("points", "number of grid times"),
        ("t_max", "capacity horizon"),
        ("max_height", "largest Im of the curve"),
    ],
    "green": [
        ("z", "target point"),
        ("epsilon", "conformal-radius level"),
        ("n", "replicas"),
        ("hits", "replicas with Upsilon_inf <= epsilon"),
        ("p_hat", "hit frequency"),
        ("stderr", "Wilson half-width (one sigma)"),
        ("theory", "c* epsilon^(2-d) G(z)"),
        ("ratio", "p_hat / theory"),
    ],
    "dimension": [
        ("kappa", "SLE parameter"),
        ("scale", "square side l^-k"),
        ("count", "occupied squares"),
        ("slope", "fitted box dimension"),
        ("intercept", "fit intercept (log count at scale 1)"),
        ("r2", "coefficient of determination"),
        ("expected", "1 + kappa/8"),
    ],
    "natural-measure": [
        ("square", "square label"),
        ("x0", "left edge"),
        ("y0", "bottom edge"),
        ("side", "side length"),
        ("replicas", "traces"),
        ("mean_mass", "mean Minkowski mass"),
        ("stderr", "standard error of the mean"),
        ("green_integral", "integral of G over the square"),
        ("ratio", "mean_mass / green_integral"),
        ("stalled_segments", "trace segments left longer than the target step at the refinement floor"),
    ],
    "cover": [
        ("epsilon", "big-square threshold parameter"),
        ("replicas", "traces"),
        ("mean_y1", "mean big-square weight"),
        ("mean_y2", "mean residual weight"),
        ("mean_total", "mean Y1 + Y2"),
        ("stderr_total", "standard error of mean_total"),
        ("mean_big", "mean number of big squares"),
        ("stalled_segments", "trace segments left longer than the target step at the refinement floor"),
    ],
    "hcap": [
        ("t", "capacity time"),
        ("estimate", "walker estimate of hcap"),
        ("stderr", "standard error"),
        ("expected", "a t"),
        ("maps", "hcap from the composed maps"),
    ],
}


def _cell(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, complex):
        return f"{x.real!r}{x.imag:+}i"
    return str(x)


def write_csv(path, rows, columns):
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r[c]) for c in columns])


def emit_report(results, kind, outdir, stem=None, timestamp=False):
    """Write ``<stem>.csv``, ``<stem>.schema.json`` and, if there are rows, ``<stem>.svg``.

    Parameters
    ----------
    results : list of dict
        One row per estimate, keyed by the column names of ``kind``.
    kind : str
        One of ``SCHEMAS``.
    timestamp : bool
        Keep matplotlib's creation-date metadata in the SVG.

    Returns
    -------
    list of str
        Paths written.
    """
    if kind not in SCHEMAS:
        raise ParamError(f"unknown report kind {kind!r}")
    stem = stem or kind
    os.makedirs(outdir, exist_ok=True)
    cols = [c for c, _ in SCHEMAS[kind]]
    for r in results:
        missing = [c for c in cols if c not in r]
        if missing:
            raise ParamError(f"{kind} row lacks {missing}")
    csv_path = os.path.join(outdir, stem + ".csv")
    write_csv(csv_path, results, cols)
    schema_path = os.path.join(outdir, stem + ".schema.json")
    with open(schema_path, "w", encoding="ascii") as fh:
        json.dump({"kind": kind, "columns": [{"name": c, "description": d} for c, d in SCHEMAS[kind]]},
                  fh, indent=2)
        fh.write("\n")
    paths = [csv_path, schema_path]
    if results and kind in _PLOTS:
        svg_path = os.path.join(outdir, stem + ".svg")
        _plot(results, kind, svg_path, timestamp)
        paths.append(svg_path)
    return paths


def _plot_dimension(ax, rows):
    for kappa in sorted(set(r["kappa"] for r in rows)):
        sub = [r for r in rows if r["kappa"] == kappa]
        x = np.log(1.0 / np.array([r["scale"] for r in sub]))
        y = np.log(np.array([r["count"] for r in sub], float))
        line, = ax.plot(x, y, "o", label=f"kappa={kappa:g}")
        s, c = sub[0]["slope"], sub[0]["intercept"]
        ax.plot(x, c + s * x, "-", color=line.get_color())
        ax.annotate(f"slope {s:.3f}", (x[-1], c + s * x[-1]), textcoords="offset points", xytext=(-60, 8))
    ax.set_xlabel("log(1/side)")
    ax.set_ylabel("log count")
    ax.legend()


def _plot_green(ax, rows):
    e = np.array([r["epsilon"] for r in rows])
    ratio = np.array([r["ratio"] for r in rows])
    err = np.array([r["stderr"] / r["theory"] for r in rows])
    ax.errorbar(e, ratio, yerr=err, fmt="o-")
    ax.axhline(1.0, color="k", lw=0.8, ls="--")
    ax.set_xscale("log")
    ax.set_xlabel("epsilon")
    ax.set_ylabel("p_hat / prediction")


def _plot_cover(ax, rows):
    e = np.array([r["epsilon"] for r in rows])
    ax.errorbar(e, [r["mean_total"] for r in rows], yerr=[r["stderr_total"] for r in rows], fmt="o-",
                label="Y1+Y2")
    ax.plot(e, [r["mean_y1"] for r in rows], "s--", label="Y1")
    ax.plot(e, [r["mean_y2"] for r in rows], "^--", label="Y2")
    ax.set_xscale("log")
    ax.set_xlabel("epsilon")
    ax.set_ylabel("mean weight")
    ax.legend()


def _plot_natural(ax, rows):
    ax.errorbar(range(len(rows)), [r["ratio"] for r in rows],
                yerr=[r["stderr"] / r["green_integral"] for r in rows], fmt="o")
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels([r["square"] for r in rows])
    ax.set_ylabel("mean mass / Green integral")


_PLOTS = {"dimension": _plot_dimension, "green": _plot_green, "cover": _plot_cover,
          "natural-measure": _plot_natural}


def _plot(rows, kind, path, timestamp):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with matplotlib.rc_context({"svg.hashsalt": "slecover"}):
        fig, ax = plt.subplots(figsize=(5, 4))
        _PLOTS[kind](ax, rows)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata=None if timestamp else {"Date": None})
        plt.close(fig)
