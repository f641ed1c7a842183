"""Plain-text trace files.

A file starts with ``# key=value`` header lines and continues with one row
``t V re im`` per grid time. Floats are written with ``repr`` (shortest
round-trip decimal), so reading a written trace gives back identical arrays.
"""

import numpy as np

from .errors import ParamError, TraceFormatError
from .loewner_core import DrivingPath, Trace

FORMAT_VERSION = 1
_HEADER_KEYS = ("version", "kappa", "a", "dt", "t_max", "seed", "replica", "offset", "count")


def _fmt(x):
    return repr(float(x))


def write_trace(path, trace_, dt=None, seed=0, replica=0):
    """Write ``trace_`` (with its driving path) to ``path``.

    ``dt`` is the nominal grid step recorded in the header; it defaults to
    the first step of the grid.
    """
    drv = trace_.driving
    if dt is None:
        dt = drv.times[1] - drv.times[0] if drv.n_steps else 0.0
    head = {
        "version": str(FORMAT_VERSION),
        "kappa": _fmt(drv.kappa),
        "a": _fmt(drv.a),
        "dt": _fmt(dt),
        "t_max": _fmt(drv.t_max),
        "seed": str(int(seed)),
        "replica": str(int(replica)),
        "offset": _fmt(trace_.offset),
        "count": str(drv.times.size),
    }
    lines = [f"# {k}={head[k]}" for k in _HEADER_KEYS]
    lines.append("# columns: t V re im")
    t, v, p = drv.times.tolist(), drv.values.tolist(), trace_.points
    re, im = p.real.tolist(), p.imag.tolist()
    lines.extend(f"{t[i]!r} {v[i]!r} {re[i]!r} {im[i]!r}" for i in range(len(t)))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def read_header(path):
    """Header of a trace file as a dict of strings."""
    head = {}
    with open(path, encoding="ascii") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            body = line[1:].strip()
            if "=" in body:
                k, v = body.split("=", 1)
                head[k.strip()] = v.strip()
    return head


def read_trace(path):
    """Read a file written by ``write_trace``.

    Returns
    -------
    (DrivingPath, Trace)

    Raises
    ------
    TraceFormatError
        On a version mismatch, a header with ``kappa * a != 2``, or a missing
        or malformed row (the message names the row).
    """
    try:
        with open(path, encoding="ascii") as fh:
            text = fh.read()
    except UnicodeDecodeError as exc:
        raise TraceFormatError(f"{path}: not a text trace file") from exc
    head = {}
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                k, v = body.split("=", 1)
                head[k.strip()] = v.strip()
            continue
        if line.strip():
            rows.append((lineno, line))
    missing = [k for k in _HEADER_KEYS if k not in head]
    if missing:
        raise TraceFormatError(f"{path}: header lacks {', '.join(missing)}")
    if head["version"] != str(FORMAT_VERSION):
        raise TraceFormatError(f"{path}: format version {head['version']}, expected {FORMAT_VERSION}")
    try:
        kappa, a = float(head["kappa"]), float(head["a"])
        count = int(head["count"])
        offset = float(head["offset"])
    except ValueError as exc:
        raise TraceFormatError(f"{path}: malformed header ({exc})") from exc
    if abs(kappa * a - 2.0) > 1e-12:
        raise TraceFormatError(f"{path}: header has kappa*a = {kappa * a!r}, expected 2")
    data = np.empty((count, 4))
    for i, (lineno, line) in enumerate(rows[:count]):
        parts = line.split()
        if len(parts) != 4:
            raise TraceFormatError(f"{path}: row {i} (line {lineno}) has {len(parts)} fields, expected 4")
        try:
            data[i] = [float(x) for x in parts]
        except ValueError as exc:
            raise TraceFormatError(f"{path}: row {i} (line {lineno}) is malformed") from exc
    if len(rows) < count:
        raise TraceFormatError(f"{path}: truncated at row {len(rows)} of {count}")
    if len(rows) > count:
        raise TraceFormatError(f"{path}: {len(rows) - count} rows beyond the declared count {count}")
    try:
        drv = DrivingPath(kappa, data[:, 0], data[:, 1], a)
        pts = data[:, 2] + 1j * data[:, 3]
        deg = np.zeros(count, bool)
        deg[1:] = pts.imag[1:] == 0.0
        tr = Trace(drv, pts, deg, offset)
    except ParamError as exc:
        raise TraceFormatError(f"{path}: inconsistent data ({exc})") from exc
    return drv, tr
