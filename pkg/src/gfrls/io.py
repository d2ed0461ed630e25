"""CSV trace files and shortest-round-trip number formatting.

Trace schema: a header row ``k,y_1..y_p,phi_1_1..phi_p_n[,gamma_1_1..gamma_p_p]``
then one row per step. ``phi`` and ``gamma`` are flattened row-major. Files are
UTF-8 with LF line endings, and floats are written with ``repr`` so that
re-reading them gives bit-identical values.
"""

import csv
import math
import re

import numpy as np

from .core import Sample
from .exceptions import SchemaError


def fmt(x):
    """Shortest decimal string that round-trips to the same float."""
    return repr(float(x))


def trace_header(n, p, with_gamma=False):
    cols = ["k"] + [f"y_{i}" for i in range(1, p + 1)]
    cols += [f"phi_{i}_{j}" for i in range(1, p + 1) for j in range(1, n + 1)]
    if with_gamma:
        cols += [f"gamma_{i}_{j}" for i in range(1, p + 1) for j in range(1, p + 1)]
    return cols


def emit_trace(path, samples, with_gamma=None):
    """Write ``samples`` to ``path``; gamma columns are written unless every gamma is the identity."""
    samples = list(samples)
    if not samples:
        raise SchemaError("cannot write an empty trace")
    n, p = samples[0].n, samples[0].p
    if with_gamma is None:
        with_gamma = any(not np.array_equal(s.gamma, np.eye(p)) for s in samples)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(trace_header(n, p, with_gamma))
        for k, s in enumerate(samples):
            row = [str(k)] + [fmt(v) for v in s.y] + [fmt(v) for v in s.phi.ravel()]
            if with_gamma:
                row += [fmt(v) for v in s.gamma.ravel()]
            writer.writerow(row)


def _infer_dims(header):
    p = sum(1 for c in header if re.fullmatch(r"y_\d+", c))
    phi_cols = [c for c in header if re.fullmatch(r"phi_\d+_\d+", c)]
    if p == 0 or not phi_cols or len(phi_cols) % p:
        raise SchemaError(f"row 1: cannot infer dimensions from header {header}")
    return len(phi_cols) // p, p


def ingest_trace(path, n=None, p=None):
    """Read a trace file into a list of :class:`Sample` in step order.

    ``n`` and ``p`` are inferred from the header when omitted. Errors carry the
    1-based file row (the header is row 1) and the column name.
    """
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError("row 1: file is empty")
    header = [c.strip() for c in rows[0]]
    if n is None or p is None:
        n, p = _infer_dims(header)
    plain, full = trace_header(n, p), trace_header(n, p, True)
    if header == plain:
        with_gamma = False
    elif header == full:
        with_gamma = True
    else:
        raise SchemaError(f"row 1: header {header} does not match the schema for n={n}, p={p}: {plain} (+ optional gamma columns)")
    samples = []
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise SchemaError(f"row {r}: expected {len(header)} fields, found {len(row)}")
        values = []
        for col, text in zip(header, row):
            try:
                value = float(text)
            except ValueError:
                raise SchemaError(f"row {r}, column {col!r}: {text!r} is not a number") from None
            if not math.isfinite(value):
                raise SchemaError(f"row {r}, column {col!r}: non-finite value {text!r}")
            values.append(value)
        if values[0] != r - 2:
            raise SchemaError(f"row {r}, column 'k': expected step {r - 2}, found {row[0]!r}")
        y = values[1 : 1 + p]
        phi = np.array(values[1 + p : 1 + p + p * n]).reshape(p, n)
        gamma = np.array(values[1 + p + p * n :]).reshape(p, p) if with_gamma else None
        try:
            samples.append(Sample(y=y, phi=phi, gamma=gamma))
        except ValueError as exc:
            raise SchemaError(f"row {r}: {exc}") from None
    return samples


def write_table(path, header, rows):
    """CSV table with ``repr`` floats (ints and strings pass through)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def jsonable(obj):
    """Recursively convert numpy values to plain Python; non-finite floats become ``None``."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj
