"""CSV and JSON writers for kernels, survival series, reports and disorder realizations.

CSV: comma separated, ``#`` metadata lines holding one JSON object, 17
significant digits, LF line endings. Non-finite floats are written as
``inf``/``-inf``/``nan`` in CSV and as strings in JSON.
"""

import csv
import io
import json
import math

import numpy as np


def _clean(obj):
    """Recursively make ``obj`` strict-JSON-serializable."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return obj


def dumps(obj):
    return json.dumps(_clean(obj), sort_keys=True, allow_nan=False, indent=2) + "\n"


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


def table_csv(columns, metadata):
    """Render ``columns`` (name -> equal-length sequence) as CSV text with a metadata header."""
    names = list(columns)
    lengths = {len(columns[n]) for n in names}
    if len(lengths) > 1:
        raise ValueError("columns must have equal lengths")
    buf = io.StringIO(newline="")
    buf.write("# " + json.dumps(_clean(metadata), sort_keys=True, allow_nan=False) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(names)
    for row in zip(*(columns[n] for n in names)):
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def read_csv(text):
    """Inverse of :func:`table_csv` (floats only): returns (metadata, columns)."""
    lines = text.splitlines()
    meta = {}
    body = []
    for line in lines:
        if line.startswith("#"):
            meta.update(json.loads(line[1:]))
        else:
            body.append(line)
    rows = list(csv.reader(body))
    names, data = rows[0], rows[1:]
    cols = {n: np.array([float(r[i]) for r in data]) for i, n in enumerate(names)}
    return meta, cols


def kernels_columns(kernels, level_energy):
    """Wide table over the union of levels: n, E_n and one weight column per kernel.

    Entries missing from a kernel are 0. Kernels carrying ``stderr`` add a
    ``<name>_stderr`` column.
    """
    levels = np.unique(np.concatenate([k.levels for k in kernels.values()]))
    cols = {"n": levels, "E_n": np.asarray(level_energy(levels), dtype=float)}
    for name, k in kernels.items():
        idx = np.searchsorted(levels, k.levels)
        w = np.zeros(levels.size)
        w[idx] = k.weights
        cols[name] = w
        if k.stderr is not None:
            s = np.zeros(levels.size)
            s[idx] = k.stderr
            cols[f"{name}_stderr"] = s
    return cols


def series_columns(series):
    """Columns t and one value column per survival series (common time grid)."""
    first = next(iter(series.values()))
    cols = {"t": first.times}
    for name, s in series.items():
        if not np.array_equal(s.times, first.times):
            raise ValueError("survival series must share a time grid")
        cols[name] = s.values
    return cols


def realizations_json(records, metadata):
    return dumps({"schema": "ldos1d.realizations/1", "metadata": metadata, "realizations": records})


def write_text(path, text):
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(text)
