"""Small serialization helpers: complex arrays as [re, im] pairs, versioned CSV."""
import csv
import io
import json

import numpy as np


def complex_to_pairs(a):
    """Encode an array as nested lists with [re, im] leaves."""
    a = np.asarray(a)
    out = np.stack([a.real, np.imag(a)], axis=-1) if a.size else np.zeros(a.shape + (2,))
    return out.tolist()


def pairs_to_complex(obj, real_if_close=True):
    """Inverse of :func:`complex_to_pairs`."""
    arr = np.asarray(obj, dtype=float)
    if arr.shape[-1:] != (2,):
        raise ValueError("expected trailing [re, im] pairs")
    z = arr[..., 0] + 1j * arr[..., 1]
    if real_if_close and np.all(arr[..., 1] == 0):
        return arr[..., 0].copy()
    return z


def fmt(x):
    """Deterministic text form of a scalar for CSV output."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path, name, columns, rows, version=1):
    """Write a CSV whose first line is a versioned schema comment.

    The header line reads ``# softrec <name> v<version>`` followed by the
    column names and data rows.  Floats use ``repr`` so output is
    byte-stable for identical inputs.
    """
    buf = io.StringIO()
    buf.write(f"# softrec {name} v{version}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        vals = [r[c] for c in columns] if isinstance(r, dict) else list(r)
        w.writerow([fmt(v) for v in vals])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def read_csv(path):
    """Read a CSV written by :func:`write_csv`; returns (schema, columns, rows)."""
    with open(path, encoding="utf-8") as fh:
        schema = fh.readline().strip()
        rd = csv.reader(fh)
        cols = next(rd, [])
        rows = [r for r in rd]
    return schema, cols, rows


def dump_json(obj, path=None):
    """Serialize with sorted keys so repeated runs give identical bytes."""
    text = json.dumps(obj, sort_keys=True, indent=2, default=_default)
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    return text


def _default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serializable: {type(o).__name__}")
