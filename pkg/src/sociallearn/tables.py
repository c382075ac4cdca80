"""CSV round-tripping for every table the package emits.

Floats are written with ``repr`` so re-parsing gives back the same doubles.
"""

from __future__ import annotations

import csv

import numpy as np


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def _parse(v):
    if v in ("True", "False"):
        return v == "True"
    try:
        return int(v)
    except ValueError:
        pass
    try:
        return float(v)
    except ValueError:
        return v


def write_csv(path, columns, rows, append=False) -> None:
    """Write (or append) rows; the header is written only when the file starts empty."""
    mode = "a" if append else "w"
    with open(path, mode, newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if fh.tell() == 0:
            w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def read_csv(path):
    """Return ``(header, rows)`` with ints, floats and bools restored."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = tuple(next(r))
        return header, [tuple(_parse(v) for v in row) for row in r]
