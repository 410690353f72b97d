"""Plain-text dumps: complex arrays, heatmaps and optimizer traces.

Floats are written with ``repr`` so a dump round-trips to the same doubles
and reruns produce identical bytes.
"""

from __future__ import annotations

import csv
import io

import numpy as np


def _fmt(x) -> str:
    return repr(float(x))


def dump_complex(array) -> str:
    """Header ``# shape d0 d1 ...`` then one ``re im`` line per entry, row-major."""
    a = np.asarray(array, dtype=complex)
    lines = ["# shape " + " ".join(str(d) for d in a.shape)]
    lines += [f"{_fmt(v.real)} {_fmt(v.imag)}" for v in a.ravel()]
    return "\n".join(lines) + "\n"


def load_complex(text: str) -> np.ndarray:
    rows = text.strip().splitlines()
    if not rows or not rows[0].startswith("# shape"):
        raise ValueError("missing '# shape' header")
    shape = tuple(int(d) for d in rows[0].split()[2:])
    vals = np.array([complex(float(r), float(i)) for r, i in (line.split() for line in rows[1:])])
    return vals.reshape(shape)


def dump_matrix(matrix) -> str:
    """Real matrix, one row per line, space separated."""
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    return "\n".join(" ".join(_fmt(v) for v in row) for row in m) + "\n"


TRACE_COLUMNS = ("iteration", "step", "layer", "gamma", "max_slack", "alpha", "config_hash")


def dump_trace(log, config_hash: str = "") -> str:
    """Optimizer log rows ``(iteration, step, layer, gamma, max_slack, alpha)`` as CSV."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    for it, step, layer, gamma, slack, alpha in log:
        w.writerow([it, step, "" if layer is None else layer, _fmt(gamma),
                    "" if slack is None else _fmt(slack), _fmt(alpha), config_hash])
    return buf.getvalue()
