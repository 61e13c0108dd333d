"""Matrix files, grayscale images and JSON, all written atomically."""

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .linalg import as_matrix


def atomic_write_text(path, text):
    """Write ``text`` to ``path`` via a temp file in the same directory."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_matrix_csv(M):
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    return "".join(",".join(repr(float(v)) for v in row) + "\n" for row in M)


def write_matrix_csv(path, M):
    """Headerless row-major CSV; values round-trip exactly."""
    atomic_write_text(path, format_matrix_csv(M))


def read_matrix_csv(path):
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        rows = [line.strip() for line in fh if line.strip()]
    if not rows:
        raise ValueError(f"{path}: empty matrix file")
    data = [[float(x) for x in line.split(",")] for line in rows]
    widths = {len(r) for r in data}
    if len(widths) != 1:
        raise ValueError(f"{path}: ragged rows")
    return as_matrix(np.array(data), str(path))


def format_pgm(P):
    """Plain (P2) graymap of a matrix in [0, 1]; darker pixels are larger entries."""
    P = np.clip(np.asarray(P, dtype=np.float64), 0.0, 1.0)
    h, w = P.shape
    pix = np.rint(255.0 * (1.0 - P)).astype(int)
    lines = [f"P2\n{w} {h}\n255\n"]
    lines += [" ".join(str(v) for v in row) + "\n" for row in pix]
    return "".join(lines)


def write_pgm(path, P):
    atomic_write_text(path, format_pgm(P))


def write_json(path, payload):
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_rows_csv(path, header, rows):
    lines = [",".join(header)]
    lines += [",".join(_cell(v) for v in row) for row in rows]
    atomic_write_text(path, "\n".join(lines) + "\n")


def _cell(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)
