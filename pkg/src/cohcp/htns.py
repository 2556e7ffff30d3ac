"""HTNS1 text format for dense complex hypermatrices.

Layout::

    line 1:  d                      (number of modes)
    line 2:  n_1 n_2 ... n_d        (dims, space separated)
    then prod(n_k) lines of "re im" in row-major order (mode 1 slowest)

Values are written with 17 significant digits, which round-trips IEEE
doubles exactly.
"""

from __future__ import annotations

import io

import numpy as np


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def dump_htns(tensor) -> str:
    t = np.ascontiguousarray(np.asarray(tensor, dtype=np.complex128))
    lines = [str(t.ndim), " ".join(str(n) for n in t.shape)]
    for v in t.ravel():
        lines.append(f"{_fmt(v.real)} {_fmt(v.imag)}")
    return "\n".join(lines) + "\n"


def write_htns(path, tensor) -> None:
    """Write a hypermatrix to an HTNS1 text file."""
    with open(path, "w") as fh:
        fh.write(dump_htns(tensor))


def parse_htns(text: str) -> np.ndarray:
    return read_htns(io.StringIO(text))


def read_htns(path_or_file) -> np.ndarray:
    """Read an HTNS1 text file into a complex hypermatrix."""
    if hasattr(path_or_file, "read"):
        fh = path_or_file
        close = False
    else:
        fh = open(path_or_file, "r")
        close = True
    try:
        lines = [ln.strip() for ln in fh.read().splitlines() if ln.strip()]
    finally:
        if close:
            fh.close()
    if len(lines) < 2:
        raise ValueError("HTNS1: truncated header")
    try:
        d = int(lines[0])
    except ValueError:
        raise ValueError("HTNS1: first line must be the number of modes")
    dims = lines[1].split()
    if len(dims) != d:
        raise ValueError(f"HTNS1: expected {d} dims, got {len(dims)}")
    try:
        shape = tuple(int(n) for n in dims)
    except ValueError:
        raise ValueError("HTNS1: dims must be integers")
    if d < 1 or any(n < 1 for n in shape):
        raise ValueError("HTNS1: dims must be positive")
    count = int(np.prod(shape))
    body = lines[2:]
    if len(body) != count:
        raise ValueError(f"HTNS1: expected {count} entries, got {len(body)}")
    data = np.empty(count, dtype=np.complex128)
    for i, ln in enumerate(body):
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"HTNS1: entry {i}: expected 're im'")
        data[i] = complex(float(parts[0]), float(parts[1]))
    return data.reshape(shape)
