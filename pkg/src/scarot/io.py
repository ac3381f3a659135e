"""Dataset files: a ``p,n`` header line, then one SPD matrix per line.

Each record lists the upper triangle row by row, diagonal included, as
``p(p+1)/2`` comma-separated decimals. Values are written with 17
significant digits so a write/read cycle reproduces every double exactly.
"""

from __future__ import annotations

import io as _io
import os
from typing import Iterable, Union

import numpy as np

from .errors import DatasetError

PathLike = Union[str, os.PathLike]


def format_dataset(Xs) -> str:
    X = np.asarray(Xs, dtype=float)
    if X.ndim != 3 or X.shape[1] != X.shape[2] or X.shape[0] < 1:
        raise DatasetError(f"expected a non-empty stack of square matrices, got shape {X.shape}")
    n, p, _ = X.shape
    iu = np.triu_indices(p)
    out = _io.StringIO()
    out.write(f"{p},{n}\n")
    for M in X:
        out.write(",".join(format(float(v), ".17g") for v in M[iu]) + "\n")
    return out.getvalue()


def write_dataset(path: PathLike, Xs) -> None:
    text = format_dataset(Xs)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(text)


def _parse_int(tok: str, what: str) -> int:
    try:
        return int(tok.strip())
    except ValueError:
        raise DatasetError(f"header field {what!r} is not an integer: {tok!r}") from None


def parse_dataset(lines: Iterable[str], source: str = "<data>") -> np.ndarray:
    """Parse and validate dataset text; returns an array of shape (n, p, p)."""
    lines = [ln.strip() for ln in lines]
    while lines and not lines[-1]:
        lines.pop()
    if not lines:
        raise DatasetError(f"{source}: empty file")
    head = lines[0].split(",")
    if len(head) not in (2, 3):
        raise DatasetError(f"{source}: header must be 'p,n' (optionally ',version'), got {lines[0]!r}")
    p, n = _parse_int(head[0], "p"), _parse_int(head[1], "n")
    if len(head) == 3:
        _parse_int(head[2], "version")
    if p < 2 or n < 1:
        raise DatasetError(f"{source}: need p >= 2 and n >= 1, got p={p}, n={n}")
    rows = lines[1:]
    if len(rows) != n:
        raise DatasetError(f"{source}: header announces {n} records but {len(rows)} follow")
    q = p * (p + 1) // 2
    iu = np.triu_indices(p)
    X = np.empty((n, p, p))
    for r, ln in enumerate(rows, start=1):
        toks = ln.split(",")
        if len(toks) != q:
            raise DatasetError(f"{source}: record {r} has {len(toks)} fields, expected {q}")
        try:
            vals = np.array([float(t) for t in toks])
        except ValueError:
            raise DatasetError(f"{source}: record {r} has a non-numeric field") from None
        if not np.all(np.isfinite(vals)):
            raise DatasetError(f"{source}: record {r} has a non-finite field")
        M = np.zeros((p, p))
        M[iu] = vals
        M = M + np.triu(M, 1).T
        if np.linalg.eigvalsh(M)[0] <= 0:
            raise DatasetError(f"{source}: record {r} is not positive definite")
        X[r - 1] = M
    return X


def read_dataset(path: PathLike) -> np.ndarray:
    try:
        with open(path, "r", encoding="ascii") as fh:
            text = fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        raise DatasetError(f"cannot read {path}: {exc}") from None
    return parse_dataset(text.splitlines(), str(path))
