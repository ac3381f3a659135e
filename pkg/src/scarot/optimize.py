"""Vectorized golden-section search."""

from __future__ import annotations

import numpy as np

from .config import TOL_OPT

_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


def golden_section(f, lo, hi, tol: float = TOL_OPT, max_iter: int = 200):
    """Minimize a unimodal function on each interval ``[lo, hi]`` at once.

    Parameters
    ----------
    f : callable
        Maps an array of abscissae to an array of values of the same shape.
    lo, hi : array_like
        Interval endpoints, broadcast together; each entry is an
        independent problem.
    tol : float
        Final bracket width.

    Returns
    -------
    x, fx : ndarray
        Best abscissa found in each bracket and its value.
    """
    a, b = np.broadcast_arrays(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float))
    a, b = a.copy(), b.copy()
    width = float(np.max(b - a, initial=0.0))
    n_iter = 0 if width <= tol else min(max_iter, int(np.ceil(np.log(tol / width) / np.log(_INVPHI))))
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(n_iter):
        left = fc <= fd
        a = np.where(left, a, c)
        b = np.where(left, d, b)
        c_new = np.where(left, b - _INVPHI * (b - a), d)
        d_new = np.where(left, c, a + _INVPHI * (b - a))
        fresh = f(np.where(left, c_new, d_new))
        fc, fd = np.where(left, fresh, fd), np.where(left, fc, fresh)
        c, d = c_new, d_new
    mid = 0.5 * (a + b)
    fm = f(mid)
    x = np.where(fc <= fd, c, d)
    fx = np.minimum(fc, fd)
    better = fm < fx
    return np.where(better, mid, x), np.where(better, fm, fx)
