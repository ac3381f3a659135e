"""Scaling-rotation and partial scaling-rotation distances.

``d_psr(X, m)`` is the distance in M(p) from the point ``m`` to the fiber
of ``X``; ``d_sr(X, Y)`` is the distance between the two fibers. Top-stratum
fibers are searched exhaustively over the group orbit. Fibers with a
continuous part are handled in closed form (scaled identity) or by
golden-section search over the circle subgroup (p = 3, one double
eigenvalue).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import optimize as _sciopt

from .config import EPS_STRAT, TOL_OPT
from .errors import BadParameter, DimensionMismatch, NotPositiveDefinite, UnsupportedStratum
from .group import (
    Fiber,
    as_spd,
    block_coset_reps,
    fiber_of,
    group_arrays,
    plane_rotation,
)
from .manifold import EigenDecomp, rotation_angle
from .optimize import golden_section

_TIE_TOL = 1e-12
_N_ARCS = 8


@dataclass(frozen=True, eq=False)
class MinimalPair:
    """Eigen-decompositions ``m_x`` of X and ``m_y`` of Y realizing ``dist``.

    ``ties`` lists further decompositions of X at the same distance from
    ``m_y`` when they were requested.
    """

    m_x: EigenDecomp
    m_y: EigenDecomp
    dist: float
    ties: Tuple[EigenDecomp, ...] = ()


def as_fiber(X, eps_strat: float = EPS_STRAT) -> Fiber:
    return X if isinstance(X, Fiber) else fiber_of(X, eps_strat)


def _check_k(k):
    if not k > 0:
        raise BadParameter(f"metric weight k must be positive, got {k!r}")


def lex_argmin(d2: np.ndarray, keys: np.ndarray) -> int:
    """Index of the minimum of ``d2``; near-ties go to the lexicographically
    smallest row of ``keys``."""
    lo = float(np.min(d2))
    tie = np.flatnonzero(d2 <= lo + _TIE_TOL * max(1.0, lo))
    if tie.size == 1:
        return int(tie[0])
    rounded = np.round(keys[tie], 9)
    order = np.lexsort(rounded.T[::-1])
    return int(tie[order[0]])


def _keys(U: np.ndarray, log_d: np.ndarray) -> np.ndarray:
    return np.concatenate([U.reshape(U.shape[:-2] + (-1,)), log_d], axis=-1)


# ---------------------------------------------------------------------------
# nearest fiber element, one kind of fiber at a time (batched over fibers)
# ---------------------------------------------------------------------------

def _nearest_top(reps_U, reps_logd, U, log_d, k):
    """``reps_*`` have shape (n, G, ...); target ``(U, log_d)`` broadcasts."""
    rel = np.asarray(U)[..., None, :, :] @ np.swapaxes(reps_U, -1, -2)
    d2 = k * rotation_angle(rel) ** 2 + np.sum((reps_logd - np.asarray(log_d)[..., None, :]) ** 2, axis=-1)
    idx = np.argmin(d2, axis=-1)
    lo = np.take_along_axis(d2, idx[:, None], axis=-1)[:, 0]
    n_ties = np.sum(d2 <= (lo + _TIE_TOL * np.maximum(1.0, lo))[:, None], axis=-1)
    for r in np.flatnonzero(n_ties > 1):
        idx[r] = lex_argmin(d2[r], _keys(reps_U[r], reps_logd[r]))
    rows = np.arange(reps_U.shape[0])
    return d2[rows, idx], reps_U[rows, idx], reps_logd[rows, idx]


def _nearest_bottom(base_logd, U, log_d, k):
    n = base_logd.shape[0]
    U = np.broadcast_to(U, (n,) + np.shape(U)[-2:]).copy()
    d2 = np.sum((base_logd - log_d) ** 2, axis=-1)
    return d2, U, base_logd.copy()


def _skew_vec3(M):
    return 0.5 * np.stack(
        [M[..., 2, 1] - M[..., 1, 2], M[..., 0, 2] - M[..., 2, 0], M[..., 1, 0] - M[..., 0, 1]], axis=-1
    )


def _nearest_circle(V, base_logd, block, U, log_d, k, tol=TOL_OPT, return_perm=False):
    """p = 3 fibers ``{h . (V R, D)}`` with ``R`` rotating the plane ``block``.

    For each coset representative ``h`` the angle of the relative rotation
    along the circle is a function of one variable ``psi``; it is minimized
    by golden-section search on eight equal arcs.
    """
    i, j = block
    l = 3 - i - j
    reps = list(block_coset_reps(3, tuple(block)))
    H_all, perms_all, _ = group_arrays(3)
    H, perms = H_all[reps], perms_all[reps]
    n = V.shape[0]
    U = np.broadcast_to(U, (n, 3, 3))
    log_d = np.broadcast_to(log_d, (n, 3))

    C = (np.swapaxes(V, -1, -2) @ U)[:, None] @ H[None]          # (n, C, 3, 3)
    P0 = np.zeros((3, 3)); P0[l, l] = 1.0
    Pc = np.zeros((3, 3)); Pc[i, i] = Pc[j, j] = 1.0
    Ps = np.zeros((3, 3)); Ps[j, i] = 1.0; Ps[i, j] = -1.0
    parts = [P0 @ C, Pc @ C, Ps @ C]
    w0, wc, ws = (_skew_vec3(M)[..., None, :] for M in parts)
    t0, tc, ts = (np.trace(M, axis1=-2, axis2=-1)[..., None] for M in parts)

    def angle(psi):
        cs, sn = np.cos(psi), np.sin(psi)
        w = w0 + cs[..., None] * wc + sn[..., None] * ws
        tr = t0 + cs * tc + sn * ts
        return np.arctan2(np.linalg.norm(w, axis=-1), 0.5 * (tr - 1.0))

    lo = -np.pi + 2.0 * np.pi * np.arange(_N_ARCS) / _N_ARCS
    lo = np.broadcast_to(lo, C.shape[:2] + (_N_ARCS,))
    psi, val = golden_section(angle, lo, lo + 2.0 * np.pi / _N_ARCS, tol=tol)
    best = np.argmin(val, axis=-1)
    psi = np.take_along_axis(psi, best[..., None], axis=-1)[..., 0]   # (n, C)

    R = plane_rotation(3, i, j, -psi)
    elem_U = V[:, None] @ R @ np.swapaxes(H, -1, -2)[None]
    elem_logd = np.empty((n, len(reps), 3))
    np.put_along_axis(elem_logd, np.broadcast_to(perms, (n,) + perms.shape),
                      np.broadcast_to(base_logd[:, None, :], (n, len(reps), 3)), axis=-1)
    rel = U[:, None] @ np.swapaxes(elem_U, -1, -2)
    d2 = k * rotation_angle(rel) ** 2 + np.sum((elem_logd - log_d[:, None, :]) ** 2, axis=-1)
    idx = np.array([lex_argmin(d2[r], _keys(elem_U[r], elem_logd[r])) for r in range(n)], dtype=int)
    rows = np.arange(n)
    out = (d2[rows, idx], elem_U[rows, idx], elem_logd[rows, idx])
    if return_perm:
        out += (perms[idx],)
    return out


class FiberSet:
    """Fibers of a sample, stacked by kind for batched nearest-element search."""

    def __init__(self, fibers):
        fibers = list(fibers)
        if not fibers:
            raise BadParameter("empty list of fibers")
        p = fibers[0].p
        if any(f.p != p for f in fibers):
            raise DimensionMismatch("observations of different dimension")
        self.fibers = fibers
        self.p = p
        self.n = len(fibers)
        self.top = np.array([i for i, f in enumerate(fibers) if f.kind == "finite"], dtype=int)
        self.bottom = np.array([i for i, f in enumerate(fibers) if f.tag == "bottom"], dtype=int)
        self.circle = {}
        for i, f in enumerate(fibers):
            if f.kind == "parametric" and f.tag != "bottom":
                self.circle.setdefault(tuple(f.block), []).append(i)
        self.circle = {b: np.array(ix, dtype=int) for b, ix in self.circle.items()}
        if self.top.size:
            self._reps_U = np.stack([fibers[i].reps_U for i in self.top])
            self._reps_logd = np.stack([fibers[i].reps_logd for i in self.top])
        self.base_U = np.stack([f.base.U for f in fibers])
        self.base_logd = np.stack([f.base.log_d for f in fibers])

    def nearest(self, m: EigenDecomp, k: float = 1.0, tol: float = TOL_OPT):
        """Squared distances and nearest fiber elements to ``m`` as arrays."""
        if m.p != self.p:
            raise DimensionMismatch(f"point of M({m.p}) against data of dimension {self.p}")
        d2 = np.empty(self.n)
        U = np.empty((self.n, self.p, self.p))
        L = np.empty((self.n, self.p))
        if self.top.size:
            d2[self.top], U[self.top], L[self.top] = _nearest_top(self._reps_U, self._reps_logd, m.U, m.log_d, k)
        if self.bottom.size:
            d2[self.bottom], U[self.bottom], L[self.bottom] = _nearest_bottom(
                self.base_logd[self.bottom], m.U, m.log_d, k)
        for block, ix in self.circle.items():
            d2[ix], U[ix], L[ix] = _nearest_circle(
                self.base_U[ix], self.base_logd[ix], block, m.U, m.log_d, k, tol)
        return np.maximum(d2, 0.0), U, L


# ---------------------------------------------------------------------------
# public distances
# ---------------------------------------------------------------------------

def d_psr(X, m: EigenDecomp, k: float = 1.0, eps_strat: float = EPS_STRAT,
          tol_opt: float = TOL_OPT) -> Tuple[float, EigenDecomp]:
    """Distance from ``m`` to the fiber of ``X`` and an element achieving it.

    Parameters
    ----------
    X : array_like or Fiber
        SPD matrix, or its precomputed fiber.
    m : EigenDecomp
    k : float
        Rotation weight of the metric.

    Returns
    -------
    dist : float
    nearest : EigenDecomp
        Element of the fiber of ``X`` closest to ``m``; exact ties are broken
        towards the lexicographically smallest ``(U, log D)``.
    """
    _check_k(k)
    fs = FiberSet([as_fiber(X, eps_strat)])
    d2, U, L = fs.nearest(m, k, tol_opt)
    return float(np.sqrt(d2[0])), EigenDecomp(U[0], L[0])


def _torus_search(fx: Fiber, fy: Fiber, k: float, tol: float, grid: int = 48):
    """Both fibers carry a circle (p = 3). Returns ``(d2, m_x, m_y)``."""
    bx, by = fx.block, fy.block
    reps = list(block_coset_reps(3, tuple(bx)))
    H_all, perms_all, _ = group_arrays(3)
    W = fx.base.U.T @ fy.base.U
    ang = 2.0 * np.pi * np.arange(grid) / grid
    Rx = plane_rotation(3, bx[0], bx[1], -ang)            # R_{-phi}
    Ry = plane_rotation(3, by[0], by[1], ang)             # R_psi
    best = None
    for r in reps:
        h, perm = H_all[r], perms_all[r]
        logd_x = np.empty(3)
        logd_x[perm] = fx.base.log_d
        diag2 = float(np.sum((logd_x - fy.base.log_d) ** 2))
        # angle(R_psi h R_{-phi} W) on the grid: axes (psi, phi)
        M = Ry[:, None] @ (h @ (Rx @ W))[None, :]
        vals = rotation_angle(M)
        a, b = np.unravel_index(np.argmin(vals), vals.shape)

        def obj(z, h=h):
            Mz = plane_rotation(3, by[0], by[1], z[0]) @ h @ plane_rotation(3, bx[0], bx[1], -z[1]) @ W
            return float(rotation_angle(Mz)) ** 2

        res = _sciopt.minimize(obj, np.array([ang[a], ang[b]]), method="Nelder-Mead",
                               options={"xatol": tol, "fatol": 1e-18, "maxiter": 4000})
        z = res.x if res.fun <= vals[a, b] ** 2 else np.array([ang[a], ang[b]])
        d2 = k * obj(z) + diag2
        if best is None or d2 < best[0] - _TIE_TOL:
            Ux = fx.base.U @ plane_rotation(3, bx[0], bx[1], z[1]) @ h.T
            Uy = fy.base.U @ plane_rotation(3, by[0], by[1], z[0])
            best = (d2, EigenDecomp(Ux, logd_x), EigenDecomp(Uy, fy.base.log_d))
    return best


def d_sr(X, Y, k: float = 1.0, eps_strat: float = EPS_STRAT, tol_opt: float = TOL_OPT,
         all_ties: bool = False) -> MinimalPair:
    """Scaling-rotation distance between SPD matrices, with a minimal pair.

    When one argument has distinct eigenvalues its decomposition is held
    fixed and the other fiber is searched; the group acts by isometries, so
    nothing is lost. Against a scaled identity ``cI`` the distance is
    ``||log(eigenvalues) - log c||``. Two p = 3 matrices that both have a
    double eigenvalue are handled by a search over two circle subgroups.

    ``all_ties=True`` additionally lists every decomposition of X (top
    stratum search only) tied with the returned one.
    """
    _check_k(k)
    fx, fy = as_fiber(X, eps_strat), as_fiber(Y, eps_strat)
    if fx.p != fy.p:
        raise DimensionMismatch(f"{fx.p}x{fx.p} and {fy.p}x{fy.p} matrices")
    if fy.kind == "finite":
        d2, U, L = FiberSet([fx]).nearest(fy.base, k, tol_opt)
        m_x = EigenDecomp(U[0], L[0])
        ties = ()
        if all_ties and fx.kind == "finite":
            rel = fy.base.U @ np.swapaxes(fx.reps_U, -1, -2)
            all_d2 = k * rotation_angle(rel) ** 2 + np.sum((fx.reps_logd - fy.base.log_d) ** 2, axis=-1)
            hit = np.flatnonzero(all_d2 <= d2[0] + _TIE_TOL * max(1.0, d2[0]))
            ties = tuple(EigenDecomp(fx.reps_U[i], fx.reps_logd[i]) for i in hit)
        return MinimalPair(m_x, fy.base, float(np.sqrt(max(d2[0], 0.0))), ties)
    if fx.kind == "finite":
        swapped = d_sr(fy, fx, k, eps_strat, tol_opt)
        return MinimalPair(swapped.m_y, swapped.m_x, swapped.dist)
    if fy.tag == "bottom":
        m_y = EigenDecomp(fx.base.U, fy.base.log_d)
        return MinimalPair(fx.base, m_y, float(np.linalg.norm(fx.base.log_d - fy.base.log_d)))
    if fx.tag == "bottom":
        m_x = EigenDecomp(fy.base.U, fx.base.log_d)
        return MinimalPair(m_x, fy.base, float(np.linalg.norm(fx.base.log_d - fy.base.log_d)))
    if fx.p == 3:
        d2, m_x, m_y = _torus_search(fx, fy, k, tol_opt)
        return MinimalPair(m_x, m_y, float(np.sqrt(max(d2, 0.0))))
    raise UnsupportedStratum(f"d_SR between lower-stratum matrices is not implemented for p={fx.p}")


def delta(S) -> float:
    """Distance from ``S`` to the set of SPD matrices with a repeated eigenvalue."""
    S = as_spd(S)
    log_w = np.log(np.linalg.eigvalsh(S))
    if log_w.size < 2:
        raise NotPositiveDefinite("need at least a 2x2 matrix")
    return float(np.min(np.diff(log_w)) / np.sqrt(2.0))
