"""Sample PSR means, Fréchet means on the factors, and certificates.

The PSR objective of a point ``m`` of M(p) is the average squared distance
from ``m`` to the fibers of the observations. :func:`psr_mean` minimizes
it by alternating two steps: match every observation to its fiber element
nearest the current estimate, then replace the estimate by the Fréchet
mean of the matched elements in M(p), which splits into a Karcher mean on
SO(p) and a log-average on the diagonal.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .config import EPS_STRAT, TOL_OPT
from .distance import FiberSet, _nearest_circle, as_fiber, d_sr, delta
from .errors import (
    BadParameter,
    EmptyInput,
    NoConvergenceWarning,
    UnsupportedDimension,
    UnsupportedStratum,
)
from .group import orbit, r_cx
from .manifold import EigenDecomp, _as_diag_vector, as_rotation, d_m, random_rotation, rotation_angle, so_exp, so_log

# ---------------------------------------------------------------------------
# Fréchet means on the two factors
# ---------------------------------------------------------------------------


def frechet_mean_diag(Ds) -> np.ndarray:
    """Geometric mean, entrywise, of positive diagonals (vectors or diagonal matrices)."""
    Ds = list(Ds)
    if not Ds:
        raise EmptyInput("no diagonals given")
    logs = np.stack([np.log(_as_diag_vector(D)) for D in Ds])
    return np.exp(logs.mean(axis=0))


def so_objective(Us: np.ndarray, U: np.ndarray) -> float:
    """``(1/n) sum d_SO(U_i, U)**2``."""
    return float(np.mean(rotation_angle(Us @ U.T) ** 2))


def so_objective_gradient(Us, U) -> np.ndarray:
    """Antisymmetric ``G`` such that ``d/dt f(Exp(tE) U)`` at 0 equals ``<G, E>_F``.

    ``f`` is :func:`so_objective`; ``G = -(1/n) sum Log(U_i U^T)``.
    """
    Us = np.asarray(Us, dtype=float)
    return -np.mean(so_log(Us @ np.asarray(U).T), axis=0)


def _karcher_so(Us: np.ndarray, U: np.ndarray, tol: float, max_iter: int):
    """Gradient descent ``U <- Exp(mean Log(U_i U^T)) U`` with step halving.

    Returns ``(U, converged, iterations)``; the objective never increases.
    """
    f = so_objective(Us, U)
    for it in range(max_iter):
        G = np.mean(so_log(Us @ U.T), axis=0)
        if np.linalg.norm(G) < tol:
            return U, True, it
        step = 1.0
        while True:
            U_new = so_exp(step * G) @ U
            f_new = so_objective(Us, U_new)
            if f_new <= f + 1e-15 * max(f, 1.0):
                break
            step *= 0.5
            if step < 1e-10:
                return U, False, it
        U, f = U_new, f_new
    G = np.mean(so_log(Us @ U.T), axis=0)
    return U, bool(np.linalg.norm(G) < tol), max_iter


def frechet_mean_so(Us, init=None, tol: float = 1e-10, max_iter: int = 1000) -> np.ndarray:
    """Karcher mean of rotations by Riemannian gradient descent.

    Parameters
    ----------
    Us : sequence of (p, p) rotations
    init : rotation, optional
        Starting point; defaults to the first rotation.
    tol : float
        Stop when ``(1/n) ||sum Log(U_i U^T)||_F < tol``.
    max_iter : int

    Returns
    -------
    ndarray
        The best iterate. A :class:`NoConvergenceWarning` is issued if the
        gradient tolerance was not reached.
    """
    Us = [as_rotation(U) for U in Us]
    if not Us:
        raise EmptyInput("no rotations given")
    Us = np.stack(Us)
    U0 = Us[0] if init is None else as_rotation(init)
    U, ok, _ = _karcher_so(Us, U0, tol, max_iter)
    if not ok:
        warnings.warn("Karcher mean on SO(p) did not reach the gradient tolerance",
                      NoConvergenceWarning, stacklevel=2)
    return U


# ---------------------------------------------------------------------------
# PSR mean (alternating procedure)
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MeanResult:
    """Output of :func:`psr_mean`.

    ``objective_trace[0]`` is the objective at the initial point and entry
    ``j`` the objective after ``j`` outer iterations. ``settled_after`` is
    the first iteration whose estimate equals the final one (to 1e-8), and
    ``selection_changes[j-1]`` records whether the Step-1 matching in
    iteration ``j`` differed from the one in iteration ``j-1``.
    """

    mean: EigenDecomp
    orbit_size: int
    objective_trace: Tuple[float, ...]
    iterations: int
    converged: bool
    matched_fibers: Tuple[EigenDecomp, ...]
    settled_after: int = 0
    selection_changes: Tuple[bool, ...] = ()
    so_converged: bool = True

    @property
    def objective(self) -> float:
        return self.objective_trace[-1]

    @property
    def orbit(self) -> list:
        return mean_orbit(self.mean)


def mean_orbit(m: EigenDecomp) -> list:
    """All ``h . m`` for ``h`` in the group; each has the same PSR objective."""
    return orbit(m)


def _fiberset(Xs, eps_strat) -> FiberSet:
    Xs = list(Xs) if not isinstance(Xs, FiberSet) else Xs
    if isinstance(Xs, FiberSet):
        return Xs
    if not Xs:
        raise EmptyInput("no observations given")
    return FiberSet([as_fiber(X, eps_strat) for X in Xs])


def _same_selection(U1, L1, U2, L2, tol=1e-8) -> bool:
    return bool(np.max(np.abs(U1 - U2)) <= tol and np.max(np.abs(L1 - L2)) <= tol)


def _psr_mean_single(fs: FiberSet, init: EigenDecomp, k, eps, max_outer, tol_opt, so_tol, so_max_iter):
    m = init
    d2, U, L = fs.nearest(m, k, tol_opt)
    f = float(np.mean(d2))
    trace = [f]
    means = [m]
    changes = []
    converged = False
    so_ok = True
    it = 0
    for it in range(1, max_outer + 1):
        U_new, ok, _ = _karcher_so(U, m.U, so_tol, so_max_iter)
        so_ok = so_ok and ok
        m_new = EigenDecomp(U_new, L.mean(axis=0))
        d2_new, U_n, L_n = fs.nearest(m_new, k, tol_opt)
        f_new = float(np.mean(d2_new))
        if f_new > f:
            # rounding only: keep the previous estimate, which is a fixed point
            # of the procedure to working precision
            trace.append(f)
            means.append(m)
            changes.append(False)
            converged = True
            break
        changes.append(not _same_selection(U, L, U_n, L_n))
        decrease = f - f_new
        m, U, L, f = m_new, U_n, L_n, f_new
        trace.append(f)
        means.append(m)
        if decrease <= eps:
            converged = True
            break
    final = means[-1]
    settled = len(means) - 1
    while settled > 0 and d_m(means[settled - 1], final, k) <= 1e-8:
        settled -= 1
    matched = tuple(EigenDecomp(u, l) for u, l in zip(U, L))
    return MeanResult(final, _orbit_size(fs.p), tuple(trace), it, converged, matched,
                      settled, tuple(changes), so_ok)


def _orbit_size(p: int) -> int:
    return 2 ** (p - 1) * int(np.prod(np.arange(1, p + 1)))


def psr_mean(Xs, init: Optional[EigenDecomp] = None, k: float = 1.0, eps: float = 1e-12,
             max_outer: int = 100, multi_start: bool = False, eps_strat: float = EPS_STRAT,
             tol_opt: float = TOL_OPT, so_tol: float = 1e-10, so_max_iter: int = 1000) -> MeanResult:
    """Sample PSR mean by alternating fiber matching and Fréchet averaging.

    Parameters
    ----------
    Xs : sequence of SPD matrices
    init : EigenDecomp, optional
        Starting estimate. Defaults to the canonical eigen-decomposition of
        the first observation.
    k : float
        Rotation weight of the metric.
    eps : float
        Stop once an outer iteration lowers the objective by at most ``eps``.
    max_outer : int
    multi_start : bool
        Start from the canonical decomposition of every observation and
        keep the run with the lowest final objective (earliest on ties).

    Returns
    -------
    MeanResult
    """
    if not k > 0:
        raise BadParameter("k must be positive")
    if max_outer < 1 or not eps > 0:
        raise BadParameter("max_outer must be >= 1 and eps positive")
    fs = _fiberset(Xs, eps_strat)
    args = (k, eps, max_outer, tol_opt, so_tol, so_max_iter)
    if multi_start:
        best = None
        for fib in fs.fibers:
            res = _psr_mean_single(fs, fib.base, *args)
            if best is None or res.objective < best.objective - 1e-14:
                best = res
        result = best
    else:
        start = fs.fibers[0].base if init is None else init
        if start.p != fs.p:
            raise BadParameter("initial point has the wrong dimension")
        result = _psr_mean_single(fs, start, *args)
    if not result.converged:
        warnings.warn(f"PSR mean did not converge in {max_outer} outer iterations",
                      NoConvergenceWarning, stacklevel=2)
    return result


def f_psr(Xs, m: EigenDecomp, k: float = 1.0, eps_strat: float = EPS_STRAT, tol_opt: float = TOL_OPT) -> float:
    """``(1/n) sum d_PSR(X_i, m)**2``."""
    fs = _fiberset(Xs, eps_strat)
    d2, _, _ = fs.nearest(m, k, tol_opt)
    return float(np.mean(d2))


def f_sr(Xs, S, k: float = 1.0, eps_strat: float = EPS_STRAT, tol_opt: float = TOL_OPT) -> float:
    """``(1/n) sum d_SR(X_i, S)**2``."""
    fs = _fiberset(Xs, eps_strat)
    fS = as_fiber(S, eps_strat)
    if fS.kind == "finite":
        d2, _, _ = fs.nearest(fS.base, k, tol_opt)
        return float(np.mean(d2))
    return float(np.mean([d_sr(f, fS, k, eps_strat, tol_opt).dist ** 2 for f in fs.fibers]))


# ---------------------------------------------------------------------------
# minimizing the SR objective over the lower strata
# ---------------------------------------------------------------------------


def _bottom_candidate(fs: FiberSet):
    c = float(np.mean(fs.base_logd))
    val = float(np.mean(np.sum((fs.base_logd - c) ** 2, axis=1)))
    return np.exp(c) * np.eye(fs.p), val


def _pair_objective(fs, V, a, b, k, tol_opt):
    """Nearest elements of the fiber of ``V diag(e^a, e^b, e^b) V^T`` to each
    observation's canonical decomposition; rows of ``single`` give where
    ``a`` lands."""
    n = fs.n
    logd = np.array([a, b, b])
    d2 = np.empty(n)
    E = np.empty((n, 3, 3))
    single = np.zeros(n, dtype=int)
    top = fs.top
    if top.size:
        Vs = np.broadcast_to(V, (top.size, 3, 3))
        Ls = np.broadcast_to(logd, (top.size, 3))
        d2[top], E[top], _, perm = _nearest_circle(Vs, Ls, (1, 2), fs.base_U[top], fs.base_logd[top], k,
                                                   tol_opt, return_perm=True)
        single[top] = perm[:, 0]
    bot = fs.bottom
    if bot.size:
        d2[bot] = np.sum((fs.base_logd[bot] - logd) ** 2, axis=1)
        E[bot] = V
        single[bot] = 0
    return d2, E, single


def _pair_alternating(fs, V, a, b, k, tol_opt, max_iter=200, tol=1e-12):
    d2, E, single = _pair_objective(fs, V, a, b, k, tol_opt)
    f = float(np.mean(d2))
    for _ in range(max_iter):
        rows = np.arange(fs.n)
        la = fs.base_logd[rows, single]
        mask = np.ones((fs.n, 3), dtype=bool)
        mask[rows, single] = False
        a_new = float(np.mean(la))
        b_new = float(np.mean(fs.base_logd[mask]))
        top = fs.top
        if top.size:
            W = fs.base_U[top] @ np.swapaxes(E[top], -1, -2) @ V
            V_new, _, _ = _karcher_so(W, V, 1e-12, 200)
        else:
            V_new = V
        d2, E_new, single_new = _pair_objective(fs, V_new, a_new, b_new, k, tol_opt)
        f_new = float(np.mean(d2))
        if f_new > f:
            break
        done = f - f_new <= tol
        V, a, b, E, single, f = V_new, a_new, b_new, E_new, single_new, f_new
        if done:
            break
    return f, V, a, b


def minimize_fsr_lower(Xs, k: float = 1.0, restarts: int = 20, seed: int = 0,
                       eps_strat: float = EPS_STRAT, tol_opt: float = TOL_OPT):
    """Minimize the SR objective over matrices with a repeated eigenvalue.

    For p = 2 the minimizer is ``c I`` with ``log c`` the mean of all
    log-eigenvalues. For p = 3 the scaled-identity optimum is compared with
    an alternating search over ``V diag(e^a, e^b, e^b) V^T`` from
    ``restarts`` starting points; that search is a local method, so its
    value bounds the true minimum from above.

    Returns
    -------
    S : ndarray
        The best matrix found.
    value : float
        Its SR objective.
    """
    fs = _fiberset(Xs, eps_strat)
    if fs.p not in (2, 3):
        raise UnsupportedDimension(f"lower-stratum minimization is implemented for p=2,3, not p={fs.p}")
    S, val = _bottom_candidate(fs)
    if fs.p == 2:
        return S, val
    if fs.circle:
        raise UnsupportedStratum("observations with a double eigenvalue are not supported in this search")
    rng = np.random.default_rng(seed)
    # deterministic starts: Log-Euclidean mean eigenvectors with each axis as the singleton
    Lm = np.mean([_spd_log(f.X) for f in fs.fibers], axis=0)
    w, Q = np.linalg.eigh(Lm)
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    starts = []
    for s in range(3):
        order = [s] + [t for t in range(3) if t != s]
        V = Q[:, order]
        if np.linalg.det(V) < 0:
            V[:, -1] = -V[:, -1]
        starts.append((V, w[s], np.mean(np.delete(w, s))))
    while len(starts) < restarts:
        V = random_rotation(3, rng)
        ab = rng.choice(fs.base_logd.ravel(), size=2)
        starts.append((V, float(ab[0]), float(ab[1])))
    best = (val, S)
    for V0, a0, b0 in starts[:max(restarts, 1)]:
        f, V, a, b = _pair_alternating(fs, V0, a0, b0, k, tol_opt)
        if f < best[0]:
            Sm = (V * np.exp([a, b, b])) @ V.T
            best = (f, 0.5 * (Sm + Sm.T))
    return best[1], float(best[0])


def _spd_log(X):
    w, V = np.linalg.eigh(X)
    return (V * np.log(w)) @ V.T


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Certificate:
    """Outcome of a sufficient-condition check. ``holds`` is a function of ``witnesses``."""

    kind: str
    holds: bool
    witnesses: dict = field(default_factory=dict)
    note: str = ""

    def as_dict(self) -> dict:
        return {"kind": self.kind, "holds": self.holds, "witnesses": dict(self.witnesses), "note": self.note}


def certify_sr_vs_psr(Xs, mean, k: float = 1.0, eps_strat: float = EPS_STRAT, tol_opt: float = TOL_OPT,
                      restarts: int = 20) -> Certificate:
    """Compare the SR objective at ``F(mean)`` with its minimum over lower strata.

    ``kind`` is ``"sr_equals_psr"`` when ``F(mean)`` does at least as well
    as every lower-stratum matrix (it is then an SR mean) and
    ``"sr_in_lower"`` otherwise (all SR means then have a repeated
    eigenvalue).
    """
    m = mean.mean if isinstance(mean, MeanResult) else mean
    fs = _fiberset(Xs, eps_strat)
    f_hat = f_sr(fs, m.compose(), k, eps_strat, tol_opt)
    S_low, f_low = minimize_fsr_lower(fs, k, restarts=restarts, eps_strat=eps_strat, tol_opt=tol_opt)
    kind = "sr_equals_psr" if f_hat <= f_low else "sr_in_lower"
    holds = (f_hat <= f_low) if kind == "sr_equals_psr" else (f_low < f_hat)
    note = "exact lower-stratum minimum" if fs.p == 2 else "numeric lower-stratum bound (local search with restarts)"
    return Certificate(kind, bool(holds), {"f_sr_psr_mean": f_hat, "f_sr_lower_min": f_low,
                                           "lower_minimizer": S_low.tolist()}, note)


def certify_uniqueness(Xs, k: float = 1.0, eps_strat: float = EPS_STRAT, tol_opt: float = TOL_OPT) -> Certificate:
    """Orbit-uniqueness of the PSR mean: all pairwise SR distances below ``r_cx``."""
    fs = _fiberset(Xs, eps_strat)
    if fs.top.size != fs.n:
        raise UnsupportedStratum("uniqueness check needs every observation to have distinct eigenvalues")
    if fs.n > 1:
        # pairwise distances in one batched search per observation
        diam = 0.0
        for i in range(fs.n - 1):
            rest = FiberSet(fs.fibers[i + 1:])
            d2, _, _ = rest.nearest(fs.fibers[i].base, k, tol_opt)
            diam = max(diam, float(np.sqrt(np.max(d2))))
    else:
        diam = 0.0
    radius = r_cx(fs.p, k)
    return Certificate("uniqueness", bool(diam < radius), {"diameter": diam, "r_cx": radius})


def certify_stratum_avoidance(Xs, S0, k: float = 1.0, eps_strat: float = EPS_STRAT,
                              tol_opt: float = TOL_OPT) -> Certificate:
    """Data within ``delta(S0) / 3`` of a top-stratum ``S0``."""
    f0 = as_fiber(S0, eps_strat)
    if f0.kind != "finite":
        raise UnsupportedStratum("S0 must have distinct eigenvalues")
    fs = _fiberset(Xs, eps_strat)
    dists = [d_sr(f, f0, k, eps_strat, tol_opt).dist for f in fs.fibers]
    dmax = float(max(dists))
    dl = delta(S0)
    return Certificate("stratum_avoidance", bool(dmax < dl / 3.0), {"max_distance": dmax, "delta": dl})
