"""Tangent coordinates, comparison means, samplers and bootstrap inference."""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import stats

from .config import EPS_STRAT, TOL_OPT, max_threads
from .distance import FiberSet, as_fiber
from .errors import BadParameter, EmptyInput, NoConvergenceWarning, ScarotError
from .group import act_arrays, as_spd
from .manifold import EigenDecomp, log_map, rotation_angle, vectorize
from .mean import _psr_mean_single, psr_mean

SQRT2 = np.sqrt(2.0)


# ---------------------------------------------------------------------------
# matrix functions of SPD matrices
# ---------------------------------------------------------------------------

def _sym_fun(X, fun):
    w, V = np.linalg.eigh(X)
    Y = (V * fun(w)[..., None, :]) @ np.swapaxes(V, -1, -2)
    return 0.5 * (Y + np.swapaxes(Y, -1, -2))


def spd_log(X):
    return _sym_fun(np.asarray(X, dtype=float), np.log)


def sym_exp(Y):
    return _sym_fun(np.asarray(Y, dtype=float), np.exp)


def _stack_spd(Xs) -> np.ndarray:
    Xs = [as_spd(X) for X in Xs]
    if not Xs:
        raise EmptyInput("no matrices given")
    return np.stack(Xs)


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------

def sample_model_2d(n: int, sigma_theta: float, mu1: float, mu2: float, sigma_d: float,
                    seed: int = 0) -> np.ndarray:
    """Draw ``R(theta) diag(exp(D1), exp(D2)) R(theta)^T``.

    ``theta ~ N(0, sigma_theta**2)`` truncated to ``(-pi, pi)`` by rejection;
    ``D_j ~ N(mu_j, sigma_d**2)`` independently.

    Returns
    -------
    ndarray of shape (n, 2, 2)
    """
    if int(n) < 1:
        raise BadParameter("n must be at least 1")
    if not (sigma_theta > 0 and sigma_d > 0):
        raise BadParameter("sigma_theta and sigma_d must be positive")
    rng = np.random.default_rng(seed)
    theta = rng.normal(0.0, sigma_theta, size=n)
    bad = np.abs(theta) >= np.pi
    while np.any(bad):
        theta[bad] = rng.normal(0.0, sigma_theta, size=int(bad.sum()))
        bad = np.abs(theta) >= np.pi
    D = rng.normal([mu1, mu2], sigma_d, size=(n, 2))
    c, s = np.cos(theta), np.sin(theta)
    R = np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)
    X = (R * np.exp(D)[:, None, :]) @ np.swapaxes(R, -1, -2)
    return 0.5 * (X + np.swapaxes(X, -1, -2))


def sample_spd_lognormal(n: int, mean_log, cov, seed: int = 0) -> np.ndarray:
    """SPD matrices whose logarithms are Gaussian in :func:`vecd` coordinates."""
    if int(n) < 1:
        raise BadParameter("n must be at least 1")
    M = np.asarray(mean_log, dtype=float)
    p = M.shape[0]
    if M.shape != (p, p) or np.max(np.abs(M - M.T)) > 1e-12:
        raise BadParameter("mean_log must be a symmetric matrix")
    d = p * (p + 1) // 2
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (d, d) or np.max(np.abs(cov - cov.T), initial=0.0) > 1e-12:
        raise BadParameter(f"cov must be a symmetric {d}x{d} matrix")
    w, Q = np.linalg.eigh(cov)
    if w[0] < -1e-12 * max(1.0, abs(w[-1])):
        raise BadParameter("cov is not positive semi-definite")
    root = Q * np.sqrt(np.clip(w, 0.0, None))
    rng = np.random.default_rng(seed)
    z = vecd(M) + rng.standard_normal((int(n), d)) @ root.T
    return sym_exp(unvecd(z, p))


# ---------------------------------------------------------------------------
# log-Euclidean and affine-invariant
# ---------------------------------------------------------------------------

def vecd(Y) -> np.ndarray:
    """Diagonal entries, then upper off-diagonal entries times sqrt(2) (row-major)."""
    Y = np.asarray(Y, dtype=float)
    p = Y.shape[-1]
    iu = np.triu_indices(p, 1)
    return np.concatenate([np.diagonal(Y, axis1=-2, axis2=-1), SQRT2 * Y[..., iu[0], iu[1]]], axis=-1)


def unvecd(z, p: int) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    Y = np.zeros(z.shape[:-1] + (p, p))
    idx = np.arange(p)
    Y[..., idx, idx] = z[..., :p]
    iu = np.triu_indices(p, 1)
    off = z[..., p:] / SQRT2
    Y[..., iu[0], iu[1]] = off
    Y[..., iu[1], iu[0]] = off
    return Y


@dataclass(frozen=True, eq=False)
class CoordinateCloud:
    """Rows are tangent coordinates of the observations in one frame.

    For the ``"psr"`` frame ``inside[i]`` is False when observation ``i``
    falls outside the injectivity domain of the reference's log map.
    """

    reference: object
    coords: np.ndarray
    frame: str
    inside: Optional[np.ndarray] = None


def le_coordinates(Xs) -> CoordinateCloud:
    X = _stack_spd(Xs)
    return CoordinateCloud(np.eye(X.shape[-1]), vecd(spd_log(X)), "log_euclidean")


def le_mean(Xs) -> np.ndarray:
    """``Exp(mean Log X_i)``."""
    X = _stack_spd(Xs)
    return sym_exp(spd_log(X).mean(axis=0))


def ai_gradient_norm(Xs, M) -> float:
    X = _stack_spd(Xs)
    w, V = np.linalg.eigh(as_spd(M))
    Mih = (V / np.sqrt(w)) @ V.T
    return float(np.linalg.norm(spd_log(Mih @ X @ Mih).mean(axis=0)))


def ai_mean(Xs, tol: float = 1e-10, max_iter: int = 1000) -> np.ndarray:
    """Affine-invariant Fréchet mean by the fixed-point iteration
    ``M <- M^{1/2} Exp(mean Log(M^{-1/2} X_i M^{-1/2})) M^{1/2}``,
    started at the log-Euclidean mean."""
    X = _stack_spd(Xs)
    M = le_mean(X)
    for _ in range(max_iter):
        w, V = np.linalg.eigh(M)
        Mh = (V * np.sqrt(w)) @ V.T
        Mih = (V / np.sqrt(w)) @ V.T
        G = spd_log(Mih @ X @ Mih).mean(axis=0)
        if np.linalg.norm(G) < tol:
            return M
        M = Mh @ sym_exp(G) @ Mh
        M = 0.5 * (M + M.T)
    if ai_gradient_norm(X, M) >= tol:
        warnings.warn("affine-invariant mean iteration did not converge", NoConvergenceWarning, stacklevel=2)
    return M


# ---------------------------------------------------------------------------
# PSR coordinates
# ---------------------------------------------------------------------------

def _phi(reference: EigenDecomp, U: np.ndarray, L: np.ndarray, k: float):
    """Vectorized log map of many points at ``reference``; returns coords and injectivity flags."""
    rows, inside = [], []
    for u, l in zip(U, L):
        v = log_map(reference, EigenDecomp(u, l), check=False)
        inside.append(bool(np.linalg.norm(v.A) < np.pi))
        rows.append(vectorize(v, k))
    return np.array(rows), np.array(inside)


def psr_coordinates(Xs, reference: EigenDecomp, k: float = 1.0, eps_strat: float = EPS_STRAT,
                    tol_opt: float = TOL_OPT) -> CoordinateCloud:
    """Row ``i`` is ``vectorize(log_map(reference, m_i))`` with ``m_i`` the
    eigen-decomposition of ``X_i`` nearest to ``reference``."""
    fs = Xs if isinstance(Xs, FiberSet) else FiberSet([as_fiber(X, eps_strat) for X in Xs])
    _, U, L = fs.nearest(reference, k, tol_opt)
    coords, inside = _phi(reference, U, L, k)
    return CoordinateCloud(reference, coords, "psr", inside)


# ---------------------------------------------------------------------------
# bootstrap
# ---------------------------------------------------------------------------

def closest_orbit_member(m: EigenDecomp, target: EigenDecomp, k: float = 1.0) -> EigenDecomp:
    """Member of the group orbit of ``m`` nearest to ``target``."""
    U, L = act_arrays(m.U, m.log_d, m.p)
    d2 = k * rotation_angle(target.U @ np.swapaxes(U, -1, -2)) ** 2 + np.sum((L - target.log_d) ** 2, axis=-1)
    i = int(np.argmin(d2))
    return EigenDecomp(U[i], L[i])


@dataclass(frozen=True, eq=False)
class BootstrapResult:
    """Replicate means in tangent coordinates at ``reference``, centred at ``center``."""

    reference: EigenDecomp
    center: np.ndarray
    coords: np.ndarray
    n_failed: int

    @property
    def cov(self) -> np.ndarray:
        if self.coords.shape[0] == 0:
            return np.full((self.center.size,) * 2, np.nan)
        Z = self.coords - self.center
        C = Z.T @ Z / Z.shape[0]
        return 0.5 * (C + C.T)


def bootstrap_psr_means(Xs, B: int = 200, seed: int = 0, k: float = 1.0, mean: Optional[EigenDecomp] = None,
                        reference: Optional[EigenDecomp] = None, stream: int = 0, eps: float = 1e-12,
                        max_outer: int = 100, eps_strat: float = EPS_STRAT,
                        tol_opt: float = TOL_OPT) -> BootstrapResult:
    """Resample, re-estimate and record bootstrap PSR means.

    Each replicate draws ``n`` observations with replacement from a
    generator seeded by ``(seed, stream, b)``, runs the PSR mean from
    ``mean`` and keeps the orbit member closest to ``mean``. Coordinates are
    taken at ``reference`` (default ``mean``) and centred at the
    coordinates of ``mean``. Replicates that raise or do not converge are
    dropped and counted.
    """
    if int(B) < 1:
        raise BadParameter("B must be at least 1")
    fibers = [as_fiber(X, eps_strat) for X in Xs]
    if not fibers:
        raise EmptyInput("no observations given")
    n = len(fibers)
    if mean is None:
        mean = psr_mean(fibers, k=k, eps=eps, max_outer=max_outer, eps_strat=eps_strat, tol_opt=tol_opt).mean
    ref = mean if reference is None else reference
    center = vectorize(log_map(ref, mean, check=False), k)

    def replicate(b):
        rng = np.random.default_rng([int(seed), int(stream), int(b)])
        idx = rng.integers(0, n, size=n)
        try:
            res = _psr_mean_single(FiberSet([fibers[i] for i in idx]), mean, k, eps, max_outer,
                                   tol_opt, 1e-10, 1000)
        except ScarotError:
            return None
        if not res.converged:
            return None
        m_b = closest_orbit_member(res.mean, mean, k)
        return vectorize(log_map(ref, m_b, check=False), k)

    workers = min(max_threads(), int(B))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(replicate, range(int(B))))
    else:
        out = [replicate(b) for b in range(int(B))]
    kept = [r for r in out if r is not None]
    coords = np.array(kept) if kept else np.empty((0, center.size))
    return BootstrapResult(ref, center, coords, len(out) - len(kept))


def bootstrap_cov(Xs, B: int = 200, seed: int = 0, k: float = 1.0, mean: Optional[EigenDecomp] = None,
                  **kwargs) -> np.ndarray:
    """``(1/B) sum phi(m_b) phi(m_b)^T`` with ``phi`` the vectorized log map at the sample PSR mean."""
    return bootstrap_psr_means(Xs, B, seed, k, mean, **kwargs).cov


# ---------------------------------------------------------------------------
# confidence regions and the two-group comparison
# ---------------------------------------------------------------------------

def chi2_quantile(level: float, dof: int) -> float:
    if not 0.0 < level < 1.0:
        raise BadParameter("level must lie in (0, 1)")
    return float(stats.chi2.ppf(level, dof))


@dataclass(frozen=True, eq=False)
class Ellipsoid:
    """``{x : (x - center)^T precision (x - center) <= threshold}``."""

    center: np.ndarray
    cov: np.ndarray
    precision: np.ndarray
    threshold: float
    level: float
    dof: int
    rank: int
    pseudo_inverse: bool

    def statistic(self, x) -> float:
        z = np.asarray(x, dtype=float) - self.center
        return float(z @ self.precision @ z)

    def contains(self, x) -> bool:
        return self.statistic(x) <= self.threshold

    def as_dict(self) -> dict:
        return {"center": self.center.tolist(), "cov": self.cov.tolist(), "threshold": self.threshold,
                "level": self.level, "dof": self.dof, "rank": self.rank, "pseudo_inverse": self.pseudo_inverse}


def _pinv_rank(C: np.ndarray):
    """Pseudo-inverse and numerical rank of a symmetric PSD matrix."""
    w, Q = np.linalg.eigh(0.5 * (C + C.T))
    top = float(np.max(np.abs(w), initial=0.0))
    keep = w > max(C.shape) * np.finfo(float).eps * top if top > 0 else np.zeros_like(w, dtype=bool)
    P = (Q[:, keep] / w[keep]) @ Q[:, keep].T
    return 0.5 * (P + P.T), int(keep.sum())


def confidence_region(mean_coords, cov, level: float = 0.95) -> Ellipsoid:
    """Approximate confidence ellipsoid with chi-square threshold.

    A singular covariance is inverted by pseudo-inverse and the degrees of
    freedom drop to its rank.
    """
    center = np.asarray(mean_coords, dtype=float).reshape(-1)
    cov = np.asarray(cov, dtype=float)
    d = center.size
    if cov.shape != (d, d):
        raise BadParameter(f"covariance must be {d}x{d}")
    P, rank = _pinv_rank(cov)
    dof = rank if rank else d
    return Ellipsoid(center, 0.5 * (cov + cov.T), P, chi2_quantile(level, dof), level, dof, rank, rank < d)


@dataclass(frozen=True, eq=False)
class GroupTestReport:
    """Two-group comparison in PSR (pooled reference) and log-Euclidean coordinates.

    ``statistic`` is ``T = (x1 - x2)^T (S1 + S2)^+ (x1 - x2)`` in PSR
    coordinates and ``p_value`` its chi-square tail probability with
    ``dof`` degrees of freedom; this approximate bootstrap test is an
    extension beyond visual comparison of the two regions.
    """

    reference: EigenDecomp
    means_psr: tuple
    means_le: tuple
    cov_psr: tuple
    cov_le: tuple
    regions_psr: tuple
    regions_le: tuple
    statistic: float
    dof: int
    p_value: float
    threshold: float
    level: float
    statistic_le: float
    p_value_le: float
    n_failed: tuple

    @property
    def separated(self) -> bool:
        return self.statistic > self.threshold

    def as_dict(self) -> dict:
        return {
            "reference": {"U": self.reference.U.tolist(), "D": self.reference.eigenvalues.tolist()},
            "means_psr": [m.tolist() for m in self.means_psr],
            "means_le": [m.tolist() for m in self.means_le],
            "cov_psr": [c.tolist() for c in self.cov_psr],
            "cov_le": [c.tolist() for c in self.cov_le],
            "regions_psr": [r.as_dict() for r in self.regions_psr],
            "regions_le": [r.as_dict() for r in self.regions_le],
            "statistic": self.statistic,
            "dof": self.dof,
            "p_value": self.p_value,
            "threshold": self.threshold,
            "level": self.level,
            "separated": self.separated,
            "statistic_le": self.statistic_le,
            "p_value_le": self.p_value_le,
            "n_failed": list(self.n_failed),
        }


def _quad_test(delta_x, cov_sum):
    P, rank = _pinv_rank(cov_sum)
    T = float(delta_x @ P @ delta_x)
    dof = rank if rank else delta_x.size
    return T, dof, float(stats.chi2.sf(T, dof)) if rank else (1.0 if T == 0 else 0.0)


def _le_bootstrap(X: np.ndarray, B: int, seed: int, stream: int):
    z = vecd(spd_log(X))
    center = z.mean(axis=0)
    reps = []
    for b in range(B):
        rng = np.random.default_rng([int(seed), int(stream), int(b)])
        reps.append(z[rng.integers(0, len(z), size=len(z))].mean(axis=0))
    Z = np.array(reps) - center
    C = Z.T @ Z / B
    return center, 0.5 * (C + C.T)


def two_group_report(Xs1, Xs2, B: int = 200, level: float = 0.95, seed: int = 0, k: float = 1.0,
                     eps: float = 1e-12, max_outer: int = 100, eps_strat: float = EPS_STRAT,
                     tol_opt: float = TOL_OPT) -> GroupTestReport:
    """Compare two samples through their PSR means.

    The reference point is the PSR mean of the pooled sample. Each group's
    PSR mean is started there and replaced by its orbit member closest to
    the reference; bootstrap replicates are expressed in the same frame.
    """
    if int(B) < 1:
        raise BadParameter("B must be at least 1")
    X1, X2 = _stack_spd(Xs1), _stack_spd(Xs2)
    if X1.shape[-1] != X2.shape[-1]:
        raise BadParameter("groups have different matrix sizes")
    f1 = [as_fiber(X, eps_strat) for X in X1]
    f2 = [as_fiber(X, eps_strat) for X in X2]
    opts = dict(k=k, eps=eps, max_outer=max_outer, eps_strat=eps_strat, tol_opt=tol_opt)
    ref = psr_mean(f1 + f2, **opts).mean

    means, covs, regions, failed = [], [], [], []
    for g, fib in enumerate((f1, f2), start=1):
        m_g = closest_orbit_member(psr_mean(fib, init=ref, **opts).mean, ref, k)
        boot = bootstrap_psr_means(fib, B, seed, mean=m_g, reference=ref, stream=g, **opts)
        x_g = vectorize(log_map(ref, m_g, check=False), k)
        means.append(x_g)
        covs.append(boot.cov)
        failed.append(boot.n_failed)
        regions.append(confidence_region(x_g, boot.cov, level))
    T, dof, pval = _quad_test(means[0] - means[1], covs[0] + covs[1])

    le_means, le_covs, le_regions = [], [], []
    for g, X in enumerate((X1, X2), start=1):
        c, C = _le_bootstrap(X, int(B), seed, g)
        le_means.append(c)
        le_covs.append(C)
        le_regions.append(confidence_region(c, C, level))
    T_le, _, p_le = _quad_test(le_means[0] - le_means[1], le_covs[0] + le_covs[1])

    return GroupTestReport(ref, tuple(means), tuple(le_means), tuple(covs), tuple(le_covs),
                           tuple(regions), tuple(le_regions), T, dof, pval, chi2_quantile(level, dof),
                           level, T_le, p_le, tuple(failed))
