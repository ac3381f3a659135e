"""Geometry of the eigen-decomposition space M(p) = SO(p) x Diag+(p).

A point of M(p) is an :class:`EigenDecomp` ``(U, D)`` with ``U`` a rotation
and ``D`` a positive diagonal matrix, stored through its log-diagonal.
The metric is the weighted product

    d_M((U1, D1), (U2, D2))**2 = k * d_SO(U1, U2)**2 + d_D(D1, D2)**2

with ``d_SO(U1, U2) = ||Log(U2 U1^T)||_F / sqrt(2)`` and
``d_D(D1, D2) = ||log D1 - log D2||``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg

from .config import TOL_ORTH, TOL_REPROJECT
from .errors import (
    AntipodalRotationWarning,
    BadParameter,
    DimensionMismatch,
    NonOrthogonalInput,
    NonPositiveEntry,
    OutsideInjectivityRadius,
)

# below this norm of the skew part a rotation by ~pi is treated as an involution
_INVOLUTION_TOL = 1e-12

SQRT2 = np.sqrt(2.0)


# ---------------------------------------------------------------------------
# rotations
# ---------------------------------------------------------------------------

def rotation_2d(theta: float) -> np.ndarray:
    """Counter-clockwise planar rotation by ``theta``."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def as_rotation(U, tol: float = TOL_ORTH, reproject_tol: float = TOL_REPROJECT) -> np.ndarray:
    """Validate ``U`` as an element of SO(p).

    Matrices whose orthogonality defect lies between ``tol`` and
    ``reproject_tol`` are snapped back by polar projection; anything worse,
    or a reflection, raises :class:`NonOrthogonalInput`.
    """
    U = np.array(U, dtype=float)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise NonOrthogonalInput(f"rotation must be a square matrix, got shape {U.shape}")
    if not np.all(np.isfinite(U)):
        raise NonOrthogonalInput("rotation has non-finite entries")
    p = U.shape[0]
    err = np.max(np.abs(U.T @ U - np.eye(p)))
    if err > reproject_tol:
        raise NonOrthogonalInput(f"matrix is not orthogonal (defect {err:.3g})")
    if err > tol:
        W, _, Vt = np.linalg.svd(U)
        U = W @ Vt
    if np.linalg.det(U) < 0:
        raise NonOrthogonalInput("matrix has determinant -1 (a reflection, not a rotation)")
    return U


def _hat3(w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    A = np.zeros(w.shape[:-1] + (3, 3))
    A[..., 0, 1] = -w[..., 2]
    A[..., 0, 2] = w[..., 1]
    A[..., 1, 0] = w[..., 2]
    A[..., 1, 2] = -w[..., 0]
    A[..., 2, 0] = -w[..., 1]
    A[..., 2, 1] = w[..., 0]
    return A


def _vee3(A: np.ndarray) -> np.ndarray:
    return np.stack([A[..., 2, 1], A[..., 0, 2], A[..., 1, 0]], axis=-1)


def _lex_sign(n: np.ndarray) -> np.ndarray:
    """Flip each axis so its first clearly nonzero component is positive."""
    n = np.array(n, dtype=float)
    flat = n.reshape(-1, n.shape[-1])
    for row in flat:
        nz = np.flatnonzero(np.abs(row) > 1e-9)
        if nz.size and row[nz[0]] < 0:
            row *= -1.0
    return flat.reshape(n.shape)


def rotation_angle(R: np.ndarray) -> np.ndarray:
    """Rotation distance ``||Log R||_F / sqrt(2)`` from the identity.

    Vectorized over leading axes; closed form for p = 2, 3.
    """
    R = np.asarray(R, dtype=float)
    p = R.shape[-1]
    if p == 2:
        return np.abs(np.arctan2(R[..., 1, 0] - R[..., 0, 1], R[..., 0, 0] + R[..., 1, 1]))
    if p == 3:
        w = 0.5 * np.stack(
            [R[..., 2, 1] - R[..., 1, 2], R[..., 0, 2] - R[..., 2, 0], R[..., 1, 0] - R[..., 0, 1]],
            axis=-1,
        )
        c = 0.5 * (np.trace(R, axis1=-2, axis2=-1) - 1.0)
        return np.arctan2(np.linalg.norm(w, axis=-1), c)
    logs = so_log(R)
    return np.linalg.norm(logs, axis=(-2, -1)) / SQRT2


def _so2_log(R: np.ndarray) -> np.ndarray:
    s = 0.5 * (R[..., 1, 0] - R[..., 0, 1])
    c = 0.5 * (R[..., 0, 0] + R[..., 1, 1])
    theta = np.arctan2(s, c)
    # deterministic branch at the involution: +pi
    theta = np.where((np.abs(s) <= _INVOLUTION_TOL) & (c < 0), np.pi, theta)
    A = np.zeros(R.shape)
    A[..., 0, 1] = -theta
    A[..., 1, 0] = theta
    return A


def _so3_log(R: np.ndarray) -> np.ndarray:
    batch = R.shape[:-2]
    R = R.reshape(-1, 3, 3)
    w = 0.5 * _vee3(R - np.swapaxes(R, -1, -2))
    s = np.linalg.norm(w, axis=-1)
    c = 0.5 * (np.trace(R, axis1=-2, axis2=-1) - 1.0)
    theta = np.arctan2(s, c)

    factor = np.ones_like(theta)
    big = s > 1e-8
    factor[big] = theta[big] / s[big]
    factor[~big] = 1.0 + theta[~big] ** 2 / 6.0
    axis_angle = w * factor[:, None]

    # near pi the skew part loses relative precision; recover the axis from
    # the symmetric part (1 - cos) n n^T and take the sign from the skew part
    near_pi = (c < 0) & (s < 1e-4)
    for idx in np.flatnonzero(near_pi):
        B = 0.5 * (R[idx] + R[idx].T) - c[idx] * np.eye(3)
        j = int(np.argmax(np.diag(B)))
        n = B[:, j] / np.sqrt(max(B[j, j], 1e-300) * (1.0 - c[idx]))
        n /= np.linalg.norm(n)
        if s[idx] > _INVOLUTION_TOL:
            if n @ w[idx] < 0:
                n = -n
        else:
            n = _lex_sign(n)
        axis_angle[idx] = theta[idx] * n
    return _hat3(axis_angle).reshape(batch + (3, 3))


def _schur_log(R: np.ndarray) -> np.ndarray:
    """Principal log of one rotation via its real Schur form."""
    p = R.shape[0]
    T, Z = linalg.schur(R, output="real")
    L = np.zeros((p, p))
    neg = []
    i = 0
    while i < p:
        if i < p - 1 and abs(T[i + 1, i]) > 1e-13:
            ang = np.arctan2(0.5 * (T[i + 1, i] - T[i, i + 1]), 0.5 * (T[i, i] + T[i + 1, i + 1]))
            L[i, i + 1] = -ang
            L[i + 1, i] = ang
            i += 2
        else:
            if T[i, i] < 0:
                neg.append(i)
            i += 1
    # eigenvalue -1 comes in pairs for det +1; each pair is a half turn
    for a, b in zip(neg[0::2], neg[1::2]):
        L[a, b] = -np.pi
        L[b, a] = np.pi
    A = Z @ L @ Z.T
    return 0.5 * (A - A.T)


def so_log(R: np.ndarray) -> np.ndarray:
    """Minimal-norm matrix logarithm of rotation(s) ``R`` (leading axes batched).

    At an involution the returned branch is deterministic: angle ``+pi`` for
    p = 2 and an axis whose first nonzero component is positive for p = 3.
    """
    R = np.asarray(R, dtype=float)
    p = R.shape[-1]
    if p == 2:
        return _so2_log(R)
    if p == 3:
        return _so3_log(R)
    flat = R.reshape(-1, p, p)
    out = np.stack([_schur_log(r) for r in flat])
    return out.reshape(R.shape)


def so_exp(A: np.ndarray) -> np.ndarray:
    """Matrix exponential of antisymmetric matrices (leading axes batched)."""
    A = np.asarray(A, dtype=float)
    p = A.shape[-1]
    if p == 2:
        theta = A[..., 1, 0]
        c, s = np.cos(theta), np.sin(theta)
        out = np.empty(A.shape)
        out[..., 0, 0] = c
        out[..., 0, 1] = -s
        out[..., 1, 0] = s
        out[..., 1, 1] = c
        return out
    if p == 3:
        w = _vee3(A)
        theta = np.linalg.norm(w, axis=-1)[..., None, None]
        small = theta < 1e-8
        safe = np.where(small, 1.0, theta)
        a = np.where(small, 1.0 - theta**2 / 6.0, np.sin(safe) / safe)
        b = np.where(small, 0.5 - theta**2 / 24.0, (1.0 - np.cos(safe)) / safe**2)
        return np.eye(3) + a * A + b * (A @ A)
    flat = A.reshape(-1, p, p)
    return np.stack([linalg.expm(a) for a in flat]).reshape(A.shape)


def is_involution(R: np.ndarray) -> bool:
    """True when the rotation ``R`` is a half turn (its logarithm is not unique)."""
    R = np.asarray(R, dtype=float)
    return bool(rotation_angle(R) > np.pi - 1e-9) if R.shape[-1] <= 3 else bool(
        np.min(np.abs(np.linalg.eigvals(R) + 1.0)) < 1e-9
    )


def rot_log(U1, U2) -> np.ndarray:
    """Antisymmetric ``A`` of minimal norm with ``Exp(A) = U2 U1^T``."""
    U1 = as_rotation(U1)
    U2 = as_rotation(U2)
    if U1.shape != U2.shape:
        raise DimensionMismatch(f"rotations of different size {U1.shape} and {U2.shape}")
    return so_log(U2 @ U1.T)


def d_so(U1, U2) -> float:
    U1 = as_rotation(U1)
    U2 = as_rotation(U2)
    if U1.shape != U2.shape:
        raise DimensionMismatch(f"rotations of different size {U1.shape} and {U2.shape}")
    return float(rotation_angle(U2 @ U1.T))


# ---------------------------------------------------------------------------
# positive diagonals
# ---------------------------------------------------------------------------

def _as_diag_vector(D) -> np.ndarray:
    D = np.asarray(D, dtype=float)
    if D.ndim == 2:
        if D.shape[0] != D.shape[1] or np.any(D - np.diag(np.diag(D))):
            raise BadParameter("expected a diagonal matrix or a vector of diagonal entries")
        D = np.diag(D)
    if D.ndim != 1:
        raise BadParameter(f"expected a diagonal, got shape {D.shape}")
    if not np.all(np.isfinite(D)) or np.any(D <= 0):
        raise NonPositiveEntry(f"diagonal entries must be positive, got {D}")
    return D


def d_diag(D1, D2) -> float:
    """Euclidean distance between log-diagonals; accepts vectors or diagonal matrices."""
    d1 = _as_diag_vector(D1)
    d2 = _as_diag_vector(D2)
    if d1.shape != d2.shape:
        raise DimensionMismatch("diagonals of different length")
    return float(np.linalg.norm(np.log(d1) - np.log(d2)))


# ---------------------------------------------------------------------------
# points and tangent vectors
# ---------------------------------------------------------------------------

def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class EigenDecomp:
    """A point ``(U, D)`` of M(p), with ``D = diag(exp(log_d))``."""

    U: np.ndarray
    log_d: np.ndarray

    def __post_init__(self):
        U = as_rotation(self.U)
        log_d = np.asarray(self.log_d, dtype=float).reshape(-1)
        if log_d.shape[0] != U.shape[0]:
            raise DimensionMismatch(f"U is {U.shape[0]}x{U.shape[0]} but D has {log_d.shape[0]} entries")
        if not np.all(np.isfinite(log_d)):
            raise NonPositiveEntry("diagonal entries must be finite and positive")
        object.__setattr__(self, "U", _readonly(U))
        object.__setattr__(self, "log_d", _readonly(log_d))

    @classmethod
    def from_diag(cls, U, D) -> "EigenDecomp":
        return cls(U, np.log(_as_diag_vector(D)))

    @property
    def p(self) -> int:
        return self.U.shape[0]

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.exp(self.log_d)

    @property
    def D(self) -> np.ndarray:
        return np.diag(np.exp(self.log_d))

    def compose(self) -> np.ndarray:
        """The SPD matrix ``U D U^T``."""
        X = (self.U * np.exp(self.log_d)) @ self.U.T
        return 0.5 * (X + X.T)

    def __repr__(self):
        return f"EigenDecomp(U={self.U.tolist()}, D={np.exp(self.log_d).tolist()})"


def compose(m: EigenDecomp) -> np.ndarray:
    return m.compose()


def _lower_index(p: int):
    return np.triu_indices(p, 1)


@dataclass(frozen=True, eq=False)
class TangentVec:
    """Tangent vector ``(A, L)`` in so(p) + Diag(p), right-translated to the identity.

    ``a`` holds the entries ``A[j, i]`` for ``i < j`` in lexicographic order of
    ``(i, j)``; for p = 2 this is the rotation angle. ``A`` is rebuilt from
    ``a`` and so is exactly antisymmetric.
    """

    a: np.ndarray
    L: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).reshape(-1)
        L = np.asarray(self.L, dtype=float).reshape(-1)
        p = L.shape[0]
        if a.shape[0] != p * (p - 1) // 2:
            raise DimensionMismatch(f"so({p}) needs {p * (p - 1) // 2} coordinates, got {a.shape[0]}")
        object.__setattr__(self, "a", _readonly(a))
        object.__setattr__(self, "L", _readonly(L))

    @classmethod
    def from_matrix(cls, A, L, tol: float = 1e-10) -> "TangentVec":
        A = np.asarray(A, dtype=float)
        if np.max(np.abs(A + A.T), initial=0.0) > tol:
            raise BadParameter("A is not antisymmetric")
        i, j = _lower_index(A.shape[0])
        return cls(A[j, i], L)

    @property
    def p(self) -> int:
        return self.L.shape[0]

    @property
    def A(self) -> np.ndarray:
        p = self.p
        A = np.zeros((p, p))
        i, j = _lower_index(p)
        A[j, i] = self.a
        A[i, j] = -self.a
        return A


def tangent_inner(v1: TangentVec, v2: TangentVec, k: float = 1.0) -> float:
    """Metric ``(k/2) tr(A1 A2^T) + tr(L1 L2^T)``."""
    return float(0.5 * k * np.sum(v1.A * v2.A) + v1.L @ v2.L)


def vectorize(v: TangentVec, k: float = 1.0) -> np.ndarray:
    """Coordinates ``(sqrt(k) * a, L)`` in R^d, an isometry onto Euclidean space."""
    _check_k(k)
    return np.concatenate([np.sqrt(k) * v.a, v.L])


def devectorize(x, p: int, k: float = 1.0) -> TangentVec:
    _check_k(k)
    x = np.asarray(x, dtype=float).reshape(-1)
    q = p * (p - 1) // 2
    if x.shape[0] != q + p:
        raise DimensionMismatch(f"expected {q + p} coordinates for p={p}, got {x.shape[0]}")
    return TangentVec(x[:q] / np.sqrt(k), x[q:])


def tangent_dim(p: int) -> int:
    return p * (p - 1) // 2 + p


def _check_k(k: float):
    if not k > 0:
        raise BadParameter(f"metric weight k must be positive, got {k!r}")


def _check_same_p(m1: EigenDecomp, m2: EigenDecomp):
    if m1.p != m2.p:
        raise DimensionMismatch(f"points of M({m1.p}) and M({m2.p})")


def d_m(m1: EigenDecomp, m2: EigenDecomp, k: float = 1.0) -> float:
    """Geodesic distance on M(p) with rotation weight ``k``."""
    _check_k(k)
    _check_same_p(m1, m2)
    rot = float(rotation_angle(m2.U @ m1.U.T))
    return float(np.sqrt(k * rot**2 + np.sum((m1.log_d - m2.log_d) ** 2)))


def exp_map(base: EigenDecomp, v: TangentVec) -> EigenDecomp:
    if v.p != base.p:
        raise DimensionMismatch("tangent vector and base point differ in dimension")
    return EigenDecomp(so_exp(v.A) @ base.U, base.log_d + v.L)


def log_map(base: EigenDecomp, target: EigenDecomp, check: bool = True) -> TangentVec:
    """Inverse of :func:`exp_map`, as ``(Log(V U^T), log Lambda - log D)``.

    Raises :class:`OutsideInjectivityRadius` when ``||Log(V U^T)||_F >= pi``
    unless ``check`` is false.
    """
    _check_same_p(base, target)
    A = so_log(target.U @ base.U.T)
    if check and np.linalg.norm(A) >= np.pi:
        raise OutsideInjectivityRadius(
            f"||Log(V U^T)||_F = {np.linalg.norm(A):.6g} is not below pi"
        )
    return TangentVec.from_matrix(A, target.log_d - base.log_d)


def geodesic(m1: EigenDecomp, m2: EigenDecomp, t: float) -> EigenDecomp:
    """Point at time ``t`` on the constant-speed geodesic from ``m1`` (t=0) to ``m2`` (t=1).

    If the relative rotation is a half turn the branch chosen by
    :func:`so_log` is used and an :class:`AntipodalRotationWarning` is issued.
    """
    _check_same_p(m1, m2)
    rel = m2.U @ m1.U.T
    if is_involution(rel):
        warnings.warn("relative rotation is an involution; geodesic is not unique",
                      AntipodalRotationWarning, stacklevel=2)
    A = so_log(rel)
    return EigenDecomp(so_exp(t * A) @ m1.U, (1.0 - t) * m1.log_d + t * m2.log_d)


def identity_point(p: int) -> EigenDecomp:
    return EigenDecomp(np.eye(p), np.zeros(p))


def random_rotation(p: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed rotation."""
    Q, R = np.linalg.qr(rng.standard_normal((p, p)))
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


def stack_decomps(ms: Sequence[EigenDecomp]):
    """Arrays ``(n, p, p)`` and ``(n, p)`` of rotations and log-diagonals."""
    return np.stack([m.U for m in ms]), np.stack([m.log_d for m in ms])
