"""Even signed permutations, their action on M(p), fibers and strata.

The group G(p) of even signed-permutation matrices acts on M(p) by
``h . (U, D) = (U h^{-1}, h D h^{-1})``: columns of ``U`` and entries of
``D`` are permuted together and an even number of columns change sign.
The action preserves fibers of the composition map ``(U, D) -> U D U^T``
and is an isometry of the product metric.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Tuple

import numpy as np

from .config import EPS_STRAT
from .errors import BadParameter, DimensionTooLarge, NotPositiveDefinite, UnsupportedStratum
from .manifold import EigenDecomp, rotation_angle

MAX_GROUP_DIM = 5


@dataclass(frozen=True)
class SignedPerm:
    """Matrix with entries ``h[perm[j], j] = signs[j]`` and determinant +1."""

    perm: Tuple[int, ...]
    signs: Tuple[int, ...]

    def __post_init__(self):
        if sorted(self.perm) != list(range(len(self.perm))):
            raise BadParameter(f"{self.perm} is not a permutation")
        if len(self.signs) != len(self.perm) or any(s not in (1, -1) for s in self.signs):
            raise BadParameter("signs must be a +-1 vector matching perm")
        if _perm_parity(self.perm) * int(np.prod(self.signs)) != 1:
            raise BadParameter("signed permutation is not even (determinant -1)")

    @property
    def p(self) -> int:
        return len(self.perm)

    @property
    def matrix(self) -> np.ndarray:
        h = np.zeros((self.p, self.p))
        h[list(self.perm), range(self.p)] = self.signs
        return h

    @classmethod
    def from_matrix(cls, h) -> "SignedPerm":
        h = np.rint(np.asarray(h, dtype=float)).astype(int)
        p = h.shape[0]
        perm, signs = [], []
        for j in range(p):
            (i,) = np.flatnonzero(h[:, j])
            perm.append(int(i))
            signs.append(int(h[i, j]))
        return cls(tuple(perm), tuple(signs))

    @classmethod
    def identity(cls, p: int) -> "SignedPerm":
        return cls(tuple(range(p)), (1,) * p)

    def __matmul__(self, other: "SignedPerm") -> "SignedPerm":
        return SignedPerm.from_matrix(self.matrix @ other.matrix)

    def inverse(self) -> "SignedPerm":
        return SignedPerm.from_matrix(self.matrix.T)

    def is_identity(self) -> bool:
        return self.perm == tuple(range(self.p)) and all(s == 1 for s in self.signs)


def _perm_parity(perm) -> int:
    perm = list(perm)
    sign = 1
    seen = [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def _check_group_dim(p: int):
    if p < 2:
        raise BadParameter(f"p must be at least 2, got {p}")
    if p > MAX_GROUP_DIM:
        raise DimensionTooLarge(f"G({p}) has {2 ** (p - 1) * int(np.prod(range(1, p + 1)))} elements; cap is p={MAX_GROUP_DIM}")


@lru_cache(maxsize=None)
def enumerate_group(p: int) -> Tuple[SignedPerm, ...]:
    """All ``2**(p-1) * p!`` even signed permutations, identity first."""
    _check_group_dim(p)
    out = []
    for perm in itertools.permutations(range(p)):
        parity = _perm_parity(perm)
        for signs in itertools.product((1, -1), repeat=p):
            if parity * int(np.prod(signs)) == 1:
                out.append(SignedPerm(perm, signs))
    return tuple(out)


@lru_cache(maxsize=None)
def group_arrays(p: int):
    """``(matrices (G,p,p), perms (G,p), signs (G,p))`` for G(p), read-only."""
    elems = enumerate_group(p)
    H = np.stack([h.matrix for h in elems])
    perms = np.array([h.perm for h in elems], dtype=int)
    signs = np.array([h.signs for h in elems], dtype=float)
    for a in (H, perms, signs):
        a.setflags(write=False)
    return H, perms, signs


def act(h: SignedPerm, m: EigenDecomp) -> EigenDecomp:
    """``h . (U, D) = (U h^T, h D h^T)``."""
    if h.p != m.p:
        raise BadParameter("group element and point differ in dimension")
    U = m.U @ h.matrix.T
    log_d = np.empty(m.p)
    log_d[list(h.perm)] = m.log_d
    return EigenDecomp(U, log_d)


def act_arrays(U: np.ndarray, log_d: np.ndarray, p: int):
    """Whole orbit of ``(U, log_d)`` as arrays ``(G,p,p)``, ``(G,p)``."""
    H, perms, _ = group_arrays(p)
    reps_U = U @ np.swapaxes(H, -1, -2)
    reps_logd = np.empty((H.shape[0], p))
    np.put_along_axis(reps_logd, perms, np.broadcast_to(log_d, (H.shape[0], p)), axis=1)
    return reps_U, reps_logd


def orbit(m: EigenDecomp) -> list:
    return [act(h, m) for h in enumerate_group(m.p)]


@lru_cache(maxsize=None)
def beta_g(p: int) -> float:
    """Smallest rotation distance from the identity to a non-identity group element."""
    H, _, _ = group_arrays(p)
    return float(np.min(rotation_angle(H[1:])))


def r_cx(p: int, k: float = 1.0) -> float:
    """Uniqueness radius ``sqrt(k) * beta_g(p) / 4``."""
    if not k > 0:
        raise BadParameter("k must be positive")
    return float(np.sqrt(k) * beta_g(p) / 4.0)


# ---------------------------------------------------------------------------
# SPD inputs, strata and fibers
# ---------------------------------------------------------------------------

def as_spd(X) -> np.ndarray:
    X = np.array(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise NotPositiveDefinite(f"expected a square matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise NotPositiveDefinite("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(X))))
    if np.max(np.abs(X - X.T)) > 1e-10 * scale:
        raise NotPositiveDefinite("matrix is not symmetric")
    X = 0.5 * (X + X.T)
    if np.linalg.eigvalsh(X)[0] <= 0:
        raise NotPositiveDefinite("matrix is not positive definite")
    return X


def canonical_decomposition(X) -> EigenDecomp:
    """Eigenvalues descending, last eigenvector negated if needed for det +1."""
    X = as_spd(X)
    w, V = np.linalg.eigh(X)
    w, V = w[::-1], V[:, ::-1].copy()
    if np.linalg.det(V) < 0:
        V[:, -1] = -V[:, -1]
    return EigenDecomp(V, np.log(w))


@dataclass(frozen=True)
class Stratum:
    """Eigenvalue-multiplicity type of an SPD matrix.

    ``partition`` groups positions of the descending eigenvalue list that
    are tied within the stratification tolerance.
    """

    partition: Tuple[Tuple[int, ...], ...]
    tag: str

    @property
    def multiplicities(self) -> Tuple[int, ...]:
        return tuple(len(b) for b in self.partition)


def _partition_log_eigs(log_w: np.ndarray, eps_strat: float):
    # log_w sorted descending
    blocks = [[0]]
    for i in range(1, len(log_w)):
        if log_w[i - 1] - log_w[i] <= eps_strat:
            blocks[-1].append(i)
        else:
            blocks.append([i])
    return tuple(tuple(b) for b in blocks)


def _tag(partition, p) -> str:
    if len(partition) == p:
        return "top"
    if len(partition) == 1:
        return "bottom"
    return "lower"


def classify_stratum(X, eps_strat: float = EPS_STRAT) -> Stratum:
    m = canonical_decomposition(X)
    part = _partition_log_eigs(m.log_d, eps_strat)
    return Stratum(part, _tag(part, m.p))


def plane_rotation(p: int, i: int, j: int, phi):
    """Rotation by ``phi`` in the coordinate plane ``(i, j)``; ``phi`` may be an array."""
    phi = np.asarray(phi, dtype=float)
    R = np.broadcast_to(np.eye(p), phi.shape + (p, p)).copy()
    c, s = np.cos(phi), np.sin(phi)
    R[..., i, i] = c
    R[..., j, j] = c
    R[..., i, j] = -s
    R[..., j, i] = s
    return R


@lru_cache(maxsize=None)
def block_coset_reps(p: int, block: Tuple[int, int]) -> Tuple[int, ...]:
    """Indices into G(p) of one representative per coset ``h K``, where
    ``K`` is the part of G(p) inside the circle subgroup rotating ``block``.
    Only defined for p = 3 with a two-element block."""
    if p != 3 or len(block) != 2:
        raise UnsupportedStratum("circle-subgroup cosets are only implemented for p=3")
    (single,) = set(range(3)) - set(block)
    elems = enumerate_group(3)
    in_K = [i for i, g in enumerate(elems) if g.perm[single] == single and g.signs[single] == 1]
    H, _, _ = group_arrays(3)
    reps: list = []
    covered = set()
    for idx in range(len(elems)):
        if idx in covered:
            continue
        reps.append(idx)
        for g in in_K:
            prod = H[idx] @ H[g]
            for jdx in range(len(elems)):
                if np.array_equal(H[jdx], prod):
                    covered.add(jdx)
                    break
    return tuple(reps)


@dataclass(frozen=True, eq=False)
class Fiber:
    """All eigen-decompositions of an SPD matrix.

    ``kind`` is ``"finite"`` for the top stratum, with the whole orbit in
    ``reps_U``/``reps_logd``. For lower strata it is ``"parametric"``: the
    fiber is ``{h . (U R, D)}`` with ``R`` ranging over the identity
    component of the stabilizer of ``D`` (all of SO(p) in the bottom
    stratum, a circle rotating ``block`` for p = 3 with a double eigenvalue).
    """

    X: np.ndarray
    stratum: Stratum
    base: EigenDecomp
    kind: str
    subgroup_dim: int
    block: Tuple[int, ...] = ()
    reps_U: np.ndarray = field(default=None, repr=False)
    reps_logd: np.ndarray = field(default=None, repr=False)

    @property
    def p(self) -> int:
        return self.base.p

    @property
    def tag(self) -> str:
        return self.stratum.tag

    @property
    def representatives(self) -> list:
        if self.kind != "finite":
            return []
        return [EigenDecomp(u, ld) for u, ld in zip(self.reps_U, self.reps_logd)]

    def element(self, h: SignedPerm, R=None) -> EigenDecomp:
        """``h . (U R, D)`` for ``R`` in the stabilizer's identity component."""
        U = self.base.U if R is None else self.base.U @ np.asarray(R)
        return act(h, EigenDecomp(U, self.base.log_d))


def fiber_of(X, eps_strat: float = EPS_STRAT) -> Fiber:
    """Describe the fiber of ``X`` under ``(U, D) -> U D U^T``.

    Eigenvalues tied within ``eps_strat`` (in log scale) are treated as
    equal and replaced by their geometric mean.
    """
    X = as_spd(X)
    canon = canonical_decomposition(X)
    p = canon.p
    part = _partition_log_eigs(canon.log_d, eps_strat)
    stratum = Stratum(part, _tag(part, p))
    log_d = canon.log_d.copy()
    for b in part:
        log_d[list(b)] = np.mean(log_d[list(b)])
    base = EigenDecomp(canon.U, log_d)
    if stratum.tag == "top":
        _check_group_dim(p)
        reps_U, reps_logd = act_arrays(base.U, base.log_d, p)
        reps_U.setflags(write=False)
        reps_logd.setflags(write=False)
        return Fiber(X, stratum, base, "finite", 0, (), reps_U, reps_logd)
    if stratum.tag == "bottom":
        return Fiber(X, stratum, base, "parametric", p * (p - 1) // 2, tuple(range(p)))
    if p == 3:
        (block,) = [b for b in part if len(b) == 2]
        return Fiber(X, stratum, base, "parametric", 1, block)
    raise UnsupportedStratum(
        f"fiber search for eigenvalue multiplicities {stratum.multiplicities} is not implemented for p={p}"
    )
