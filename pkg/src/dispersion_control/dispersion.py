"""Covariance of planar point clouds and the spectral dispersion error.

Symmetric 2x2 matrices are stored as three scalars ``(c1, c2, c3)`` meaning
``[[c1, c2], [c2, c3]]``. Eigenvalues are always ordered descending
(``lambda1 >= lambda2``) and paired with a target of the same ordering.

The ``*_batch`` functions operate on ``(n, 3)`` arrays and are what the
simulator uses; the scalar functions wrap them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Sym2",
    "EigenBasis2",
    "DispersionTarget",
    "DispersionError",
    "covariance",
    "eig_sym2",
    "eig_sym2_batch",
    "dispersion_error",
    "covariance_similar",
    "projection_coordinates",
    "degeneracy_tol",
]


@dataclass(frozen=True)
class Sym2:
    c1: float
    c2: float
    c3: float

    @classmethod
    def from_matrix(cls, M) -> "Sym2":
        M = np.asarray(M, dtype=float)
        return cls(float(M[0, 0]), float(0.5 * (M[0, 1] + M[1, 0])), float(M[1, 1]))

    @classmethod
    def from_vector(cls, c) -> "Sym2":
        return cls(float(c[0]), float(c[1]), float(c[2]))

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.c1, self.c2], [self.c2, self.c3]])

    def as_vector(self) -> np.ndarray:
        return np.array([self.c1, self.c2, self.c3])

    @property
    def trace(self) -> float:
        return self.c1 + self.c3

    @property
    def det(self) -> float:
        return self.c1 * self.c3 - self.c2 * self.c2

    def to_json(self) -> list[float]:
        return [self.c1, self.c2, self.c3]


@dataclass(frozen=True)
class EigenBasis2:
    lambda1: float
    lambda2: float
    v1: tuple[float, float]
    v2: tuple[float, float]

    @property
    def V(self) -> np.ndarray:
        """Eigenvectors as columns."""
        return np.array([self.v1, self.v2]).T

    def reconstruct(self) -> Sym2:
        v1 = np.asarray(self.v1)
        v2 = np.asarray(self.v2)
        return Sym2.from_matrix(self.lambda1 * np.outer(v1, v1) + self.lambda2 * np.outer(v2, v2))

    def to_json(self) -> dict:
        return {"l1": self.lambda1, "l2": self.lambda2, "v1": list(self.v1), "v2": list(self.v2)}


@dataclass(frozen=True)
class DispersionTarget:
    lambda1_star: float
    lambda2_star: float

    def __post_init__(self):
        if not (self.lambda1_star >= self.lambda2_star >= 0):
            raise ValueError(
                f"target must satisfy lambda1* >= lambda2* >= 0, got "
                f"({self.lambda1_star}, {self.lambda2_star})"
            )

    def as_array(self) -> np.ndarray:
        return np.array([self.lambda1_star, self.lambda2_star], dtype=float)


@dataclass(frozen=True)
class DispersionError:
    e1: float
    e2: float

    @property
    def norm(self) -> float:
        return float(np.hypot(self.e1, self.e2))

    def as_array(self) -> np.ndarray:
        return np.array([self.e1, self.e2])

    def in_excluded_set(self, target: DispersionTarget, tol: float = 0.0) -> bool:
        """True when some eigenvalue sits at 0 while its target is positive."""
        return bool(
            (target.lambda1_star > 0 and abs(self.e1 + target.lambda1_star) <= tol)
            or (target.lambda2_star > 0 and abs(self.e2 + target.lambda2_star) <= tol)
        )


def covariance(positions) -> tuple[np.ndarray, Sym2]:
    """Centroid and population covariance (``1/N``) of an ``(N, 2)`` cloud."""
    P = np.asarray(positions, dtype=float)
    if P.ndim != 2 or P.shape[1] != 2:
        raise ValueError(f"positions must have shape (N, 2), got {P.shape}")
    if P.shape[0] < 2:
        raise ValueError("covariance needs at least 2 points")
    pc = P.mean(axis=0)
    Z = P - pc
    n = P.shape[0]
    return pc, Sym2(
        float(Z[:, 0] @ Z[:, 0] / n),
        float(Z[:, 0] @ Z[:, 1] / n),
        float(Z[:, 1] @ Z[:, 1] / n),
    )


def degeneracy_tol(trace) -> np.ndarray:
    return 1e-9 * np.maximum(1.0, np.abs(trace))


def _canonical_sign(v: np.ndarray) -> np.ndarray:
    # largest-magnitude component positive; ties resolved toward x
    pick_x = np.abs(v[:, 0]) + 1e-12 >= np.abs(v[:, 1])
    lead = np.where(pick_x, v[:, 0], v[:, 1])
    return np.where((lead < 0)[:, None], -v, v)


def eig_sym2_batch(c, prev_v1=None, prev_v2=None, orient: bool = True):
    """Closed-form eigen-decomposition of many symmetric 2x2 matrices.

    Parameters
    ----------
    c : (n, 3) array of ``(c1, c2, c3)``.
    prev_v1, prev_v2 : optional (n, 2) arrays with the previous bases, used for
        sign continuity and as the basis of degenerate (``lambda1 ~ lambda2``)
        matrices.

    Returns
    -------
    lam : (n, 2) descending eigenvalues.
    v1, v2 : (n, 2) orthonormal eigenvectors.

    With ``orient=False`` the sign conventions are skipped (callers that only
    use ``v v^T`` do not need them); degenerate matrices still fall back to
    the previous basis.
    """
    c = np.atleast_2d(np.asarray(c, dtype=float))
    a, b, d = c[:, 0], c[:, 1], c[:, 2]
    half_tr = 0.5 * (a + d)
    half_gap = np.hypot(0.5 * (a - d), b)
    lam = np.stack([half_tr + half_gap, half_tr - half_gap], axis=1)

    # two candidate (unnormalised) eigenvectors for lambda1; take the better conditioned
    l1 = lam[:, 0]
    u = np.stack([b, l1 - a], axis=1)
    w = np.stack([l1 - d, b], axis=1)
    nu = np.hypot(u[:, 0], u[:, 1])
    nw = np.hypot(w[:, 0], w[:, 1])
    use_w = nw > nu
    vec = np.where(use_w[:, None], w, u)
    nrm = np.where(use_w, nw, nu)
    degenerate = (2.0 * half_gap <= degeneracy_tol(a + d)) | (nrm == 0)
    safe = np.where(nrm > 0, nrm, 1.0)
    v1 = vec / safe[:, None]
    v1[degenerate] = (1.0, 0.0)
    if not orient:
        v2 = np.column_stack([-v1[:, 1], v1[:, 0]])
        if prev_v1 is not None:
            pv1 = np.atleast_2d(np.asarray(prev_v1, dtype=float))
            v1[degenerate] = pv1[degenerate]
            v2[degenerate] = np.column_stack([-pv1[:, 1], pv1[:, 0]])[degenerate]
        return lam, v1, v2
    v1 = _canonical_sign(v1)
    v2 = _canonical_sign(np.stack([-v1[:, 1], v1[:, 0]], axis=1))

    if prev_v1 is not None:
        pv1 = np.atleast_2d(np.asarray(prev_v1, dtype=float))
        pv2 = np.atleast_2d(np.asarray(prev_v2, dtype=float)) if prev_v2 is not None else np.stack(
            [-pv1[:, 1], pv1[:, 0]], axis=1
        )
        v1 = np.where(((v1 * pv1).sum(1) < 0)[:, None], -v1, v1)
        v2 = np.where(((v2 * pv2).sum(1) < 0)[:, None], -v2, v2)
        v1[degenerate] = pv1[degenerate]
        v2[degenerate] = pv2[degenerate]
    return lam, v1, v2


def eig_sym2(C: Sym2, prev: EigenBasis2 | None = None) -> EigenBasis2:
    """Descending eigenpairs of ``C`` with sign continuity against ``prev``."""
    pv1 = pv2 = None
    if prev is not None:
        pv1, pv2 = np.array([prev.v1]), np.array([prev.v2])
    lam, v1, v2 = eig_sym2_batch([[C.c1, C.c2, C.c3]], pv1, pv2)
    return EigenBasis2(
        float(lam[0, 0]), float(lam[0, 1]), (float(v1[0, 0]), float(v1[0, 1])), (float(v2[0, 0]), float(v2[0, 1]))
    )


def dispersion_error(C: Sym2, target: DispersionTarget, prev: EigenBasis2 | None = None):
    """Spectral error ``lambda_k - lambda_k*`` and the basis it was measured in."""
    basis = eig_sym2(C, prev)
    return DispersionError(basis.lambda1 - target.lambda1_star, basis.lambda2 - target.lambda2_star), basis


def covariance_similar(Ca: Sym2, Cb: Sym2, tol: float) -> bool:
    """Real symmetric matrices are similar iff their sorted spectra coincide."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    la = eig_sym2(Ca)
    lb = eig_sym2(Cb)
    return abs(la.lambda1 - lb.lambda1) <= tol and abs(la.lambda2 - lb.lambda2) <= tol


def projection_coordinates(positions, basis: EigenBasis2, centroid=None) -> np.ndarray:
    """``(N, 2)`` coordinates of barycentric positions along ``(v1, v2)``."""
    P = np.asarray(positions, dtype=float)
    pc = P.mean(axis=0) if centroid is None else np.asarray(centroid, dtype=float)
    return (P - pc) @ basis.V
