"""Centralized dispersion control law and closed-form eigenvalue dynamics.

Under ``u_i = -(e1 eta1_i v1 + e2 eta2_i v2)`` every eigenvalue obeys the
logistic-type flow ``d lambda/dt = -2 (lambda - lambda*) lambda`` while the
eigenvectors and the centroid stay fixed, so the whole cloud is scaled along
the eigen-axes. :func:`eigenvalue_flow` and :func:`scaling_certificate` are
the analytical oracles for those facts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dispersion import DispersionError, EigenBasis2

__all__ = [
    "CentralizedControlInput",
    "ScalingCertificate",
    "ScalingMismatch",
    "FlowResult",
    "centralized_velocities",
    "velocities_in_basis",
    "eigenvalue_flow",
    "eigenvalue_flow_ex",
    "scaling_certificate",
]


@dataclass(frozen=True)
class CentralizedControlInput:
    barycentric: np.ndarray
    basis: EigenBasis2
    error: DispersionError

    def __post_init__(self):
        Z = np.asarray(self.barycentric, dtype=float)
        object.__setattr__(self, "barycentric", Z)
        scale = max(1.0, float(np.abs(Z).max(initial=0.0)))
        if Z.size and np.abs(Z.sum(axis=0)).max() > 1e-9 * scale * Z.shape[0]:
            raise ValueError("barycentric coordinates must sum to zero")


def velocities_in_basis(Z, v1, v2, e1, e2) -> np.ndarray:
    """Control law on raw arrays.

    ``Z`` is ``(n, 2)``; ``v1``, ``v2`` are ``(2,)`` or per-agent ``(n, 2)``;
    ``e1``, ``e2`` scalars or ``(n,)``.
    """
    Z = np.asarray(Z, dtype=float)
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    if v1.ndim == 1 and v2.ndim == 1:
        # shared basis: plain matrix products
        eta1 = Z @ v1
        eta2 = Z @ v2
        return -(np.outer(e1 * eta1, v1) + np.outer(e2 * eta2, v2))
    v1 = np.broadcast_to(v1, Z.shape)
    v2 = np.broadcast_to(v2, Z.shape)
    eta1 = Z[:, 0] * v1[:, 0] + Z[:, 1] * v1[:, 1]
    eta2 = Z[:, 0] * v2[:, 0] + Z[:, 1] * v2[:, 1]
    return -((np.asarray(e1) * eta1)[:, None] * v1 + (np.asarray(e2) * eta2)[:, None] * v2)


def centralized_velocities(inp: CentralizedControlInput) -> np.ndarray:
    b = inp.basis
    return velocities_in_basis(inp.barycentric, np.asarray(b.v1), np.asarray(b.v2), inp.error.e1, inp.error.e2)


@dataclass(frozen=True)
class FlowResult:
    value: float
    stuck: bool = False


def eigenvalue_flow_ex(lambda0: float, lambda_star: float, t: float) -> FlowResult:
    """Exact solution of ``d lambda/dt = -2 (lambda - lambda*) lambda``.

    ``stuck`` is set when ``lambda0 == 0 < lambda*``: the unstable
    equilibrium at zero never leaves.
    """
    if lambda0 < 0 or lambda_star < 0 or t < 0:
        raise ValueError("lambda0, lambda_star and t must be non-negative")
    if lambda0 == 0.0:
        return FlowResult(0.0, stuck=lambda_star > 0)
    e0 = lambda0 - lambda_star
    if e0 == 0.0:
        return FlowResult(float(lambda_star))
    if lambda_star == 0.0:
        return FlowResult(e0 / (2.0 * e0 * t + 1.0))
    decay = math.exp(-2.0 * lambda_star * t)
    e = lambda_star * e0 * decay / (e0 + lambda_star - e0 * decay)
    return FlowResult(lambda_star + e)


def eigenvalue_flow(lambda0: float, lambda_star: float, t: float) -> float:
    return eigenvalue_flow_ex(lambda0, lambda_star, t).value


@dataclass(frozen=True)
class ScalingCertificate:
    s1: float | None
    s2: float | None
    residual: float

    @property
    def indeterminate(self) -> tuple[bool, bool]:
        return (self.s1 is None, self.s2 is None)


@dataclass(frozen=True)
class ScalingMismatch:
    axis: int
    worst_relative_deviation: float
    scales: tuple[float | None, float | None]


def scaling_certificate(p0, pt, basis0: EigenBasis2, tol: float = 1e-6, rel_tol: float = 1e-6):
    """Check that ``pt`` is ``p0`` stretched along the eigen-axes of ``basis0``.

    Returns a :class:`ScalingCertificate` (``residual`` is the worst relative
    spread of the per-agent ratios) or a :class:`ScalingMismatch`.
    """
    P0 = np.asarray(p0, dtype=float)
    Pt = np.asarray(pt, dtype=float)
    if P0.shape != Pt.shape:
        raise ValueError("both clouds must contain the same agents")
    V = basis0.V
    H0 = (P0 - P0.mean(axis=0)) @ V
    Ht = (Pt - Pt.mean(axis=0)) @ V
    scale = max(1e-300, float(np.abs(H0).max(initial=0.0)))
    scales: list[float | None] = []
    worst = 0.0
    worst_axis = 0
    for k in range(2):
        mask = np.abs(H0[:, k]) > tol * scale
        if not mask.any():
            scales.append(None)
            continue
        ratios = Ht[mask, k] / H0[mask, k]
        # least-squares scale, then relative spread of individual ratios
        s = float((Ht[mask, k] @ H0[mask, k]) / (H0[mask, k] @ H0[mask, k]))
        dev = float(np.abs(ratios - s).max() / max(abs(s), 1e-300))
        scales.append(s)
        if dev > worst:
            worst, worst_axis = dev, k
    if worst > rel_tol:
        return ScalingMismatch(axis=worst_axis + 1, worst_relative_deviation=worst, scales=tuple(scales))
    return ScalingCertificate(scales[0], scales[1], worst)
