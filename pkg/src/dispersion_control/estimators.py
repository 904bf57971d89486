"""Consensus estimators for barycentric coordinates and the global covariance.

Each agent ``i`` holds ``p_hat_i`` (estimate of ``p_i - p_c``) and ``c_hat_i``
(a 3-vector whose fixed point is ``c_i - mean(c)``). Both right-hand sides are
Laplacian consensus terms fed by a local source, so agent ``i`` only ever
reads its neighbours' values; the graph Laplacian is just the vectorised way
of summing over ``N_i``.

All derivative functions return the raw consensus term; timescale factors
(``1/(eps_f eps_s)``, ``1/eps_s``) are applied by the caller.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dispersion import Sym2
from .graph import Graph, laplacian

__all__ = [
    "EstimatorState",
    "centroid_estimator_derivative",
    "covariance_estimator_derivative",
    "outer_source",
    "partial_covariances",
    "recovered_covariance",
    "recovered_covariances",
    "estimation_errors",
    "run_static",
]


@dataclass
class EstimatorState:
    p_hat: np.ndarray  # (n, 2)
    c_hat: np.ndarray  # (n, 3)

    @classmethod
    def zeros(cls, n: int) -> "EstimatorState":
        return cls(np.zeros((n, 2)), np.zeros((n, 3)))

    def copy(self) -> "EstimatorState":
        return EstimatorState(self.p_hat.copy(), self.c_hat.copy())

    def c_hat_sym(self, i: int) -> Sym2:
        return Sym2.from_vector(self.c_hat[i])


def _lap(g_or_L) -> np.ndarray:
    if isinstance(g_or_L, Graph):
        return laplacian(g_or_L).astype(float)
    return np.asarray(g_or_L, dtype=float)


def centroid_estimator_derivative(p_hat, p, g) -> np.ndarray:
    """``-sum_{j in N_i} ((p_hat_i - p_hat_j) - (p_i - p_j))`` for every agent.

    ``g`` may be a :class:`Graph` or a precomputed Laplacian.
    """
    L = _lap(g)
    return -(L @ (np.asarray(p_hat, dtype=float) - np.asarray(p, dtype=float)))


def covariance_estimator_derivative(c_hat, source, g) -> np.ndarray:
    """Same consensus term on the 3-vector covariance estimates.

    ``source`` is an ``(n, 3)`` array: either the true partial covariances
    (open loop) or :func:`outer_source` of the centroid estimates (closed loop).
    """
    L = _lap(g)
    return -(L @ (np.asarray(c_hat, dtype=float) - np.asarray(source, dtype=float)))


def outer_source(p_hat) -> np.ndarray:
    """Vectorised ``p_hat_i p_hat_i^T`` as ``(n, 3)``."""
    P = np.asarray(p_hat, dtype=float)
    return np.stack([P[:, 0] * P[:, 0], P[:, 0] * P[:, 1], P[:, 1] * P[:, 1]], axis=1)


def partial_covariances(positions) -> np.ndarray:
    """Rank-one ``(p_i - p_c)(p_i - p_c)^T`` for each agent, as ``(n, 3)``."""
    P = np.asarray(positions, dtype=float)
    return outer_source(P - P.mean(axis=0))


def recovered_covariances(est: EstimatorState) -> np.ndarray:
    """Every agent's belief about the global covariance, ``(n, 3)``."""
    return outer_source(est.p_hat) - est.c_hat


def recovered_covariance(agent_index: int, positions, est: EstimatorState) -> Sym2:
    """Agent ``agent_index`` (0-based) estimate ``p_hat p_hat^T - C_hat``.

    ``positions`` is accepted for interface symmetry; an agent never needs
    the absolute positions to form this estimate.
    """
    P = np.asarray(positions, dtype=float)
    if P.shape[0] < 2:
        raise ValueError("covariance recovery needs at least 2 agents")
    return Sym2.from_vector(recovered_covariances(est)[agent_index])


def estimation_errors(positions, est: EstimatorState, alive=None) -> tuple[np.ndarray, np.ndarray]:
    """Ground-truth diagnostics ``||y_i||`` and ``||D_i||_F`` per agent.

    ``y_i = p_hat_i - (p_i - p_c)`` and ``D_i = C_hat_i - (C_i - C)`` with the
    centroid and covariance taken over ``alive`` agents (all by default).
    Entries of non-alive agents are NaN.
    """
    P = np.asarray(positions, dtype=float)
    n = P.shape[0]
    alive = np.ones(n, dtype=bool) if alive is None else np.asarray(alive, dtype=bool)
    Z = P[alive] - P[alive].mean(axis=0)
    c = outer_source(Z)
    Y = est.p_hat[alive] - Z
    D = est.c_hat[alive] - (c - c.mean(axis=0))
    ny = np.full(n, np.nan)
    nd = np.full(n, np.nan)
    ny[alive] = np.hypot(Y[:, 0], Y[:, 1])
    # off-diagonal entry appears twice in the Frobenius norm
    nd[alive] = np.sqrt(D[:, 0] ** 2 + 2.0 * D[:, 1] ** 2 + D[:, 2] ** 2)
    return ny, nd


def run_static(positions, g, duration: float, *, source: str = "true", h: float | None = None, samples: int = 200):
    """Integrate both estimators over a frozen cloud with RK4.

    ``source="true"`` feeds the covariance estimator the exact partial
    covariances; ``"cascade"`` feeds it ``p_hat p_hat^T`` as in the closed loop.
    Returns ``(t, err_y_max, err_D_max, err_total, final_state)`` where the
    error arrays are sampled about ``samples`` times.
    """
    P = np.asarray(positions, dtype=float)
    L = _lap(g)
    n = P.shape[0]
    lam_max = float(np.linalg.eigvalsh(L)[-1])
    if h is None:
        h = 0.5 / lam_max
    n_steps = max(1, int(np.ceil(duration / h - 1e-9)))
    h = duration / n_steps
    c_true = partial_covariances(P)
    LP = L @ P
    Lc = L @ c_true

    def rhs(x):
        ph, ch = x[:, :2], x[:, 2:]
        dph = -(L @ ph - LP)
        if source == "true":
            dch = -(L @ ch - Lc)
        else:
            dch = -(L @ (ch - outer_source(ph)))
        return np.hstack([dph, dch])

    if source not in ("true", "cascade"):
        raise ValueError(f"unknown source {source!r}")
    x = np.zeros((n, 5))
    every = max(1, n_steps // samples)
    ts, ey, ed, tot = [], [], [], []

    def sample(k):
        st = EstimatorState(x[:, :2].copy(), x[:, 2:].copy())
        ny, nd = estimation_errors(P, st)
        ts.append(k * h)
        ey.append(ny.max())
        ed.append(nd.max())
        tot.append(float(np.sqrt((ny ** 2).sum() + (nd ** 2).sum())))

    sample(0)
    for k in range(1, n_steps + 1):
        k1 = rhs(x)
        k2 = rhs(x + h / 2 * k1)
        k3 = rhs(x + h / 2 * k2)
        k4 = rhs(x + h * k3)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if k % every == 0 or k == n_steps:
            sample(k)
    final = EstimatorState(x[:, :2].copy(), x[:, 2:].copy())
    return np.array(ts), np.array(ey), np.array(ed), np.array(tot), final
