"""Undirected interaction graphs: incidence/Laplacian views, spectra, connectivity.

Vertices are labelled ``1..n`` at the public API (edge lists in configs are
1-based); matrices are indexed ``0..n-1`` in the usual numpy way.

The incidence matrix depends on the stored edge orientation, the Laplacian
``B @ B.T`` does not.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Graph",
    "GraphError",
    "SpectralSummary",
    "incidence_matrix",
    "laplacian",
    "spectral_summary",
    "is_connected",
    "remove_vertices",
    "geometric_graph",
    "connected_components",
]


class GraphError(ValueError):
    """Raised for malformed graphs or invalid graph operations."""


@dataclass(frozen=True)
class Graph:
    n_vertices: int
    edges: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        n = int(self.n_vertices)
        if n < 1:
            raise GraphError(f"n_vertices must be positive, got {self.n_vertices}")
        edges = tuple((int(i), int(j)) for i, j in self.edges)
        seen = set()
        for i, j in edges:
            if i == j:
                raise GraphError(f"self-loop at vertex {i}")
            if not (1 <= i <= n and 1 <= j <= n):
                raise GraphError(f"edge ({i}, {j}) outside vertex range 1..{n}")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise GraphError(f"duplicate edge ({i}, {j})")
            seen.add(key)
        object.__setattr__(self, "n_vertices", n)
        object.__setattr__(self, "edges", edges)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def neighbors(self, i: int) -> list[int]:
        """1-based neighbor list of vertex ``i``."""
        out = []
        for a, b in self.edges:
            if a == i:
                out.append(b)
            elif b == i:
                out.append(a)
        return sorted(out)

    def degree(self) -> np.ndarray:
        deg = np.zeros(self.n_vertices, dtype=np.int64)
        for i, j in self.edges:
            deg[i - 1] += 1
            deg[j - 1] += 1
        return deg

    def without_vertex_edges(self, victims) -> "Graph":
        """Same vertex set, with every edge touching ``victims`` dropped."""
        dead = set(int(v) for v in victims)
        return Graph(self.n_vertices, tuple(e for e in self.edges if e[0] not in dead and e[1] not in dead))


@dataclass(frozen=True)
class SpectralSummary:
    laplacian_eigenvalues: np.ndarray = field(repr=False)
    algebraic_connectivity: float

    @property
    def spectral_radius(self) -> float:
        return float(self.laplacian_eigenvalues[-1])


def incidence_matrix(g: Graph) -> np.ndarray:
    """``n x m`` integer matrix with +1 at each edge tail and -1 at its head."""
    B = np.zeros((g.n_vertices, g.n_edges), dtype=np.int64)
    for k, (tail, head) in enumerate(g.edges):
        B[tail - 1, k] = 1
        B[head - 1, k] = -1
    return B


def laplacian(g: Graph) -> np.ndarray:
    """Integer Laplacian ``L = B B^T`` (degree on the diagonal, -1 per edge)."""
    L = np.zeros((g.n_vertices, g.n_vertices), dtype=np.int64)
    for i, j in g.edges:
        a, b = i - 1, j - 1
        L[a, a] += 1
        L[b, b] += 1
        L[a, b] -= 1
        L[b, a] -= 1
    return L


def _jacobi_eigenvalues(A: np.ndarray, tol: float, max_sweeps: int) -> np.ndarray:
    """Cyclic Jacobi rotations on a dense symmetric matrix.

    Converges when the off-diagonal Frobenius norm drops below
    ``tol * max(1, ||A||_F)``; raises if ``max_sweeps`` is exhausted.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    if n == 1:
        return A.diagonal().copy()
    scale = max(1.0, float(np.linalg.norm(A)))
    iu = np.triu_indices(n, 1)
    for _ in range(max_sweeps):
        off = float(np.sqrt(2.0 * np.sum(A[iu] ** 2)))
        if off <= tol * scale:
            return np.sort(A.diagonal())
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # rotate rows/cols p, q
                Ap = A[:, p].copy()
                Aq = A[:, q].copy()
                A[:, p] = c * Ap - s * Aq
                A[:, q] = s * Ap + c * Aq
                Ap = A[p, :].copy()
                Aq = A[q, :].copy()
                A[p, :] = c * Ap - s * Aq
                A[q, :] = s * Ap + c * Aq
    raise GraphError(f"Jacobi eigensolver did not converge in {max_sweeps} sweeps")


def spectral_summary(g: Graph, tol: float = 1e-10, method: str = "lapack") -> SpectralSummary:
    """Sorted Laplacian spectrum and algebraic connectivity.

    ``method="lapack"`` uses ``numpy.linalg.eigvalsh``; ``method="jacobi"``
    runs the in-house cyclic Jacobi solver bounded to ``10 n^2`` sweeps.
    """
    L = laplacian(g).astype(float)
    n = g.n_vertices
    if method == "lapack":
        try:
            vals = np.linalg.eigvalsh(L)
        except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
            raise GraphError(f"eigensolver failed: {exc}") from exc
    elif method == "jacobi":
        vals = _jacobi_eigenvalues(L, tol, max_sweeps=10 * n * n)
    else:
        raise GraphError(f"unknown eigensolver {method!r}")
    vals = np.sort(vals)
    # eigenvalues of a PSD matrix; clip roundoff noise at the zero mode
    vals = np.where(np.abs(vals) <= max(tol, 1e-12) * max(1.0, vals[-1]), 0.0, vals)
    if vals[0] < -tol * max(1.0, vals[-1]):
        raise GraphError(f"negative Laplacian eigenvalue {vals[0]}")
    a = float(vals[1]) if n > 1 else 0.0
    return SpectralSummary(laplacian_eigenvalues=vals, algebraic_connectivity=a)


def connected_components(g: Graph) -> list[list[int]]:
    adj = [[] for _ in range(g.n_vertices + 1)]
    for i, j in g.edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = [False] * (g.n_vertices + 1)
    comps = []
    for start in range(1, g.n_vertices + 1):
        if seen[start]:
            continue
        seen[start] = True
        queue = deque([start])
        comp = []
        while queue:
            v = queue.popleft()
            comp.append(v)
            for w in adj[v]:
                if not seen[w]:
                    seen[w] = True
                    queue.append(w)
        comps.append(sorted(comp))
    return comps


def is_connected(g: Graph) -> bool:
    """Breadth-first reachability from vertex 1."""
    return len(connected_components(g)) == 1


def remove_vertices(g: Graph, victims) -> tuple[Graph, dict[int, int]]:
    """Induced subgraph on the survivors, relabelled ``1..n'`` in original order.

    Returns the subgraph and the ``old -> new`` label map for survivors.
    """
    victims = set(int(v) for v in victims)
    bad = [v for v in victims if not 1 <= v <= g.n_vertices]
    if bad:
        raise GraphError(f"vertices {sorted(bad)} not in graph")
    survivors = [v for v in range(1, g.n_vertices + 1) if v not in victims]
    if not survivors:
        raise GraphError("cannot remove every vertex")
    relabel = {old: new for new, old in enumerate(survivors, start=1)}
    edges = tuple(
        (relabel[i], relabel[j]) for i, j in g.edges if i in relabel and j in relabel
    )
    return Graph(len(survivors), edges), relabel


def geometric_graph(positions, radius: float, *, grow: float = 1.1, max_tries: int = 200) -> tuple[Graph, float]:
    """Connect all pairs closer than ``radius``; enlarge the radius until connected.

    Returns the graph and the radius actually used.
    """
    P = np.asarray(positions, dtype=float)
    n = P.shape[0]
    if radius <= 0:
        raise GraphError("radius must be positive")
    d = np.sqrt(((P[:, None, :] - P[None, :, :]) ** 2).sum(-1))
    iu, ju = np.triu_indices(n, 1)
    r = float(radius)
    for _ in range(max_tries):
        mask = d[iu, ju] <= r
        g = Graph(n, tuple(zip((iu[mask] + 1).tolist(), (ju[mask] + 1).tolist())))
        if is_connected(g):
            return g, r
        r *= grow
    raise GraphError(f"no connected geometric graph up to radius {r}")
