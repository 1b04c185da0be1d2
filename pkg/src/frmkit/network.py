"""Centrality measures on the directed tail-dependency graph of a window.

Edge convention: a nonzero ``W[j, i]`` (institution ``i`` is a regressor of
institution ``j``) is a directed edge ``i -> j`` with weight ``|W[j, i]|``.
Shortest paths are unweighted hop counts. The path-count routines accept a
batch of adjacency matrices of shape ``(..., N, N)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence

EIGEN_TOL = 1e-10
EIGEN_MAX_ITER = 10_000


@dataclass(frozen=True)
class DependencyGraph:
    nodes: tuple[str, ...]
    W: np.ndarray

    def __post_init__(self):
        W = np.asarray(self.W, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1] or W.shape[0] != len(self.nodes):
            raise ValueError(f"adjacency shape {W.shape} does not match {len(self.nodes)} nodes")
        W = W.copy()
        np.fill_diagonal(W, 0.0)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "nodes", tuple(self.nodes))

    @classmethod
    def from_adjacency(cls, adjacency, nodes=None) -> "DependencyGraph":
        adjacency = np.asarray(adjacency, dtype=float)
        if nodes is None:
            nodes = [str(k) for k in range(adjacency.shape[0])]
        return cls(tuple(nodes), adjacency)

    @property
    def weights(self) -> np.ndarray:
        return np.abs(self.W)

    def edges(self) -> list[tuple[str, str, float]]:
        """``(source, target, weight)`` triples, sorted by (target, source) index."""
        rows, cols = np.nonzero(self.W)
        return [(self.nodes[i], self.nodes[j], float(abs(self.W[j, i]))) for j, i in zip(rows, cols)]


def _as_matrix(g) -> np.ndarray:
    return g.W if isinstance(g, DependencyGraph) else np.asarray(g, dtype=float)


def shortest_path_counts(W) -> tuple[np.ndarray, np.ndarray]:
    """Hop distances and geodesic counts between all ordered pairs.

    Returns ``(dist, sigma)`` with ``dist[..., s, t]`` the hop count from
    ``s`` to ``t`` (``inf`` when unreachable, 0 on the diagonal) and
    ``sigma[..., s, t]`` the number of shortest paths (1 on the diagonal).
    Breadth-first search runs for every source at once, one layer per
    matrix product.
    """
    W = np.asarray(W)
    N = W.shape[-1]
    step = (np.swapaxes(W, -1, -2) != 0).astype(np.int64)
    idx = np.arange(N)
    step[..., idx, idx] = 0
    eye = np.broadcast_to(np.eye(N, dtype=np.int64), W.shape)
    sigma = eye.copy()
    dist = np.where(eye == 1, 0.0, np.inf)
    frontier = eye.copy()
    for k in range(1, N):
        counts = frontier @ step
        fresh = (counts > 0) & np.isinf(dist)
        if not fresh.any():
            break
        dist[fresh] = k
        sigma[fresh] = counts[fresh]
        frontier = np.where(fresh, counts, 0)
    return dist, sigma


def closeness(g) -> np.ndarray:
    """``sum_{i != j} 1 / d(i, j)`` for each target ``j``; unreachable pairs add 0."""
    dist, _ = shortest_path_counts(_as_matrix(g))
    with np.errstate(divide="ignore"):
        inv = np.where(np.isfinite(dist) & (dist > 0), 1.0 / dist, 0.0)
    return inv.sum(axis=-2)


def betweenness(g) -> np.ndarray:
    """Sum over ordered pairs ``(l, k)`` of the share of ``l -> k`` geodesics through ``j``."""
    dist, sigma = shortest_path_counts(_as_matrix(g))
    N = dist.shape[-1]
    d_lj = dist[..., :, :, None]
    d_jk = dist[..., None, :, :]
    d_lk = dist[..., :, None, :]
    on_path = np.isfinite(d_lk) & (d_lj + d_jk == d_lk)
    ends = np.ones((N, N, N), dtype=bool)
    idx = np.arange(N)
    ends[idx, idx, :] = False
    ends[:, idx, idx] = False
    ends[idx, :, idx] = False
    s_lj = sigma[..., :, :, None].astype(float)
    s_jk = sigma[..., None, :, :].astype(float)
    s_lk = np.maximum(sigma[..., :, None, :], 1).astype(float)
    share = np.where(on_path & ends, s_lj * s_jk / s_lk, 0.0)
    return share.sum(axis=(-3, -1))


def _is_acyclic(step: np.ndarray) -> bool:
    reach = step.astype(bool)
    power = reach.copy()
    for _ in range(step.shape[0]):
        if np.diag(power).any():
            return False
        nxt = (power.astype(np.int64) @ step.astype(np.int64)) > 0
        if not nxt.any():
            return True
        power = nxt
    return not np.diag(power).any()


def eigenvector_centrality(g, tol: float = EIGEN_TOL, max_iter: int = EIGEN_MAX_ITER,
                           strict: bool = False) -> tuple[np.ndarray, bool, int]:
    """Perron vector of ``|W|`` by power iteration, L2-normalised and nonnegative.

    Solves ``delta * v = |W| v``. The iteration runs on ``|W| + I``, which
    has the same eigenvectors but a strictly dominant Perron root whenever
    ``|W|`` is irreducible, so periodic graphs still converge. Nodes with no
    incoming weight get exactly 0. An acyclic graph has spectral radius 0
    and no Perron vector; it returns all zeros.

    Returns ``(values, converged, iterations)``. With ``strict=True`` a
    non-converged run raises :class:`NoConvergence` instead.
    """
    A = np.abs(_as_matrix(g))
    N = A.shape[0]
    if N == 0:
        raise ValueError("graph has no nodes")
    np.fill_diagonal(A, 0.0)
    if _is_acyclic(A != 0):
        return np.zeros(N), True, 0
    dead = ~(A != 0).any(axis=1)
    shifted = A + np.eye(N)
    v = np.full(N, 1.0 / np.sqrt(N))
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        nxt = shifted @ v
        nxt[dead] = 0.0
        nxt /= np.linalg.norm(nxt)
        diff = np.max(np.abs(nxt - v))
        v = nxt
        if diff < tol:
            converged = True
            break
    if not converged and strict:
        raise NoConvergence(f"eigenvector centrality did not converge in {max_iter} iterations")
    return v, converged, it


@dataclass(frozen=True)
class Degrees:
    indegree: np.ndarray
    outdegree: np.ndarray
    total: int

    @property
    def degree(self) -> np.ndarray:
        return self.indegree + self.outdegree


def degrees(g) -> Degrees:
    """In-degree counts row nonzeros, out-degree column nonzeros."""
    W = _as_matrix(g).copy()
    np.fill_diagonal(W, 0.0)
    nz = W != 0
    return Degrees(
        indegree=nz.sum(axis=1).astype(np.int64),
        outdegree=nz.sum(axis=0).astype(np.int64),
        total=int(nz.sum()),
    )


CENTRALITY_COLUMNS = ("eigen", "closeness", "betweenness", "indeg", "outdeg")


def centrality_table(g: DependencyGraph) -> dict[str, np.ndarray]:
    """All node measures for one graph, keyed by column name."""
    eig, _, _ = eigenvector_centrality(g)
    deg = degrees(g)
    return {
        "eigen": eig,
        "closeness": closeness(g),
        "betweenness": betweenness(g),
        "indeg": deg.indegree,
        "outdeg": deg.outdegree,
    }
