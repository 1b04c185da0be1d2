"""Brute-force reference implementations used only by the tests.

None of these share code with the package; they recompute each quantity
from its definition by enumeration or exhaustive search.
"""
from __future__ import annotations

import itertools

import numpy as np


# -- quantile regression --------------------------------------------------------


def qr_objective(y, X, tau, lam, alpha, beta):
    u = y - alpha - X @ beta
    return float(np.mean(np.where(u >= 0, tau * u, (tau - 1) * u)) + lam * np.abs(beta).sum())


def qr_vertex_oracle(y, X, tau, lam):
    """Exact optimum by enumerating basic solutions.

    A basic optimal solution has a support ``S`` of nonzero betas and
    interpolates ``|S| + 1`` observations, so trying every support and every
    interpolated subset (with a solvable system) covers all vertices.
    """
    n, p = X.shape
    best = np.inf
    for k in range(p + 1):
        for S in itertools.combinations(range(p), k):
            Z = np.column_stack([np.ones(n), X[:, list(S)]])
            for rows in itertools.combinations(range(n), k + 1):
                Zs = Z[list(rows)]
                if abs(np.linalg.det(Zs)) < 1e-12:
                    continue
                coef = np.linalg.solve(Zs, y[list(rows)])
                beta = np.zeros(p)
                beta[list(S)] = coef[1:]
                best = min(best, qr_objective(y, X, tau, lam, coef[0], beta))
    return best


def qr_lattice_oracle(y, X, tau, lam, points=21, rounds=30, shrink=0.35):
    """Grid search over (alpha, beta) on a lattice refined around the best point."""
    n, p = X.shape
    center = np.zeros(p + 1)
    center[0] = float(np.median(y))
    span = np.full(p + 1, 4.0 * (np.ptp(y) + 1.0))
    best_val = np.inf
    best = center.copy()
    for _ in range(rounds):
        axes = [np.linspace(c - s, c + s, points) for c, s in zip(center, span)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, p + 1)
        fitted = grid[:, :1] + grid[:, 1:] @ X.T
        u = y[None, :] - fitted
        vals = np.mean(np.where(u >= 0, tau * u, (tau - 1) * u), axis=1) + lam * np.abs(grid[:, 1:]).sum(axis=1)
        k = int(np.argmin(vals))
        if vals[k] < best_val:
            best_val = float(vals[k])
            best = grid[k]
        center = best
        span = span * shrink
    return best_val, best


# -- graphs -----------------------------------------------------------------------


def simple_paths_all(N):
    """Every simple path of length >= 1 in the complete digraph, as node tuples."""
    out = []
    for k in range(2, N + 1):
        out.extend(itertools.permutations(range(N), k))
    return out


def exhaustive_centrality(N, graph_codes):
    """Betweenness and closeness for every digraph whose edge bitmask is in ``graph_codes``.

    Edge ``(a -> b)`` with ``a != b`` owns bit ``edge_index[(a, b)]``. A path
    exists in a graph when all of its edge bits are set; shortest paths and
    their counts follow by taking minima over existing paths.
    """
    edges = [(a, b) for a in range(N) for b in range(N) if a != b]
    bit = {e: k for k, e in enumerate(edges)}
    paths = simple_paths_all(N)
    masks = np.array([sum(1 << bit[(p[i], p[i + 1])] for i in range(len(p) - 1)) for p in paths], dtype=np.int64)
    lengths = np.array([len(p) - 1 for p in paths])
    codes = np.asarray(graph_codes, dtype=np.int64)
    exists = (codes[:, None] & masks[None, :]) == masks[None, :]
    G = codes.size
    btw = np.zeros((G, N))
    clo = np.zeros((G, N))
    by_pair: dict = {}
    for idx, p in enumerate(paths):
        by_pair.setdefault((p[0], p[-1]), []).append(idx)
    for (l, k), idxs in by_pair.items():
        idxs = np.array(idxs)
        ex = exists[:, idxs]
        L = np.where(ex, lengths[idxs][None, :], np.iinfo(np.int64).max)
        dmin = L.min(axis=1)
        reach = dmin < np.iinfo(np.int64).max
        shortest = ex & (L == dmin[:, None])
        count = shortest.sum(axis=1)
        clo[reach, k] += 1.0 / dmin[reach]
        for j in range(N):
            if j in (l, k):
                continue
            through = np.array([j in paths[i][1:-1] for i in idxs])
            c_j = (shortest & through[None, :]).sum(axis=1)
            btw[reach, j] += c_j[reach] / count[reach]
    return btw, clo


def codes_to_adjacency(N, codes):
    """Adjacency batch with ``W[..., b, a] = 1`` for every edge ``a -> b`` present."""
    edges = [(a, b) for a in range(N) for b in range(N) if a != b]
    codes = np.asarray(codes, dtype=np.int64)
    W = np.zeros((codes.size, N, N))
    for k, (a, b) in enumerate(edges):
        W[:, b, a] = (codes >> k) & 1
    return W


def dfs_centrality(W):
    """Betweenness and closeness by depth-limited enumeration of simple paths.

    For each ordered pair the depth limit grows until some path exists; all
    simple paths of that length are then listed explicitly.
    """
    N = W.shape[0]
    succ = [[b for b in range(N) if b != a and W[b, a] != 0] for a in range(N)]

    def paths_of_length(src, dst, length):
        found = []

        def go(path):
            last = path[-1]
            if len(path) - 1 == length:
                if last == dst:
                    found.append(tuple(path))
                return
            for nxt in succ[last]:
                if nxt not in path:
                    path.append(nxt)
                    go(path)
                    path.pop()

        go([src])
        return found

    btw = np.zeros(N)
    clo = np.zeros(N)
    for l in range(N):
        for k in range(N):
            if l == k:
                continue
            for length in range(1, N):
                ps = paths_of_length(l, k, length)
                if ps:
                    clo[k] += 1.0 / length
                    for j in range(N):
                        if j not in (l, k):
                            btw[j] += sum(j in p[1:-1] for p in ps) / len(ps)
                    break
    return btw, clo


def dense_eigenvector(W):
    A = np.abs(np.asarray(W, dtype=float))
    vals, vecs = np.linalg.eig(A)
    k = int(np.argmax(vals.real))
    v = np.abs(vecs[:, k].real)
    return v / np.linalg.norm(v), vals


# -- clustering -------------------------------------------------------------------


def naive_single_linkage(d):
    """Merge heights and merged member sets, recomputing linkage from member pairs."""
    n = d.shape[0]
    clusters = [frozenset([k]) for k in range(n)]
    heights, merged = [], []
    while len(clusters) > 1:
        best = None
        for a, b in itertools.combinations(range(len(clusters)), 2):
            A, B = clusters[a], clusters[b]
            dist = min(d[i, j] for i in A for j in B)
            key = (dist, min(A), min(B))
            if best is None or key < best[0]:
                best = (key, a, b)
        (dist, _, _), a, b = best
        new = clusters[a] | clusters[b]
        heights.append(dist)
        merged.append(new)
        clusters = [c for k, c in enumerate(clusters) if k not in (a, b)] + [new]
    return heights, merged


# -- portfolios -------------------------------------------------------------------


def simplex_grid_minvar(sigma, step=0.002):
    """Long-only minimum variance for three assets by grid search over the simplex."""
    best = (np.inf, None)
    ticks = np.arange(0.0, 1.0 + step / 2, step)
    for a in ticks:
        b = ticks[ticks <= 1.0 - a + 1e-12]
        w = np.column_stack([np.full(b.size, a), b, np.clip(1.0 - a - b, 0.0, None)])
        v = np.einsum("ki,ij,kj->k", w, sigma, w)
        k = int(np.argmin(v))
        if v[k] < best[0]:
            best = (float(v[k]), w[k])
    return best
