"""Risk-only allocators: MinVar, IVP, Inv-lambda, HRP and the FRM-uplifted HRP.

The two hierarchical variants share one pipeline (distance matrix, column
distance, single linkage, seriation, recursive bisection). Classical HRP
runs it on the sample correlation and covariance; the uplifted variant runs
it on the FRM adjacency matrix with the lambdas on its diagonal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NonPositiveClusterVariance, SingularCovariance, ZeroLambda, ZeroVariance

RIDGE = 1e-8
COND_LIMIT = 1e12


@dataclass(frozen=True)
class CovMatrix:
    tickers: tuple[str, ...]
    sigma: np.ndarray

    def __post_init__(self):
        sigma = np.asarray(self.sigma, dtype=float)
        if sigma.shape != (len(self.tickers),) * 2:
            raise ValueError(f"covariance shape {sigma.shape} does not match {len(self.tickers)} tickers")
        if not np.allclose(sigma, sigma.T, rtol=0.0, atol=1e-12):
            raise ValueError("covariance matrix is not symmetric")
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "sigma", sigma)


@dataclass(frozen=True)
class FrmAdjacency:
    """Signed betas off the diagonal, lambdas on it; may be asymmetric."""

    tickers: tuple[str, ...]
    a_tilde: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a_tilde, dtype=float)
        if a.shape != (len(self.tickers),) * 2:
            raise ValueError(f"adjacency shape {a.shape} does not match {len(self.tickers)} tickers")
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "a_tilde", a)

    @property
    def lambdas(self) -> np.ndarray:
        return np.diag(self.a_tilde).copy()


@dataclass(frozen=True)
class Dendrogram:
    """Single-linkage merge tree.

    Leaves are ``0..N-1``; the ``k``-th merge creates cluster ``N + k``.
    ``merges[k] = (left, right, height)``.
    """

    merges: list[tuple[int, int, float]]
    leaf_order: list[int]
    tickers: tuple[str, ...] = ()

    @property
    def heights(self) -> np.ndarray:
        return np.array([h for _, _, h in self.merges])

    def members(self, node: int) -> list[int]:
        n = len(self.leaf_order)
        if node < n:
            return [node]
        left, right, _ = self.merges[node - n]
        return self.members(left) + self.members(right)

    def to_dict(self) -> dict:
        """Nested merge tree, root first."""
        n = len(self.leaf_order)
        names = self.tickers or tuple(str(k) for k in range(n))

        def node(k: int) -> dict:
            if k < n:
                return {"id": k, "ticker": names[k]}
            left, right, h = self.merges[k - n]
            return {"id": k, "height": h, "left": node(left), "right": node(right)}

        return node(2 * n - 2) if n > 1 else node(0)


@dataclass(frozen=True)
class AllocationResult:
    strategy: str
    weights: np.ndarray
    tickers: tuple[str, ...] = ()
    leaf_order: list[int] | None = None
    diagnostics: dict = field(default_factory=dict)

    def as_dict(self) -> dict[str, float]:
        return {t: float(w) for t, w in zip(self.tickers, self.weights)}


def _tickers(obj, n: int, tickers=None) -> tuple[str, ...]:
    if tickers is not None:
        return tuple(tickers)
    found = getattr(obj, "tickers", None)
    return tuple(found) if found else tuple(str(k) for k in range(n))


def _sigma(cov) -> np.ndarray:
    return cov.sigma if isinstance(cov, CovMatrix) else np.asarray(cov, dtype=float)


def _min_var_solve(sigma: np.ndarray) -> np.ndarray:
    n = sigma.shape[0]
    ones = np.ones(n)
    try:
        cond = np.linalg.cond(sigma)
    except np.linalg.LinAlgError:
        cond = np.inf
    if not cond < COND_LIMIT:
        sigma = sigma + RIDGE * np.eye(n)
    try:
        x = np.linalg.solve(sigma, ones)
    except np.linalg.LinAlgError:
        raise SingularCovariance("covariance is singular even after ridge regularisation") from None
    total = x.sum()
    if not np.all(np.isfinite(x)) or abs(total) < 1e-300:
        raise SingularCovariance("minimum-variance system has no normalisable solution")
    return x / total


def minvar_weights(cov, long_only: bool = True, tickers=None) -> AllocationResult:
    """``Sigma^-1 1 / (1' Sigma^-1 1)``.

    With ``long_only`` negative weights are zeroed and the closed form is
    re-solved on the surviving assets until every weight is nonnegative.
    A ridge of 1e-8 is added only when the matrix is ill-conditioned.
    """
    sigma = _sigma(cov)
    n = sigma.shape[0]
    live = np.arange(n)
    rounds = 0
    while True:
        rounds += 1
        w_live = _min_var_solve(sigma[np.ix_(live, live)])
        if not long_only or np.all(w_live >= 0.0):
            break
        live = live[w_live >= 0.0]
    w = np.zeros(n)
    w[live] = w_live
    return AllocationResult("MinVar", w, _tickers(cov, n, tickers), None,
                            {"long_only": long_only, "rounds": rounds, "active": int(live.size)})


def _inverse_diag(diag: np.ndarray) -> np.ndarray:
    inv = 1.0 / diag
    return inv / inv.sum()


def ivp_weights(cov, tickers=None) -> AllocationResult:
    sigma = _sigma(cov)
    diag = np.diag(sigma).astype(float)
    if np.any(diag <= 0.0):
        raise ZeroVariance(f"nonpositive variance for asset(s) {np.flatnonzero(diag <= 0.0).tolist()}")
    return AllocationResult("IVP", _inverse_diag(diag), _tickers(cov, len(diag), tickers))


def inv_lambda_weights(lambdas, tickers=None) -> AllocationResult:
    lam = np.asarray(lambdas, dtype=float).ravel()
    if np.any(lam <= 0.0):
        raise ZeroLambda(f"nonpositive lambda for asset(s) {np.flatnonzero(lam <= 0.0).tolist()}")
    return AllocationResult("InvLambda", _inverse_diag(lam), _tickers(None, lam.size, tickers))


def corr_distance(corr) -> np.ndarray:
    rho = np.asarray(corr, dtype=float)
    return np.sqrt(np.clip(0.5 * (1.0 - rho), 0.0, None))


def adjacency_distance(a_tilde) -> np.ndarray:
    """Correlation-style distance on the betas.

    Off-diagonal entries with ``|beta| < 1`` use ``sqrt((1 - beta) / 2)``;
    the rest take the largest of those computed values (1.0, the distance
    of ``beta = -1``, if there are none). The diagonal is 0.
    """
    a = a_tilde.a_tilde if isinstance(a_tilde, FrmAdjacency) else np.asarray(a_tilde, dtype=float)
    n = a.shape[0]
    off = ~np.eye(n, dtype=bool)
    inside = off & (np.abs(a) < 1.0)
    d = np.zeros_like(a)
    d[inside] = np.sqrt(0.5 * (1.0 - a[inside]))
    fill = d[inside].max() if inside.any() else 1.0
    d[off & ~inside] = fill
    return d


def column_distance(d) -> np.ndarray:
    """Euclidean distance between columns; symmetric even for asymmetric input."""
    d = np.asarray(d, dtype=float)
    diff = d[:, :, None] - d[:, None, :]
    out = np.sqrt(np.einsum("nij,nij->ij", diff, diff))
    return np.minimum(out, out.T)


def single_linkage(d_tilde, tickers=()) -> Dendrogram:
    """Agglomerate by minimum pairwise distance.

    Each step merges the closest pair of active rows (ties go to the
    lexicographically smallest ``(i, j)``); the merged cluster keeps row
    ``i`` and its distances become the elementwise minimum of the two rows.
    Since row ``i`` is always the smaller index, a row's index is the
    smallest leaf it contains.
    """
    D = np.array(d_tilde, dtype=float)
    n = D.shape[0]
    if n < 2:
        raise ValueError("single linkage needs at least 2 items")
    np.fill_diagonal(D, np.inf)
    label = list(range(n))
    active = np.ones(n, dtype=bool)
    merges: list[tuple[int, int, float]] = []
    iu = np.triu_indices(n, 1)
    for k in range(n - 1):
        masked = np.where(active[:, None] & active[None, :], D, np.inf)
        flat = masked[iu]
        pos = int(np.argmin(flat))
        i, j = int(iu[0][pos]), int(iu[1][pos])
        merges.append((label[i], label[j], float(flat[pos])))
        D[i, :] = np.minimum(D[i, :], D[j, :])
        D[:, i] = D[i, :]
        D[i, i] = np.inf
        active[j] = False
        label[i] = n + k

    def leaves(node: int) -> list[int]:
        if node < n:
            return [node]
        left, right, _ = merges[node - n]
        return leaves(left) + leaves(right)

    return Dendrogram(merges, leaves(2 * n - 2), tuple(tickers))


def quasi_diagonalize(dend: Dendrogram, m) -> tuple[np.ndarray, np.ndarray]:
    perm = np.asarray(dend.leaf_order, dtype=int)
    m = np.asarray(m, dtype=float)
    if m.shape != (perm.size, perm.size):
        raise ValueError("matrix and dendrogram sizes differ")
    return m[np.ix_(perm, perm)], perm


def _cluster_variance(block: np.ndarray) -> float:
    w = _inverse_diag(np.diag(block))
    return float(w @ block @ w)


def recursive_bisection(ordered_m, mode: str = "covariance", record: list | None = None) -> np.ndarray:
    """Top-down split of the seriated order into contiguous halves.

    Each half gets its inverse-diagonal portfolio variance ``V``; the left
    half is scaled by ``1 - V1 / (V1 + V2)`` and the right by the rest. In
    adjacency mode a block with ``V <= 0`` falls back to the sum of its
    absolute entries; each fallback is appended to ``record``.
    """
    M = np.asarray(ordered_m, dtype=float)
    n = M.shape[0]
    diag = np.diag(M)
    if mode == "covariance":
        if np.any(diag <= 0.0):
            raise ZeroVariance("recursive bisection needs positive variances")
    elif mode == "adjacency":
        if np.any(diag <= 0.0):
            raise ZeroLambda("recursive bisection needs positive lambdas on the diagonal")
    else:
        raise ValueError(f"unknown mode {mode!r}")

    def variance(a: int, b: int) -> float:
        block = M[a:b, a:b]
        v = _cluster_variance(block)
        if v > 0.0:
            return v
        if mode == "covariance":
            raise SingularCovariance(f"cluster [{a}, {b}) has zero variance")
        fallback = float(np.abs(block).sum())
        if record is not None:
            record.append({"start": a, "stop": b, "variance": v, "fallback": fallback})
        if not fallback > 0.0:
            raise NonPositiveClusterVariance(f"cluster [{a}, {b}) has no positive variance proxy")
        return fallback

    w = np.ones(n)
    stack = [(0, n)]
    while stack:
        a, b = stack.pop()
        if b - a < 2:
            continue
        mid = a + math.ceil((b - a) / 2)
        v1, v2 = variance(a, mid), variance(mid, b)
        alpha = 1.0 - v1 / (v1 + v2)
        w[a:mid] *= alpha
        w[mid:b] *= 1.0 - alpha
        stack.extend([(mid, b), (a, mid)])
    return w


def _hierarchical(strategy: str, d: np.ndarray, m: np.ndarray, mode: str, tickers) -> AllocationResult:
    n = m.shape[0]
    if n == 1:
        return AllocationResult(strategy, np.ones(1), tuple(tickers), [0])
    dend = single_linkage(column_distance(d), tickers)
    ordered, perm = quasi_diagonalize(dend, m)
    record: list = []
    w_ordered = recursive_bisection(ordered, mode, record)
    w = np.empty(n)
    w[perm] = w_ordered
    return AllocationResult(strategy, w, tuple(tickers), list(dend.leaf_order),
                            {"dendrogram": dend, "fallbacks": record})


def hrp_weights(returns, tickers=None) -> AllocationResult:
    """Classical HRP from a ``T x N`` return window.

    Correlations that are undefined because a column is flat are set to 0
    so the clustering still runs; such a column then fails in the
    variance step with :class:`ZeroVariance`.
    """
    R = np.asarray(returns, dtype=float)
    if R.ndim != 2 or R.shape[0] < 2:
        raise ValueError("hrp needs a T x N return matrix with T >= 2")
    return hrp_from_cov(np.atleast_2d(np.cov(R, rowvar=False, ddof=1)), tickers)


def hrp_from_cov(cov, tickers=None) -> AllocationResult:
    """HRP on a covariance matrix; correlations follow from it."""
    names = _tickers(cov, _sigma(cov).shape[0], tickers)
    cov = _sigma(cov)
    std = np.sqrt(np.diag(cov))
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = cov / np.outer(std, std)
    corr = np.where(np.isfinite(corr), np.clip(corr, -1.0, 1.0), 0.0)
    np.fill_diagonal(corr, 1.0)
    return _hierarchical("HRP", corr_distance(corr), cov, "covariance", names)


def uphrp_weights(a_tilde, tickers=None) -> AllocationResult:
    a = a_tilde.a_tilde if isinstance(a_tilde, FrmAdjacency) else np.asarray(a_tilde, dtype=float)
    names = _tickers(a_tilde, a.shape[0], tickers)
    return _hierarchical("upHRP", adjacency_distance(a), a, "adjacency", names)
