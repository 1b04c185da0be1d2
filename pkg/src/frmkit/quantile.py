"""Linear quantile regression with an L1 penalty, solved exactly as an LP.

For a response ``y`` (n,) and design ``X`` (n, p) the solver minimises

    mean(check_loss(y - alpha - X @ beta, tau)) + lam * ||beta||_1

with a free, unpenalised intercept. The LP uses the split variables
``alpha = a+ - a-``, ``beta = b+ - b-`` and residual parts ``u+ - u-``.
The penalty enters only the objective, so a basis that is optimal for one
``lam`` stays primal feasible for every other ``lam``: the lambda path is
traced by warm-started primal simplex, starting from the exact
intercept-only solution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _simplex
from .errors import AllInfinite, Degenerate, NumericalFailure

ACTIVE_TOL = 1e-8
DEFAULT_GRID_SIZE = 50
GRID_RATIO = 1e-4


def check_loss(u, tau: float):
    """Quantile check function ``u * (tau - 1{u < 0})``; scalar in, scalar out."""
    arr = np.asarray(u, dtype=float)
    out = np.where(arr >= 0.0, tau * arr, (tau - 1.0) * arr)
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class QuantileProblem:
    y: np.ndarray
    X: np.ndarray
    tau: float
    lam: float = 0.0

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        X = np.asarray(self.X, dtype=float)
        if X.size == 0:
            X = np.zeros((y.size, 0))
        X = X.reshape(y.size, -1)
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must lie in (0, 1), got {self.tau}")
        if self.lam < 0.0:
            raise ValueError(f"lambda must be nonnegative, got {self.lam}")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)


@dataclass(frozen=True)
class QuantileFit:
    alpha: float
    beta: np.ndarray
    residuals: np.ndarray
    objective: float
    lambda_used: float
    df: int

    @property
    def active(self) -> np.ndarray:
        return np.abs(self.beta) > ACTIVE_TOL


@dataclass(frozen=True)
class GacvResult:
    lambda_grid: np.ndarray
    gacv_values: np.ndarray
    selected_lambda: float
    selected_fit: QuantileFit
    fits: list = field(default_factory=list, repr=False)


def effective_dimension(beta: np.ndarray) -> int:
    return 1 + int(np.count_nonzero(np.abs(beta) > ACTIVE_TOL))


def _intercept_start(y: np.ndarray, tau: float):
    """Optimal basis and dual vector of the intercept-only problem.

    The intercept is the smallest tau-quantile minimiser, ``y_(k)`` with
    ``k = ceil(n * tau)``. Rows tied at the intercept get basic residual
    variables chosen so that the dual of the interpolated row stays inside
    ``[tau - 1, tau]``, which makes the returned basis dual feasible.
    Returns ``(alpha, alpha_row, row_kind, theta)`` where ``row_kind[t]`` is
    +1 for a basic ``u+``, -1 for a basic ``u-`` and 0 for the intercept row.
    """
    n = y.size
    k = min(max(int(math.ceil(n * tau - 1e-9)), 1), n)
    alpha = float(np.sort(y)[k - 1])
    resid = y - alpha
    pos = resid > 0.0
    neg = resid < 0.0
    zero = np.flatnonzero(~pos & ~neg)
    theta = np.where(pos, tau, tau - 1.0)
    row_kind = np.where(pos, 1, -1)

    kz = zero.size
    s = tau * np.count_nonzero(pos) + (tau - 1.0) * np.count_nonzero(neg)
    c = -s - (kz - 1) * (tau - 1.0) - tau
    n_up = min(max(int(math.ceil(c - 1e-9)), 0), kz - 1)
    alpha_row = int(zero[0])
    others = zero[1:]
    theta[others[:n_up]] = tau
    row_kind[others[:n_up]] = 1
    theta[others[n_up:]] = tau - 1.0
    row_kind[others[n_up:]] = -1
    theta[alpha_row] = -s - n_up * tau - (kz - 1 - n_up) * (tau - 1.0)
    row_kind[alpha_row] = 0
    return alpha, alpha_row, row_kind, theta


def lambda_max(y, X, tau: float) -> float:
    """Smallest penalty at which the intercept-only fit is optimal.

    ``max_j |sum_t theta_t X_tj| / n`` with ``theta`` the dual of the
    intercept-only quantile fit.
    """
    y = np.asarray(y, dtype=float).ravel()
    X = np.asarray(X, dtype=float).reshape(y.size, -1)
    if X.shape[1] == 0:
        return 0.0
    _, _, _, theta = _intercept_start(y, tau)
    return float(np.max(np.abs(X.T @ theta)) / y.size)


class QuantileLP:
    """Simplex tableau for one ``(y, X, tau)``; refit cheaply for any lambda.

    Successive calls warm-start from the last optimal basis, so tracing a
    descending lambda grid costs only the extra pivots between grid points.
    """

    REFACTOR_EVERY = 200

    def __init__(self, y, X, tau: float):
        y = np.asarray(y, dtype=float).ravel()
        n = y.size
        if n < 1:
            raise Degenerate("quantile regression needs at least one observation")
        X = np.asarray(X, dtype=float)
        X = np.zeros((n, 0)) if X.size == 0 else X.reshape(n, -1)
        p = X.shape[1]
        self.y, self.X, self.tau = y, X, float(tau)
        self.n, self.p = n, p
        self.ncols = 2 + 2 * p + 2 * n
        # Logical columns are [a+, a-, b+, b-, u+, u-]; only [1, X, I] is stored.
        self.A = np.ascontiguousarray(np.hstack([np.ones((n, 1)), X, np.eye(n)]))
        one = np.array([0])
        cols = 1 + np.arange(p)
        units = 1 + p + np.arange(n)
        self.phys = np.concatenate([one, one, cols, cols, units, units]).astype(np.int64)
        self.sgn = np.concatenate([
            [1.0, -1.0], np.ones(p), -np.ones(p), np.ones(n), -np.ones(n)
        ])

        self.loss_cost = np.zeros(self.ncols)
        self.loss_cost[2 + 2 * p : 2 + 2 * p + n] = tau / n
        self.loss_cost[2 + 2 * p + n :] = (1.0 - tau) / n
        self.tie_cost = np.zeros(self.ncols)
        self.tie_cost[0], self.tie_cost[1] = 1.0, -1.0
        self.tie_eligible = np.ones(self.ncols, dtype=np.bool_)
        self.tie_eligible[2 : 2 + 2 * p] = False
        self.max_iter = 50 * (n + p)
        self.zero_tol = 1e-13 * max(float(np.abs(y).max()), 1e-300)

        alpha, alpha_row, row_kind, theta = _intercept_start(y, tau)
        self.theta = theta
        self.lambda_max = float(np.max(np.abs(X.T @ theta)) / n) if p else 0.0
        u0 = 2 + 2 * p
        basis = np.where(row_kind > 0, u0 + np.arange(n), u0 + n + np.arange(n))
        basis[alpha_row] = 0 if alpha >= 0.0 else 1
        self.basis = basis.astype(np.int64)
        # The start basis is signed unit columns plus one intercept column,
        # so B^-1 [A | y] is a row difference and needs no factorisation.
        V = np.hstack([self.A, y[:, None]])
        sign = np.where(row_kind > 0, 1.0, -1.0)
        self.tab = np.zeros((n + 2, self.A.shape[1] + 1))
        self.tab[:n] = sign[:, None] * (V - V[alpha_row])
        self.tab[alpha_row] = V[alpha_row] if basis[alpha_row] == 0 else -V[alpha_row]
        self.pivots = 0

    def path(self, lams, polish: bool = False) -> list[QuantileFit]:
        """Fits for each penalty in ``lams``, in the given order."""
        lams = np.ascontiguousarray(lams, dtype=float)
        if lams.size and lams.min() < 0.0:
            raise ValueError("lambda must be nonnegative")
        status, xs, bases, pivots = _simplex.trace_path(
            self.tab, self.basis, self.A, self.y, self.phys, self.sgn, self.loss_cost,
            2, 2 + 2 * self.p, lams, self.tie_cost, self.tie_eligible,
            self.zero_tol, self.max_iter, self.REFACTOR_EVERY,
        )
        self.pivots += pivots
        if status == _simplex.ITERATION_LIMIT:
            raise NumericalFailure(f"simplex hit the iteration cap of {self.max_iter} basis changes")
        if status != _simplex.OPTIMAL:
            raise NumericalFailure("quantile LP reported unbounded (numerical breakdown)")
        if polish:
            xs = np.array([np.linalg.solve(self._basis_matrix(b), self.y) for b in bases])
        self._bases = bases
        return self._vertex_fits(bases, xs, lams)

    def fit(self, lam: float, polish: bool = True) -> QuantileFit:
        return self.path([lam], polish=polish)[0]

    def polished(self, k: int, lam: float) -> QuantileFit:
        """Re-solve the basis of the ``k``-th fit of the last path exactly."""
        basis = self._bases[k : k + 1]
        xb = np.linalg.solve(self._basis_matrix(basis[0]), self.y)[None, :]
        return self._vertex_fits(basis, xb, np.array([lam]))[0]

    def _basis_matrix(self, basis) -> np.ndarray:
        return self.A[:, self.phys[basis]] * self.sgn[basis]

    def _vertex_fits(self, bases, xs, lams) -> list[QuantileFit]:
        p = self.p
        x = np.zeros((len(lams), self.ncols))
        np.put_along_axis(x, bases, xs, axis=1)
        alphas = x[:, 0] - x[:, 1]
        betas = x[:, 2 : 2 + p] - x[:, 2 + p : 2 + 2 * p]
        resid = self.y[None, :] - alphas[:, None] - betas @ self.X.T
        loss_sum = check_loss(resid, self.tau).reshape(resid.shape).sum(axis=1)
        objective = loss_sum / self.n + lams * np.abs(betas).sum(axis=1)
        dfs = 1 + np.count_nonzero(np.abs(betas) > ACTIVE_TOL, axis=1)
        self._loss_sums, self._dfs = loss_sum, dfs
        return [
            QuantileFit(
                alpha=float(alphas[k]),
                beta=betas[k],
                residuals=resid[k],
                objective=float(objective[k]),
                lambda_used=float(lams[k]),
                df=int(dfs[k]),
            )
            for k in range(len(lams))
        ]


def solve(problem: QuantileProblem) -> QuantileFit:
    if problem.y.size < 1:
        raise Degenerate("quantile regression needs at least one observation")
    return QuantileLP(problem.y, problem.X, problem.tau).fit(problem.lam)


def lambda_grid(lmax: float, grid_size: int = DEFAULT_GRID_SIZE) -> np.ndarray:
    """Descending log-spaced grid from ``lmax`` to ``lmax * 1e-4``."""
    return lmax * np.logspace(0.0, math.log10(GRID_RATIO), grid_size)


def gacv(fit: QuantileFit, tau: float) -> float:
    dof = fit.residuals.size - fit.df
    if dof <= 0:
        return math.inf
    return float(np.sum(check_loss(fit.residuals, tau)) / dof)


def select_gacv(y, X, tau: float, grid_size: int = DEFAULT_GRID_SIZE) -> GacvResult:
    """Pick lambda on the default grid by generalised approximate cross-validation.

    Ties go to the larger lambda. A zero ``lambda_max`` (no covariate can
    ever enter) collapses the grid to zeros and selects lambda = 0.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    lp = QuantileLP(y, X, tau)
    if lp.n < 2:
        raise Degenerate("GACV needs n > 1")
    grid = lambda_grid(lp.lambda_max, grid_size)
    fits = lp.path(grid)
    dof = lp.n - lp._dfs
    with np.errstate(divide="ignore", invalid="ignore"):
        values = np.where(dof > 0, lp._loss_sums / np.maximum(dof, 1), np.inf)
    if not np.isfinite(values).any():
        raise AllInfinite(f"n - df <= 0 on every grid point (n={lp.n}, p={lp.p})")
    best = int(np.argmin(values))
    fits[best] = lp.polished(best, float(grid[best]))
    values[best] = gacv(fits[best], tau)
    return GacvResult(
        lambda_grid=grid,
        gacv_values=values,
        selected_lambda=float(grid[best]),
        selected_fit=fits[best],
        fits=fits,
    )
