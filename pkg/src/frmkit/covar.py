"""Two-step VaR / CoVaR estimation by unpenalised linear quantile regression.

Step one regresses institution ``i`` on the lagged macro state to get its
VaR path; step two regresses ``j`` on ``i``'s return and the macros, and the
CoVaR path is the fitted step-two equation evaluated at ``i``'s VaR.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .market_data import ReturnPanel
from .quantile import QuantileFit, QuantileProblem, solve


@dataclass(frozen=True)
class CoVarResult:
    tau: float
    var_i: np.ndarray
    covar_ji: np.ndarray
    alpha_i: float
    gamma_i: np.ndarray
    alpha_j_given_i: float
    beta_j_given_i: float
    gamma_j_given_i: np.ndarray

    @property
    def gammas(self) -> tuple[np.ndarray, np.ndarray]:
        return self.gamma_i, self.gamma_j_given_i


def _as_design(macros, T: int) -> np.ndarray:
    M = np.asarray(macros, dtype=float)
    if M.size == 0:
        return np.zeros((T, 0))
    return M.reshape(T, -1)


def estimate_var(returns_i, macros, tau: float) -> tuple[QuantileFit, np.ndarray]:
    """Quantile fit of ``returns_i`` on lagged macros and the fitted VaR path."""
    y = np.asarray(returns_i, dtype=float).ravel()
    M = _as_design(macros, y.size)
    if y.size <= M.shape[1] + 1:
        raise ValueError(f"need T > M + 1 observations, got T={y.size}, M={M.shape[1]}")
    fit = solve(QuantileProblem(y, M, tau, 0.0))
    return fit, fit.alpha + M @ fit.beta


def estimate_covar(returns_j, returns_i, macros, tau: float) -> CoVarResult:
    y_j = np.asarray(returns_j, dtype=float).ravel()
    x_i = np.asarray(returns_i, dtype=float).ravel()
    M = _as_design(macros, y_j.size)
    step1, var_i = estimate_var(x_i, M, tau)
    step2 = solve(QuantileProblem(y_j, np.column_stack([x_i, M]), tau, 0.0))
    beta = float(step2.beta[0])
    gamma = step2.beta[1:]
    covar = step2.alpha + beta * var_i + M @ gamma
    return CoVarResult(
        tau=tau,
        var_i=var_i,
        covar_ji=covar,
        alpha_i=step1.alpha,
        gamma_i=step1.beta,
        alpha_j_given_i=step2.alpha,
        beta_j_given_i=beta,
        gamma_j_given_i=gamma,
    )


def system_returns(panel: ReturnPanel) -> np.ndarray:
    """Equal-weighted cross-sectional mean of institution log returns."""
    return panel.institution_returns.mean(axis=1)
