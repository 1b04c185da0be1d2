"""Rolling-window FRM: per-institution quantile Lasso fits and their summaries."""
from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import FrmError, InsufficientOverlap, WindowFitError
from .market_data import ReturnPanel, WindowSpec, select_top_j
from .quantile import ACTIVE_TOL, DEFAULT_GRID_SIZE, select_gacv

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class WindowResult:
    """Output of one window: lambdas, signed institution betas, macro betas.

    ``adjacency[j, i]`` is the coefficient of institution ``i`` in the
    regression of institution ``j`` (so column ``i`` influences row ``j``).
    """

    window_index: int
    date: np.datetime64
    tau: float
    tickers: tuple[str, ...]
    macros: tuple[str, ...]
    lambdas: np.ndarray
    adjacency: np.ndarray
    macro_influence: np.ndarray
    active_counts: np.ndarray
    market_caps: np.ndarray

    @property
    def abs_adjacency(self) -> np.ndarray:
        return np.abs(self.adjacency)

    @property
    def a_tilde(self) -> np.ndarray:
        """Adjacency with the lambdas on the diagonal."""
        out = self.adjacency.copy()
        np.fill_diagonal(out, self.lambdas)
        return out


@dataclass(frozen=True)
class FrmSeries:
    dates: np.ndarray
    values: np.ndarray
    tau: float


@dataclass(frozen=True)
class LambdaSummary:
    min: float
    q1: float
    median: float
    q3: float
    max: float
    mean: float
    argmax_ticker: str


@dataclass(frozen=True)
class RiskIndices:
    tickers: tuple[str, ...]
    srr: np.ndarray
    sre: np.ndarray


def _clean(beta: np.ndarray) -> np.ndarray:
    return np.where(np.abs(beta) > ACTIVE_TOL, beta, 0.0)


def fit_window(panel: ReturnPanel, s: int, spec: WindowSpec, grid_size: int = DEFAULT_GRID_SIZE) -> WindowResult:
    """Regress each selected institution on the others and the lagged macros."""
    idx = select_top_j(panel, s, spec)
    rows = slice(s, s + spec.length_n)
    R = panel.institution_returns[rows][:, idx]
    M = panel.macro_values[rows]
    J = len(idx)
    tickers = tuple(panel.institutions[k] for k in idx)

    lambdas = np.zeros(J)
    adjacency = np.zeros((J, J))
    macro_influence = np.zeros((J, panel.M))
    for j in range(J):
        others = [k for k in range(J) if k != j]
        X = np.hstack([R[:, others], M])
        try:
            res = select_gacv(R[:, j], X, spec.tau, grid_size)
        except FrmError as exc:
            raise WindowFitError(s, tickers[j], exc) from exc
        beta = _clean(res.selected_fit.beta)
        lambdas[j] = res.selected_lambda
        adjacency[j, others] = beta[: J - 1]
        macro_influence[j] = beta[J - 1 :]

    active = np.count_nonzero(adjacency, axis=1) + np.count_nonzero(macro_influence, axis=1)
    return WindowResult(
        window_index=s,
        date=panel.dates[s + spec.length_n - 1],
        tau=spec.tau,
        tickers=tickers,
        macros=panel.macros,
        lambdas=lambdas,
        adjacency=adjacency,
        macro_influence=macro_influence,
        active_counts=active,
        market_caps=panel.market_caps[s, idx].copy(),
    )


_WORKER_PANEL: ReturnPanel | None = None


def _init_worker(panel: ReturnPanel) -> None:
    global _WORKER_PANEL
    _WORKER_PANEL = panel


def _fit_in_worker(args) -> WindowResult:
    s, spec, grid_size = args
    return fit_window(_WORKER_PANEL, s, spec, grid_size)


def default_workers() -> int:
    env = os.environ.get("FRM_THREADS")
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


def run_frm(
    panel: ReturnPanel,
    spec: WindowSpec,
    grid_size: int = DEFAULT_GRID_SIZE,
    workers: int | None = None,
) -> list[WindowResult]:
    """Fit every stride-1 window; results come back in window order."""
    count = panel.T - spec.length_n + 1
    if count < 1:
        raise InsufficientOverlap(f"panel has {panel.T} rows, window needs {spec.length_n}")
    workers = default_workers() if workers is None else workers
    tasks = [(s, spec, grid_size) for s in range(count)]
    log.info("fitting %d windows at tau=%g with %d worker(s)", count, spec.tau, workers)
    if workers <= 1:
        return [fit_window(panel, s, spec, grid_size) for s, _, _ in tasks]
    with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(panel,)) as pool:
        return list(pool.map(_fit_in_worker, tasks, chunksize=max(1, count // (4 * workers))))


def frm_index(results: Sequence[WindowResult]) -> FrmSeries:
    if not results:
        raise ValueError("no window results")
    return FrmSeries(
        dates=np.array([r.date for r in results], dtype="datetime64[D]"),
        values=np.array([float(np.mean(r.lambdas)) for r in results]),
        tau=results[0].tau,
    )


def lambda_distribution(result: WindowResult) -> LambdaSummary:
    lam = result.lambdas
    q1, med, q3 = np.percentile(lam, [25, 50, 75])
    top = lam.max()
    argmax = min(t for t, v in zip(result.tickers, lam) if v == top)
    return LambdaSummary(
        min=float(lam.min()),
        q1=float(q1),
        median=float(med),
        q3=float(q3),
        max=float(top),
        mean=float(lam.mean()),
        argmax_ticker=argmax,
    )


def risk_indices(result: WindowResult | np.ndarray, caps=None) -> RiskIndices:
    """Market-cap weighted receiver (row) and emitter (column) indices.

    ``result`` is a :class:`WindowResult` or a bare adjacency matrix; caps
    default to the window-start caps stored on the result.
    """
    if isinstance(result, WindowResult):
        adjacency, tickers = result.adjacency, result.tickers
        caps = result.market_caps if caps is None else caps
    else:
        adjacency, tickers = np.asarray(result, dtype=float), ()
    caps = np.asarray(caps, dtype=float)
    if np.any(caps <= 0.0):
        raise ValueError("market caps must be positive")
    weights = np.abs(adjacency)
    return RiskIndices(
        tickers=tuple(tickers),
        srr=caps * (weights @ caps),
        sre=caps * (weights.T @ caps),
    )


def macro_share(results: Sequence[WindowResult], smoothing: int = 7) -> dict[str, np.ndarray]:
    """Per macro, the trailing-mean share of institutions with a nonzero beta on it."""
    if smoothing < 1:
        raise ValueError("smoothing must be >= 1")
    if not results:
        return {}
    raw = np.array([np.count_nonzero(r.macro_influence, axis=0) / len(r.tickers) for r in results])
    csum = np.cumsum(np.vstack([np.zeros((1, raw.shape[1])), raw]), axis=0)
    t = np.arange(1, raw.shape[0] + 1)
    lo = np.maximum(t - smoothing, 0)
    smooth = (csum[t] - csum[lo]) / (t - lo)[:, None]
    if smoothing == 1:
        smooth = raw
    return {m: smooth[:, k] for k, m in enumerate(results[0].macros)}
