"""Periodic-rebalance backtest of the allocators on a return panel."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .errors import InsufficientOverlap, MissingFrmWindow, ZeroVolatility
from .frm_engine import WindowResult
from .market_data import ReturnPanel, WindowSpec, select_top_j
from .portfolio import (
    AllocationResult,
    FrmAdjacency,
    hrp_weights,
    inv_lambda_weights,
    ivp_weights,
    minvar_weights,
    uphrp_weights,
)

log = logging.getLogger(__name__)

COVARIANCE_STRATEGIES = ("MinVar", "IVP", "HRP")
FRM_STRATEGIES = ("InvLambda", "upHRP")
ALL_STRATEGIES = COVARIANCE_STRATEGIES + FRM_STRATEGIES
EXTRA_STRATEGIES = ("EqualWeight",)
LAMBDA_FLOOR = 1e-10


@dataclass(frozen=True)
class BacktestConfig:
    rebalance_days: int = 30
    strategies: tuple[str, ...] = ALL_STRATEGIES
    taus: tuple[float, ...] = (0.05,)
    return_mode: str = "simple"

    def __post_init__(self):
        if self.rebalance_days < 1:
            raise ValueError("rebalance_days must be >= 1")
        unknown = set(self.strategies) - set(ALL_STRATEGIES + EXTRA_STRATEGIES)
        if unknown:
            raise ValueError(f"unknown strategies {sorted(unknown)}")
        if any(not 0.0 < t < 1.0 for t in self.taus):
            raise ValueError("taus must lie in (0, 1)")
        if self.return_mode not in ("simple", "log"):
            raise ValueError("return_mode must be 'simple' or 'log'")
        object.__setattr__(self, "strategies", tuple(self.strategies))
        object.__setattr__(self, "taus", tuple(float(t) for t in self.taus))

    @property
    def needs_frm(self) -> bool:
        return any(s in FRM_STRATEGIES for s in self.strategies)

    def labels(self) -> list[str]:
        out = []
        for s in self.strategies:
            if s in FRM_STRATEGIES:
                out.extend(f"{s}@{t:g}" for t in self.taus)
            else:
                out.append(s)
        return out


@dataclass(frozen=True)
class StrategyReport:
    mean: float
    std: float
    sharpe: float
    effective_n: float
    dates: np.ndarray
    returns: np.ndarray
    cumulative: np.ndarray
    log_growth: np.ndarray


@dataclass(frozen=True)
class WeightRecord:
    date: np.datetime64
    strategy: str
    ticker: str
    weight: float


@dataclass
class BacktestReport:
    strategies: dict[str, StrategyReport]
    weights: list[WeightRecord] = field(default_factory=list)
    rebalance_dates: list[np.datetime64] = field(default_factory=list)
    allocations: dict[tuple[str, np.datetime64], AllocationResult] = field(default_factory=dict)
    return_mode: str = "simple"


def effective_n(weights) -> float:
    """``1 / sum(w^2)``, evaluated as ``(sum v)^2 / sum(v^2)`` with ``v = w / max|w|``.

    The two agree when the weights sum to one; the rescaled form is exact
    for equal weights of any count.
    """
    w = np.asarray(weights, dtype=float)
    if abs(w.sum() - 1.0) > 1e-8:
        raise ValueError(f"weights sum to {w.sum()}, not 1")
    v = w / np.max(np.abs(w))
    return float(v.sum() ** 2 / np.dot(v, v))


def _sample_std(r: np.ndarray) -> float:
    """``ddof=1`` standard deviation, exactly 0 for a constant series."""
    if r.size < 2:
        return float("nan")
    if np.all(r == r[0]):
        return 0.0
    return float(r.std(ddof=1))


def sharpe(returns) -> float:
    """Per-period mean over sample standard deviation; risk-free rate 0."""
    r = np.asarray(returns, dtype=float)
    if r.size < 2:
        raise ValueError("sharpe needs at least 2 observations")
    sd = _sample_std(r)
    if not sd > 0.0:
        raise ZeroVolatility("return series has zero standard deviation")
    return float(r.mean() / sd)


def rebalance_rows(T: int, length_n: int, rebalance_days: int) -> list[int]:
    """Rows at which weights are set: the end of the first window, then every ``rebalance_days``."""
    return list(range(length_n - 1, T - 1, rebalance_days))


def _allocate(strategy: str, window_returns: np.ndarray, tickers: tuple[str, ...],
              frm: WindowResult | None) -> AllocationResult:
    if strategy == "EqualWeight":
        n = len(tickers)
        return AllocationResult("EqualWeight", np.full(n, 1.0 / n), tickers)
    if strategy == "MinVar":
        cov = np.atleast_2d(np.cov(window_returns, rowvar=False, ddof=1))
        return minvar_weights(cov, long_only=True, tickers=tickers)
    if strategy == "IVP":
        cov = np.atleast_2d(np.cov(window_returns, rowvar=False, ddof=1))
        return ivp_weights(cov, tickers=tickers)
    if strategy == "HRP":
        return hrp_weights(window_returns, tickers)
    a_tilde = _frm_block(frm, tickers)
    if strategy == "InvLambda":
        return inv_lambda_weights(np.diag(a_tilde), tickers)
    return uphrp_weights(FrmAdjacency(tickers, a_tilde))


def _frm_block(frm: WindowResult, tickers: tuple[str, ...]) -> np.ndarray:
    """``A~`` of ``frm`` rearranged to ``tickers`` (joined by ticker), lambdas floored."""
    pos = {t: k for k, t in enumerate(frm.tickers)}
    missing = [t for t in tickers if t not in pos]
    if missing:
        raise MissingFrmWindow(str(frm.date), frm.tau, f"FRM window lacks tickers {missing}")
    idx = [pos[t] for t in tickers]
    a = frm.a_tilde[np.ix_(idx, idx)]
    np.fill_diagonal(a, np.maximum(np.diag(a), LAMBDA_FLOOR))
    return a


def _lookup(frm_outputs: Mapping, tau: float, date: np.datetime64) -> WindowResult:
    by_date = None
    for key, value in frm_outputs.items():
        if abs(float(key) - tau) < 1e-12:
            by_date = value
            break
    if by_date is None or date not in by_date:
        raise MissingFrmWindow(str(date), tau)
    return by_date[date]


def _stats(dates: np.ndarray, returns: np.ndarray, eff_ns: Sequence[float], mode: str) -> StrategyReport:
    if mode == "simple":
        log_growth = np.cumsum(np.log1p(returns))
    else:
        log_growth = np.cumsum(returns)
    sd = _sample_std(returns)
    mean = float(returns.mean())
    return StrategyReport(
        mean=mean,
        std=sd,
        sharpe=mean / sd if sd > 0.0 else float("nan"),
        effective_n=float(np.mean(eff_ns)),
        dates=dates,
        returns=returns,
        cumulative=np.expm1(log_growth),
        log_growth=log_growth,
    )


def run(panel: ReturnPanel, frm_outputs: Mapping | None, config: BacktestConfig,
        spec: WindowSpec | None = None) -> BacktestReport:
    """Rebalance every ``rebalance_days`` rows and hold weights fixed in between.

    At rebalance row ``r`` the estimation window is rows ``r - n + 1 .. r``;
    covariance strategies use its returns, FRM strategies use the window
    result dated ``panel.dates[r]``. Weights apply to rows ``r + 1`` up to
    the next rebalance. The universe is the window's top-J institutions.
    """
    spec = spec or WindowSpec()
    spec = replace(spec, top_j=min(spec.top_j, panel.J)) if panel.J >= 2 else spec
    n = spec.length_n
    rows = rebalance_rows(panel.T, n, config.rebalance_days)
    if not rows:
        raise InsufficientOverlap(f"panel of {panel.T} rows leaves no out-of-sample period for window {n}")
    if config.needs_frm and frm_outputs is None:
        raise MissingFrmWindow(str(panel.dates[rows[0]]), config.taus[0])

    growth = np.expm1(panel.institution_returns) if config.return_mode == "simple" else panel.institution_returns
    labels = config.labels()
    series = {lab: np.empty(0) for lab in labels}
    eff: dict[str, list[float]] = {lab: [] for lab in labels}
    records: list[WeightRecord] = []
    allocations = {}
    dates_out = []
    for k, r in enumerate(rows):
        stop = rows[k + 1] if k + 1 < len(rows) else panel.T - 1
        s = r - n + 1
        date = panel.dates[r]
        if panel.J >= 2:
            idx = select_top_j(panel, s, spec)
        else:
            idx = list(range(panel.J))
        tickers = tuple(panel.institutions[i] for i in idx)
        window = panel.institution_returns[s : r + 1][:, idx]
        held = growth[r + 1 : stop + 1][:, idx]
        dates_out.append(panel.dates[r + 1 : stop + 1])
        for strategy in config.strategies:
            taus = config.taus if strategy in FRM_STRATEGIES else (None,)
            for tau in taus:
                label = strategy if tau is None else f"{strategy}@{tau:g}"
                frm = _lookup(frm_outputs, tau, date) if tau is not None else None
                alloc = _allocate(strategy, window, tickers, frm)
                allocations[(label, date)] = alloc
                eff[label].append(effective_n(alloc.weights))
                series[label] = np.concatenate([series[label], held @ alloc.weights])
                records.extend(WeightRecord(date, label, t, float(w)) for t, w in zip(tickers, alloc.weights))
        log.debug("rebalanced at %s over %d assets", date, len(idx))

    dates = np.concatenate(dates_out)
    return BacktestReport(
        strategies={lab: _stats(dates, series[lab], eff[lab], config.return_mode) for lab in labels},
        weights=records,
        rebalance_dates=[panel.dates[r] for r in rows],
        allocations=allocations,
        return_mode=config.return_mode,
    )
