"""CSV ingestion, return-panel alignment and rolling window bookkeeping."""
from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    BadDate,
    BadNumber,
    DataError,
    DuplicateDate,
    InsufficientOverlap,
    MissingColumn,
    MissingInput,
    NonPositivePrice,
    NotEnoughInstitutions,
)

SCHEMAS = {
    "prices": ("date", "ticker", "price"),
    "market_caps": ("date", "ticker", "market_cap"),
    "macros": ("date", "name", "value"),
}
MACRO_FILL_DAYS = 5


@dataclass(frozen=True)
class PriceSeries:
    """One ticker's observations, sorted by date.

    For macro series ``prices`` holds the raw macro value, which may be
    zero or negative (spreads, returns).
    """

    ticker: str
    dates: np.ndarray
    prices: np.ndarray
    market_caps: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.dates)


@dataclass(frozen=True)
class ReturnPanel:
    """Aligned log returns for ``J`` institutions plus ``M`` macro columns.

    Row ``t`` holds ``ln(P_t / P_{t-1})`` for each institution and, in the
    trailing ``M`` columns, the macro values observed at the previous panel
    date, so regressions on a row use ``M_{t-1}`` directly.
    """

    dates: np.ndarray
    institutions: tuple[str, ...]
    macros: tuple[str, ...]
    returns: np.ndarray
    market_caps: np.ndarray

    @property
    def T(self) -> int:
        return self.returns.shape[0]

    @property
    def J(self) -> int:
        return len(self.institutions)

    @property
    def M(self) -> int:
        return len(self.macros)

    @property
    def institution_returns(self) -> np.ndarray:
        return self.returns[:, : self.J]

    @property
    def macro_values(self) -> np.ndarray:
        return self.returns[:, self.J :]


@dataclass(frozen=True)
class WindowSpec:
    length_n: int = 63
    top_j: int = 25
    tau: float = 0.05

    def __post_init__(self):
        if self.length_n < 2:
            raise ValueError(f"window length must be >= 2, got {self.length_n}")
        if self.top_j < 2:
            raise ValueError(f"top_j must be >= 2, got {self.top_j}")
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must lie in (0, 1), got {self.tau}")


def _parse_date(text: str, row: int, path: str) -> np.datetime64:
    try:
        return np.datetime64(dt.date.fromisoformat(text.strip()), "D")
    except (ValueError, AttributeError):
        raise BadDate(row=row, path=path) from None


def _parse_float(text: str, row: int, column: str, path: str) -> float:
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise BadNumber(row=row, column=column, path=path) from None
    if not np.isfinite(value):
        raise BadNumber(row=row, column=column, path=path)
    return value


def load_csv(path, kind: str) -> list[PriceSeries]:
    """Read a long-format CSV into one :class:`PriceSeries` per ticker.

    Rows are numbered from 1, not counting the header. Prices and market
    caps must be strictly positive; macro values are unrestricted.
    """
    if kind not in SCHEMAS:
        raise ValueError(f"unknown CSV kind {kind!r}; expected one of {sorted(SCHEMAS)}")
    path = Path(path)
    if not path.is_file():
        raise MissingInput(str(path))
    date_col, key_col, value_col = SCHEMAS[kind]
    grouped: dict[str, dict[np.datetime64, tuple[float, int]]] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        for col in SCHEMAS[kind]:
            if col not in header:
                raise MissingColumn(col, str(path))
        reader.fieldnames = header
        for row_no, rec in enumerate(reader, start=1):
            day = _parse_date(rec[date_col] or "", row_no, str(path))
            key = (rec[key_col] or "").strip()
            value = _parse_float(rec[value_col], row_no, value_col, str(path))
            if kind != "macros" and value <= 0.0:
                raise NonPositivePrice(row=row_no, column=value_col, path=str(path))
            obs = grouped.setdefault(key, {})
            if day in obs:
                raise DuplicateDate(row=row_no, path=str(path))
            obs[day] = (value, row_no)

    out = []
    for key in sorted(grouped):
        days = sorted(grouped[key])
        values = np.array([grouped[key][d][0] for d in days])
        out.append(PriceSeries(ticker=key, dates=np.array(days, dtype="datetime64[D]"), prices=values))
    return out


def attach_market_caps(prices: Sequence[PriceSeries], caps: Sequence[PriceSeries]) -> list[PriceSeries]:
    """Join market caps onto price series by ticker and date (inner join)."""
    cap_map = {c.ticker: c for c in caps}
    out = []
    for s in prices:
        c = cap_map.get(s.ticker)
        if c is None:
            raise DataError(f"no market-cap series for {s.ticker}")
        common, i_p, i_c = np.intersect1d(s.dates, c.dates, return_indices=True)
        out.append(PriceSeries(s.ticker, common, s.prices[i_p], c.prices[i_c]))
    return out


def _lagged_macro(series: PriceSeries, prev_dates: np.ndarray) -> np.ndarray:
    """Macro value in force at each of ``prev_dates``; stale (> 5 days) values become NaN."""
    pos = np.searchsorted(series.dates, prev_dates, side="right") - 1
    out = np.full(prev_dates.size, np.nan)
    ok = pos >= 0
    age = (prev_dates[ok] - series.dates[pos[ok]]).astype(int)
    fresh = np.zeros(prev_dates.size, dtype=bool)
    fresh[ok] = age <= MACRO_FILL_DAYS
    out[fresh] = series.prices[pos[fresh]]
    return out


def build_panel(series: Sequence[PriceSeries], macro_names: Sequence[str]) -> ReturnPanel:
    """Align institutions on common dates and compute log returns.

    Institutions are inner-joined on their dates and sorted by ticker.
    Each macro value is the last observation at or before the previous
    panel date, carried forward at most five calendar days; rows whose
    lagged macro is stale or absent are dropped.
    """
    macro_set = set(macro_names)
    insts = sorted((s for s in series if s.ticker not in macro_set), key=lambda s: s.ticker)
    by_name = {s.ticker: s for s in series if s.ticker in macro_set}
    missing = [m for m in macro_names if m not in by_name]
    if missing:
        raise DataError(f"macro series not supplied: {missing}")
    if not insts:
        raise InsufficientOverlap("no institution series supplied")
    for s in insts:
        if s.market_caps is None:
            raise DataError(f"institution {s.ticker} has no market caps attached")

    common = insts[0].dates
    for s in insts[1:]:
        common = np.intersect1d(common, s.dates)
    if common.size < 2:
        raise InsufficientOverlap(f"only {common.size} common dates across institutions")

    levels = np.empty((common.size, len(insts)))
    caps = np.empty_like(levels)
    for k, s in enumerate(insts):
        idx = np.searchsorted(s.dates, common)
        levels[:, k] = s.prices[idx]
        caps[:, k] = s.market_caps[idx]

    rets = np.diff(np.log(levels), axis=0)
    macro_block = np.column_stack(
        [_lagged_macro(by_name[m], common[:-1]) for m in macro_names]
    ) if macro_names else np.empty((rets.shape[0], 0))
    keep = ~np.isnan(macro_block).any(axis=1)
    if not keep.any():
        raise InsufficientOverlap("no rows survive macro alignment")
    return ReturnPanel(
        dates=common[1:][keep],
        institutions=tuple(s.ticker for s in insts),
        macros=tuple(macro_names),
        returns=np.hstack([rets, macro_block])[keep],
        market_caps=caps[1:][keep],
    )


def select_top_j(panel: ReturnPanel, window_start: int, spec: WindowSpec) -> list[int]:
    """Indices of the ``top_j`` largest institutions at the window's first date.

    Ties in market cap go to the lexicographically smaller ticker. The
    result is sorted by index.
    """
    if window_start < 0 or window_start + spec.length_n > panel.T:
        raise ValueError(f"window starting at {window_start} does not fit in T={panel.T}")
    if panel.J < spec.top_j:
        raise NotEnoughInstitutions(f"{panel.J} institutions available, need {spec.top_j}")
    caps = panel.market_caps[window_start]
    order = sorted(range(panel.J), key=lambda k: (-caps[k], panel.institutions[k]))
    return sorted(order[: spec.top_j])


def windows(panel: ReturnPanel, spec: WindowSpec) -> Iterator[tuple[int, range]]:
    """Stride-1 windows of ``length_n`` rows: ``T - n + 1`` of them."""
    n = spec.length_n
    if panel.T < n:
        raise ValueError(f"panel has {panel.T} rows, window needs {n}")
    for s in range(panel.T - n + 1):
        yield s, range(s, s + n)


def load_panel(prices_path, caps_path, macros_path) -> ReturnPanel:
    """Convenience loader for the three-file CSV layout."""
    prices = load_csv(prices_path, "prices")
    caps = load_csv(caps_path, "market_caps")
    macros = load_csv(macros_path, "macros")
    series = attach_market_caps(prices, caps) + macros
    return build_panel(series, [m.ticker for m in macros])
