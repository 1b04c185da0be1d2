"""Seeded synthetic market: regional banks, macro drivers and a stress regime.

Institutions load on a global factor and on one of six regional factors.
Every return, factor and macro shock is multiplied by a volatility level
that is 1 outside and ``regime_vol`` inside the middle third of the sample.
Macro series are daily changes, observed with a few one-day gaps.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .market_data import PriceSeries, ReturnPanel, attach_market_caps, build_panel

REGIONS = {"BS": 5, "RM": 3, "IS": 5, "MF": 3, "SJ": 5, "TI": 4}
MACROS = (
    "VIX", "SP500", "REIT", "TB3M", "TERM", "CREDIT", "EMBI",
    "USDBRL", "USDRUB", "USDINR", "USDMXN", "USDZAR", "USDTRY",
)
_CURRENCY_REGION = {"USDBRL": "BS", "USDRUB": "RM", "USDINR": "IS", "USDMXN": "MF", "USDZAR": "SJ", "USDTRY": "TI"}
# loading of each macro on the global factor and its own noise scale
_MACRO_LOADING = {
    "VIX": (-2.5, 0.03), "SP500": (0.8, 0.006), "REIT": (0.7, 0.008),
    "TB3M": (0.1, 0.01), "TERM": (-0.2, 0.01), "CREDIT": (-0.3, 0.008), "EMBI": (-0.5, 0.008),
}


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    days: int = 250
    regime_vol: float = 2.5
    start: str = "2019-01-02"
    gap_count: int = 4

    def __post_init__(self):
        if self.days < 12:
            raise ValueError("need at least 12 days")
        if self.regime_vol <= 0.0:
            raise ValueError("regime_vol must be positive")


@dataclass(frozen=True)
class SynthData:
    dates: np.ndarray
    tickers: tuple[str, ...]
    prices: np.ndarray
    caps: np.ndarray
    macro_dates: dict[str, np.ndarray]
    macro_values: dict[str, np.ndarray]
    regime: tuple[int, int]

    def series(self) -> tuple[list[PriceSeries], list[PriceSeries], list[PriceSeries]]:
        prices = [PriceSeries(t, self.dates, self.prices[:, k]) for k, t in enumerate(self.tickers)]
        caps = [PriceSeries(t, self.dates, self.caps[:, k]) for k, t in enumerate(self.tickers)]
        macros = [PriceSeries(m, self.macro_dates[m], self.macro_values[m]) for m in MACROS]
        return prices, caps, macros

    def panel(self) -> ReturnPanel:
        prices, caps, macros = self.series()
        return build_panel(attach_market_caps(prices, caps) + macros, list(MACROS))


def regime_rows(days: int) -> tuple[int, int]:
    """Half-open range of price-day indices forming the middle third."""
    return days // 3, 2 * days // 3


def tickers() -> tuple[str, ...]:
    return tuple(f"{region}{k + 1:02d}" for region, count in REGIONS.items() for k in range(count))


def generate(config: SynthConfig = SynthConfig()) -> SynthData:
    rng = np.random.default_rng(config.seed)
    names = tickers()
    region_of = np.array([t[:2] for t in names])
    region_names = list(REGIONS)
    J, T = len(names), config.days
    dates = np.busday_offset(np.datetime64(config.start, "D"), np.arange(T), roll="forward")

    lo, hi = regime_rows(T)
    vol = np.ones(T)
    vol[lo:hi] = config.regime_vol

    g = 0.008 * rng.standard_t(5, size=T)
    regional = 0.006 * rng.standard_t(5, size=(T, len(region_names)))
    b_global = rng.uniform(0.6, 1.4, size=J)
    b_region = rng.uniform(0.5, 1.5, size=J)
    idio = rng.uniform(0.008, 0.016, size=J)
    r_idx = np.array([region_names.index(r) for r in region_of])
    eps = rng.standard_t(5, size=(T, J)) * idio
    rets = vol[:, None] * (g[:, None] * b_global + regional[:, r_idx] * b_region + eps)
    rets[0] = 0.0
    p0 = rng.uniform(5.0, 80.0, size=J)
    prices = p0 * np.exp(np.cumsum(rets, axis=0))
    shares = np.exp(rng.uniform(np.log(2e8), np.log(6e9), size=J))
    caps = prices * shares

    macro_values = {}
    for m in MACROS:
        if m in _MACRO_LOADING:
            load, noise = _MACRO_LOADING[m]
            base = load * g + noise * rng.standard_normal(T)
        else:
            k = region_names.index(_CURRENCY_REGION[m])
            base = -0.4 * g - 0.5 * regional[:, k] + 0.004 * rng.standard_normal(T)
        macro_values[m] = vol * base
    macro_dates = {}
    for m in MACROS:
        keep = np.ones(T, dtype=bool)
        if config.gap_count:
            keep[rng.choice(np.arange(2, T - 2), size=min(config.gap_count, T - 4), replace=False)] = False
        macro_dates[m] = dates[keep]
        macro_values[m] = macro_values[m][keep]
    return SynthData(dates, names, prices, caps, macro_dates, macro_values, (lo, hi))


def write(data: SynthData, out_dir) -> dict[str, Path]:
    """Emit ``prices.csv``, ``market_caps.csv`` and ``macros.csv``."""
    from .io import write_rows

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"prices": out / "prices.csv", "caps": out / "market_caps.csv", "macros": out / "macros.csv"}
    days = [str(d) for d in data.dates]
    write_rows(paths["prices"], ("date", "ticker", "price"),
               ((days[i], t, data.prices[i, k]) for i in range(len(days)) for k, t in enumerate(data.tickers)))
    write_rows(paths["caps"], ("date", "ticker", "market_cap"),
               ((days[i], t, data.caps[i, k]) for i in range(len(days)) for k, t in enumerate(data.tickers)))
    write_rows(paths["macros"], ("date", "name", "value"),
               ((str(d), m, v) for m in MACROS for d, v in zip(data.macro_dates[m], data.macro_values[m])))
    return paths
