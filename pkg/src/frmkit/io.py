"""Deterministic CSV / JSON emission and the matching readers.

Floats are written with ``repr`` so every value re-parses bit-for-bit.
File names use ``{tau:g}`` for the quantile level and ISO dates.
"""
from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .backtest import BacktestReport
from .covar import CoVarResult
from .errors import BadDate, BadNumber, MissingColumn, MissingInput
from .frm_engine import (
    FrmSeries,
    WindowResult,
    frm_index,
    lambda_distribution,
    macro_share,
    risk_indices,
)
from .network import CENTRALITY_COLUMNS, DependencyGraph, centrality_table
from .portfolio import Dendrogram


def tau_tag(tau: float) -> str:
    return f"{tau:g}"


def _cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return str(int(value))
    if isinstance(value, np.datetime64):
        return str(value.astype("datetime64[D]"))
    return str(value)


def write_rows(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    return path


def read_rows(path, required: Sequence[str]) -> list[dict[str, str]]:
    path = Path(path)
    if not path.is_file():
        raise MissingInput(str(path))
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for col in required:
            if col not in (reader.fieldnames or []):
                raise MissingColumn(col, str(path))
        return list(reader)


def _float(text: str, row: int, column: str, path) -> float:
    try:
        return float(text)
    except (TypeError, ValueError):
        raise BadNumber(row=row, column=column, path=str(path)) from None


def _date(text: str, row: int, path) -> np.datetime64:
    try:
        return np.datetime64(text, "D")
    except ValueError:
        raise BadDate(row=row, path=str(path)) from None


def write_json(path, payload) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.issubdtype(obj.dtype, np.datetime64):
            return [str(v) for v in obj.astype("datetime64[D]")]
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, np.datetime64):
        return str(obj.astype("datetime64[D]"))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    return obj


# -- FRM outputs --------------------------------------------------------------


def frm_paths(out_dir, tau: float) -> dict[str, Path]:
    out = Path(out_dir)
    t = tau_tag(tau)
    return {
        "frm": out / f"frm_{t}.csv",
        "lambda": out / f"lambda_{t}.csv",
        "macro_share": out / f"macro_share_{t}.csv",
        "centrality": out / f"centrality_{t}.csv",
        "risk": out / f"risk_{t}.csv",
        "summary": out / f"lambda_summary_{t}.csv",
        "adj_dir": out / "adj",
    }


def adjacency_path(out_dir, tau: float, date) -> Path:
    return Path(out_dir) / "adj" / f"adj_{tau_tag(tau)}_{_cell(np.datetime64(date, 'D'))}.csv"


def edges_path(out_dir, tau: float, date) -> Path:
    return Path(out_dir) / "edges" / f"edges_{tau_tag(tau)}_{_cell(np.datetime64(date, 'D'))}.csv"


def write_adjacency(path, result: WindowResult) -> Path:
    """Long format: one row per (row ticker, column name), institutions then macros."""
    columns = result.tickers + result.macros
    block = np.hstack([result.adjacency, result.macro_influence])
    return write_rows(path, ("row", "column", "beta"),
                      ((r, c, block[j, k]) for j, r in enumerate(result.tickers) for k, c in enumerate(columns)))


def write_centrality(path, results: Sequence[WindowResult]) -> Path:
    rows = []
    for res in results:
        table = centrality_table(DependencyGraph(res.tickers, res.adjacency))
        for k, t in enumerate(res.tickers):
            rows.append((res.date, t, *(table[c][k] for c in CENTRALITY_COLUMNS)))
    return write_rows(path, ("date", "ticker") + CENTRALITY_COLUMNS, rows)


def write_edges(path, result: WindowResult) -> Path:
    g = DependencyGraph(result.tickers, result.adjacency)
    return write_rows(path, ("from", "to", "weight"), g.edges())


def write_frm_outputs(out_dir, results: Sequence[WindowResult], smoothing: int = 7) -> dict[str, Path]:
    """Every per-tau FRM file: index, lambdas, adjacency, macro share, centrality, risk."""
    tau = results[0].tau
    paths = frm_paths(out_dir, tau)
    series = frm_index(results)
    write_rows(paths["frm"], ("date", "frm"), zip(series.dates, series.values))
    write_rows(paths["lambda"], ("date", "ticker", "lambda"),
               ((r.date, t, lam) for r in results for t, lam in zip(r.tickers, r.lambdas)))
    for r in results:
        write_adjacency(adjacency_path(out_dir, tau, r.date), r)
    shares = macro_share(results, smoothing)
    write_rows(paths["macro_share"], ("date", "macro", "share"),
               ((r.date, m, shares[m][k]) for k, r in enumerate(results) for m in r.macros))
    write_centrality(paths["centrality"], results)
    risk_rows = []
    for r in results:
        idx = risk_indices(r)
        risk_rows.extend((r.date, t, a, b) for t, a, b in zip(r.tickers, idx.srr, idx.sre))
    write_rows(paths["risk"], ("date", "ticker", "srr", "sre"), risk_rows)
    summary_rows = []
    for r in results:
        s = lambda_distribution(r)
        summary_rows.append((r.date, s.min, s.q1, s.median, s.q3, s.max, s.mean, s.argmax_ticker))
    write_rows(paths["summary"], ("date", "min", "q1", "median", "q3", "max", "mean", "argmax_ticker"),
               summary_rows)
    return paths


def read_frm_series(path, tau: float) -> FrmSeries:
    rows = read_rows(path, ("date", "frm"))
    return FrmSeries(
        dates=np.array([_date(r["date"], k, path) for k, r in enumerate(rows, 1)], dtype="datetime64[D]"),
        values=np.array([_float(r["frm"], k, "frm", path) for k, r in enumerate(rows, 1)]),
        tau=tau,
    )


def read_lambdas(path) -> dict[np.datetime64, dict[str, float]]:
    rows = read_rows(path, ("date", "ticker", "lambda"))
    out: dict[np.datetime64, dict[str, float]] = defaultdict(dict)
    for k, r in enumerate(rows, 1):
        out[_date(r["date"], k, path)][r["ticker"]] = _float(r["lambda"], k, "lambda", path)
    return dict(out)


def read_adjacency(path, tickers: Sequence[str]) -> tuple[np.ndarray, np.ndarray, tuple[str, ...]]:
    """``(adjacency, macro_influence, macros)`` for the given row order."""
    rows = read_rows(path, ("row", "column", "beta"))
    pos = {t: k for k, t in enumerate(tickers)}
    macros: list[str] = []
    for r in rows:
        if r["column"] not in pos and r["column"] not in macros:
            macros.append(r["column"])
    mpos = {m: k for k, m in enumerate(macros)}
    adj = np.zeros((len(tickers), len(tickers)))
    mac = np.zeros((len(tickers), len(macros)))
    for k, r in enumerate(rows, 1):
        if r["row"] not in pos:
            continue
        beta = _float(r["beta"], k, "beta", path)
        if r["column"] in pos:
            adj[pos[r["row"]], pos[r["column"]]] = beta
        else:
            mac[pos[r["row"]], mpos[r["column"]]] = beta
    return adj, mac, tuple(macros)


def read_frm_outputs(out_dir, tau: float) -> dict[np.datetime64, WindowResult]:
    """Rebuild window results from the lambda and adjacency files of one tau.

    Market caps are not part of these files and come back as NaN.
    """
    paths = frm_paths(out_dir, tau)
    lambdas = read_lambdas(paths["lambda"])
    out = {}
    for k, date in enumerate(sorted(lambdas)):
        tickers = tuple(lambdas[date])
        adj, mac, macros = read_adjacency(adjacency_path(out_dir, tau, date), tickers)
        out[date] = WindowResult(
            window_index=k,
            date=date,
            tau=tau,
            tickers=tickers,
            macros=macros,
            lambdas=np.array([lambdas[date][t] for t in tickers]),
            adjacency=adj,
            macro_influence=mac,
            active_counts=np.count_nonzero(adj, axis=1) + np.count_nonzero(mac, axis=1),
            market_caps=np.full(len(tickers), np.nan),
        )
    return out


# -- CoVaR, portfolios, backtest ------------------------------------------------


def write_covar(path, dates, result: CoVarResult) -> Path:
    return write_rows(path, ("date", "var_i", "covar_ji"), zip(dates, result.var_i, result.covar_ji))


def write_dendrogram(path, dend: Dendrogram) -> Path:
    return write_json(path, dend.to_dict())


def write_weights(path, records) -> Path:
    return write_rows(path, ("date", "strategy", "ticker", "weight"),
                      ((r.date, r.strategy, r.ticker, r.weight) for r in records))


def write_backtest(out_dir, report: BacktestReport) -> dict[str, Path]:
    out = Path(out_dir)
    payload = {
        "return_mode": report.return_mode,
        "rebalance_dates": report.rebalance_dates,
        "strategies": {
            name: {
                "mean": s.mean,
                "std": s.std,
                "sharpe": s.sharpe,
                "effective_n": s.effective_n,
                "dates": s.dates,
                "returns": s.returns,
                "cumulative": s.cumulative,
            }
            for name, s in report.strategies.items()
        },
    }
    paths = {"report": write_json(out / "report.json", payload)}
    paths["cumulative"] = write_rows(
        out / "cumulative.csv", ("date", "strategy", "cumulative"),
        ((d, name, c) for name, s in report.strategies.items() for d, c in zip(s.dates, s.cumulative)),
    )
    paths["weights"] = write_weights(out / "weights.csv", report.weights)
    return paths


def read_weights(path) -> dict[tuple[np.datetime64, str], dict[str, float]]:
    rows = read_rows(path, ("date", "strategy", "ticker", "weight"))
    out: dict = defaultdict(dict)
    for k, r in enumerate(rows, 1):
        out[(_date(r["date"], k, path), r["strategy"])][r["ticker"]] = _float(r["weight"], k, "weight", path)
    return dict(out)


def tree_files(root) -> Mapping[str, bytes]:
    """Relative path -> file bytes for every file below ``root``."""
    root = Path(root)
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}
