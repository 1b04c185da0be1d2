"""``frmkit`` command line: synth, frm, network, covar, portfolio, backtest, report.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Failures print a one-line JSON object on stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import io
from .backtest import ALL_STRATEGIES, EXTRA_STRATEGIES, FRM_STRATEGIES, BacktestConfig, run as run_backtest
from .covar import estimate_covar, system_returns
from .errors import DataError, FrmError, MissingFrmWindow
from .frm_engine import default_workers, run_frm
from .market_data import ReturnPanel, WindowSpec, load_panel, select_top_j
from .quantile import DEFAULT_GRID_SIZE

log = logging.getLogger("frmkit")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3
SYSTEM = "SYSTEM"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


@dataclass
class RunConfig:
    command: str
    data: Path | None = None
    prices: Path | None = None
    caps: Path | None = None
    macros: Path | None = None
    taus: list[float] = field(default_factory=lambda: [0.05])
    window: int = 63
    top: int = 25
    grid: int = DEFAULT_GRID_SIZE
    out: Path = Path("out")
    frm_dir: Path | None = None
    strategies: list[str] = field(default_factory=lambda: list(ALL_STRATEGIES))
    rebalance: int = 30
    return_mode: str = "simple"
    seed: int = 0
    days: int = 250
    regime_vol: float = 2.5
    pairs: list[str] = field(default_factory=list)
    asof: str | None = None

    def spec(self, tau: float) -> WindowSpec:
        return WindowSpec(length_n=self.window, top_j=self.top, tau=tau)

    def input_paths(self) -> tuple[Path, Path, Path]:
        if self.data is not None:
            base = Path(self.data)
            defaults = (base / "prices.csv", base / "market_caps.csv", base / "macros.csv")
        else:
            defaults = (None, None, None)
        paths = tuple(p if p is not None else d for p, d in zip((self.prices, self.caps, self.macros), defaults))
        if any(p is None for p in paths):
            raise UsageError("give --data DIR or all of --prices, --caps and --macros")
        return paths


# option registry: dest -> (converter, repeatable)
_OPTIONS: dict[str, tuple[Callable, bool]] = {}


def _opt(p: argparse.ArgumentParser, flag: str, conv: Callable = str, multi: bool = False, **kw):
    dest = flag.lstrip("-").replace("-", "_")
    _OPTIONS[dest] = (conv, multi)
    p.add_argument(flag, dest=dest, type=conv, action="append" if multi else "store", default=None, **kw)


def _inputs(p):
    _opt(p, "--data", Path, help="directory with prices.csv, market_caps.csv, macros.csv")
    _opt(p, "--prices", Path)
    _opt(p, "--caps", Path)
    _opt(p, "--macros", Path)


def _window(p):
    _opt(p, "--tau", float, multi=True, help="quantile level (repeatable, default 0.05)")
    _opt(p, "--window", int, help="window length n (default 63)")
    _opt(p, "--top", int, help="institutions per window J (default 25)")
    _opt(p, "--grid", int, help="lambda grid size (default 50)")


def _rebalance(p):
    _opt(p, "--strategy", str, multi=True, help=f"one of {', '.join(ALL_STRATEGIES + EXTRA_STRATEGIES)}")
    _opt(p, "--rebalance", int, help="rebalance period in rows (default 30)")
    _opt(p, "--return-mode", str, help="simple (default) or log")
    _opt(p, "--frm-dir", Path, help="directory holding FRM outputs (default: --out)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="frmkit", description=__doc__.splitlines()[0])
    parser.add_argument("--config", type=Path, help="flat key=value file; flags override it")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write a seeded synthetic dataset")
    _opt(p, "--seed", int)
    _opt(p, "--days", int)
    _opt(p, "--regime-vol", float)
    _opt(p, "--out", Path)

    p = sub.add_parser("frm", help="rolling FRM fits and their outputs")
    _inputs(p)
    _window(p)
    _opt(p, "--out", Path)

    p = sub.add_parser("network", help="edge lists and centralities from FRM outputs")
    _opt(p, "--tau", float, multi=True)
    _opt(p, "--frm-dir", Path)
    _opt(p, "--out", Path)

    p = sub.add_parser("covar", help="two-step VaR / CoVaR for institution pairs")
    _inputs(p)
    _opt(p, "--tau", float, multi=True)
    _opt(p, "--pair", str, multi=True, help=f"J:I tickers, {SYSTEM} for the equal-weighted system")
    _opt(p, "--out", Path)

    for name, text in (("portfolio", "allocations, dendrograms and backtest"), ("backtest", "backtest report only")):
        p = sub.add_parser(name, help=text)
        _inputs(p)
        _window(p)
        _rebalance(p)
        _opt(p, "--out", Path)
        if name == "portfolio":
            _opt(p, "--asof", str, help="allocate once at this window end date instead of rolling")

    p = sub.add_parser("report", help="render SVG figures from emitted outputs")
    _opt(p, "--tau", float, multi=True)
    _opt(p, "--out", Path)
    return parser


def load_config(path) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"config file not found: {path}")
    out = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def resolve(args: argparse.Namespace, file_cfg: dict[str, str]) -> RunConfig:
    values = {}
    for dest, (conv, multi) in _OPTIONS.items():
        if not hasattr(args, dest):
            continue
        value = getattr(args, dest)
        if value is None and dest in file_cfg:
            raw = file_cfg[dest]
            try:
                value = [conv(v.strip()) for v in raw.split(",") if v.strip()] if multi else conv(raw)
            except ValueError:
                raise UsageError(f"bad config value {dest}={raw!r}") from None
        if value is not None:
            values[dest] = value
    rename = {"tau": "taus", "strategy": "strategies", "pair": "pairs"}
    cfg = RunConfig(command=args.command, **{rename.get(k, k): v for k, v in values.items()})
    if not cfg.taus:
        raise UsageError("tau list is empty")
    if any(not 0.0 < t < 1.0 for t in cfg.taus):
        raise UsageError("tau must lie in (0, 1)")
    unknown = set(cfg.strategies) - set(ALL_STRATEGIES + EXTRA_STRATEGIES)
    if unknown:
        raise UsageError(f"unknown strategies {sorted(unknown)}")
    return cfg


# -- commands -------------------------------------------------------------------


def _panel(cfg: RunConfig) -> ReturnPanel:
    return load_panel(*cfg.input_paths())


def cmd_synth(cfg: RunConfig) -> int:
    from .synth import SynthConfig, generate, write

    data = generate(SynthConfig(seed=cfg.seed, days=cfg.days, regime_vol=cfg.regime_vol))
    paths = write(data, cfg.out)
    lo, hi = data.regime
    io.write_json(Path(cfg.out) / "regime.json", {
        "seed": cfg.seed, "days": cfg.days, "regime_vol": cfg.regime_vol,
        "regime_start": data.dates[lo], "regime_end": data.dates[hi - 1],
    })
    log.info("wrote %s", ", ".join(str(p) for p in paths.values()))
    return EXIT_OK


def cmd_frm(cfg: RunConfig) -> int:
    panel = _panel(cfg)
    workers = default_workers()
    for tau in cfg.taus:
        results = run_frm(panel, cfg.spec(tau), cfg.grid, workers)
        io.write_frm_outputs(cfg.out, results)
    return EXIT_OK


def cmd_network(cfg: RunConfig) -> int:
    frm_dir = cfg.frm_dir or cfg.out
    for tau in cfg.taus:
        windows = io.read_frm_outputs(frm_dir, tau)
        results = [windows[d] for d in sorted(windows)]
        for r in results:
            io.write_edges(io.edges_path(cfg.out, tau, r.date), r)
        io.write_centrality(Path(cfg.out) / f"centrality_{io.tau_tag(tau)}.csv", results)
    return EXIT_OK


def cmd_covar(cfg: RunConfig) -> int:
    panel = _panel(cfg)
    if not cfg.pairs:
        raise UsageError("give at least one --pair J:I")
    system = system_returns(panel)

    def series(name: str) -> np.ndarray:
        if name == SYSTEM:
            return system
        if name not in panel.institutions:
            raise DataError(f"unknown ticker {name!r}")
        return panel.institution_returns[:, panel.institutions.index(name)]

    for pair in cfg.pairs:
        if ":" not in pair:
            raise UsageError(f"pair {pair!r} must look like J:I")
        j, i = pair.split(":", 1)
        for tau in cfg.taus:
            res = estimate_covar(series(j), series(i), panel.macro_values, tau)
            io.write_covar(Path(cfg.out) / f"covar_{j}_{i}_{io.tau_tag(tau)}.csv", panel.dates, res)
    return EXIT_OK


def _frm_outputs(cfg: RunConfig) -> dict | None:
    if not any(s in FRM_STRATEGIES for s in cfg.strategies):
        return None
    frm_dir = cfg.frm_dir or cfg.out
    out = {}
    for tau in cfg.taus:
        if not io.frm_paths(frm_dir, tau)["lambda"].is_file():
            raise MissingFrmWindow("*", tau, f"no FRM outputs for tau={tau} in {frm_dir}")
        out[tau] = io.read_frm_outputs(frm_dir, tau)
    return out


def _emit_dendrograms(out: Path, allocations) -> None:
    for (label, date), alloc in sorted(allocations.items(), key=lambda kv: (str(kv[0][1]), kv[0][0])):
        dend = alloc.diagnostics.get("dendrogram")
        if dend is not None:
            io.write_dendrogram(out / "dendrograms" / f"dendrogram_{label}_{io._cell(date)}.json", dend)


def _rolling(cfg: RunConfig, dendrograms: bool) -> int:
    panel = _panel(cfg)
    frm = _frm_outputs(cfg)
    config = BacktestConfig(cfg.rebalance, tuple(cfg.strategies), tuple(cfg.taus), cfg.return_mode)
    report = run_backtest(panel, frm, config, cfg.spec(cfg.taus[0]))
    io.write_backtest(cfg.out, report)
    if dendrograms:
        _emit_dendrograms(Path(cfg.out), report.allocations)
    return EXIT_OK


def cmd_portfolio(cfg: RunConfig) -> int:
    if cfg.asof is None:
        return _rolling(cfg, dendrograms=True)
    panel = _panel(cfg)
    try:
        date = np.datetime64(cfg.asof, "D")
    except ValueError:
        raise UsageError(f"bad --asof date {cfg.asof!r}") from None
    hits = np.flatnonzero(panel.dates == date)
    if hits.size == 0 or hits[0] < cfg.window - 1:
        raise DataError(f"no complete window ends on {cfg.asof}")
    r = int(hits[0])
    if r + 1 >= panel.T:
        raise DataError(f"{cfg.asof} is the last panel date; nothing to hold the allocation over")
    frm = _frm_outputs(cfg)
    config = BacktestConfig(1, tuple(cfg.strategies), tuple(cfg.taus), cfg.return_mode)
    sub = ReturnPanel(panel.dates[r - cfg.window + 1 : r + 2], panel.institutions, panel.macros,
                      panel.returns[r - cfg.window + 1 : r + 2], panel.market_caps[r - cfg.window + 1 : r + 2])
    report = run_backtest(sub, frm, config, cfg.spec(cfg.taus[0]))
    io.write_weights(Path(cfg.out) / "weights.csv", report.weights)
    _emit_dendrograms(Path(cfg.out), report.allocations)
    return EXIT_OK


def cmd_backtest(cfg: RunConfig) -> int:
    return _rolling(cfg, dendrograms=False)


def cmd_report(cfg: RunConfig) -> int:
    from .report import render

    render(cfg.out, cfg.taus)
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "frm": cmd_frm,
    "network": cmd_network,
    "covar": cmd_covar,
    "portfolio": cmd_portfolio,
    "backtest": cmd_backtest,
    "report": cmd_report,
}


def _fail(code: int, payload: dict) -> int:
    payload["exit_code"] = code
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        cfg = resolve(args, load_config(args.config) if args.config else {})
        return COMMANDS[cfg.command](cfg)
    except UsageError as exc:
        return _fail(EXIT_USAGE, {"error": "UsageError", "message": str(exc)})
    except FrmError as exc:
        code = EXIT_NUMERICAL if exc.category == "numerical" else EXIT_DATA
        return _fail(code, exc.to_dict())
    except ValueError as exc:
        return _fail(EXIT_USAGE, {"error": "ValueError", "message": str(exc)})


if __name__ == "__main__":
    sys.exit(main())
