"""Static SVG figures rendered from the emitted data files."""
from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import io  # noqa: E402

plt.rcParams["svg.hashsalt"] = "frmkit"
plt.rcParams["svg.fonttype"] = "none"


def _save(fig, path: Path) -> Path:
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return path


def _dates(rows, key="date"):
    return np.array([r[key] for r in rows], dtype="datetime64[D]")


def frm_figure(out: Path, tau: float) -> Path:
    s = io.read_frm_series(io.frm_paths(out, tau)["frm"], tau)
    fig, ax = plt.subplots(figsize=(8, 3))
    ax.plot(s.dates.astype("datetime64[D]").astype(object), s.values, color="tab:blue", lw=1)
    ax.set_title(f"FRM, tau={io.tau_tag(tau)}")
    ax.set_ylabel("mean lambda")
    fig.autofmt_xdate()
    return _save(fig, out / f"frm_{io.tau_tag(tau)}.svg")


def lambda_band_figure(out: Path, tau: float) -> Path:
    rows = io.read_rows(io.frm_paths(out, tau)["summary"], ("date", "q1", "q3", "mean", "max"))
    dates = _dates(rows).astype(object)
    col = {k: np.array([float(r[k]) for r in rows]) for k in ("min", "q1", "median", "q3", "max", "mean")}
    fig, ax = plt.subplots(figsize=(8, 3))
    ax.fill_between(dates, col["q1"], col["q3"], color="0.8", label="interquartile")
    ax.plot(dates, col["median"], color="0.3", lw=0.8, label="median")
    ax.plot(dates, col["mean"], color="tab:blue", lw=1, label="mean")
    ax.plot(dates, col["max"], color="tab:red", lw=0.8, label="max")
    ax.legend(loc="upper left", fontsize=7)
    ax.set_title(f"lambda distribution, tau={io.tau_tag(tau)}")
    fig.autofmt_xdate()
    return _save(fig, out / f"lambda_box_{io.tau_tag(tau)}.svg")


def network_figure(out: Path, tau: float) -> Path | None:
    windows = io.read_frm_outputs(out, tau)
    if not windows:
        return None
    last = windows[max(windows)]
    n = len(last.tickers)
    angle = 2 * np.pi * np.arange(n) / n
    xy = np.column_stack([np.cos(angle), np.sin(angle)])
    fig, ax = plt.subplots(figsize=(6, 6))
    W = np.abs(last.adjacency)
    top = W.max() if W.size and W.max() > 0 else 1.0
    for j, i in zip(*np.nonzero(W)):
        ax.annotate("", xy=xy[j], xytext=xy[i],
                    arrowprops={"arrowstyle": "->", "lw": 0.3 + 2 * W[j, i] / top, "color": "0.4", "alpha": 0.6})
    ax.scatter(xy[:, 0], xy[:, 1], s=40, color="tab:orange", zorder=3)
    for (x, y), t in zip(xy, last.tickers):
        ax.text(1.12 * x, 1.12 * y, t, ha="center", va="center", fontsize=7)
    ax.set_axis_off()
    ax.set_aspect("equal")
    ax.set_title(f"tail network {io._cell(last.date)}, tau={io.tau_tag(tau)}")
    return _save(fig, out / f"network_{io.tau_tag(tau)}.svg")


def dendrogram_figure(path: Path) -> Path:
    tree = json.loads(path.read_text(encoding="utf-8"))
    leaves: list[str] = []

    def walk(node):
        if "ticker" in node:
            leaves.append(node["ticker"])
            return float(len(leaves) - 1), 0.0
        xl, hl = walk(node["left"])
        xr, hr = walk(node["right"])
        h = node["height"]
        ax.plot([xl, xl, xr, xr], [hl, h, h, hr], color="tab:blue", lw=1)
        return (xl + xr) / 2, h

    fig, ax = plt.subplots(figsize=(8, 3.5))
    walk(tree)
    ax.set_xticks(range(len(leaves)))
    ax.set_xticklabels(leaves, rotation=90, fontsize=7)
    ax.set_ylabel("single-linkage height")
    ax.set_title(path.stem)
    fig.tight_layout()
    return _save(fig, path.with_suffix(".svg"))


def cumulative_figure(out: Path) -> Path | None:
    path = out / "cumulative.csv"
    if not path.is_file():
        return None
    rows = io.read_rows(path, ("date", "strategy", "cumulative"))
    fig, ax = plt.subplots(figsize=(8, 3.5))
    for name in sorted({r["strategy"] for r in rows}):
        sel = [r for r in rows if r["strategy"] == name]
        ax.plot(_dates(sel).astype(object), [float(r["cumulative"]) for r in sel], lw=1, label=name)
    ax.legend(fontsize=7)
    ax.set_title("cumulative return")
    fig.autofmt_xdate()
    return _save(fig, out / "cumulative.svg")


def render(out_dir, taus) -> list[Path]:
    out = Path(out_dir)
    made = []
    for tau in taus:
        if io.frm_paths(out, tau)["frm"].is_file():
            made += [frm_figure(out, tau), lambda_band_figure(out, tau), network_figure(out, tau)]
    dend_dir = out / "dendrograms"
    if dend_dir.is_dir():
        latest: dict[str, Path] = {}
        for p in sorted(dend_dir.glob("dendrogram_*.json")):
            latest[p.stem.rsplit("_", 1)[0]] = p
        made += [dendrogram_figure(p) for p in latest.values()]
    made.append(cumulative_figure(out))
    return [p for p in made if p is not None]
