"""Figure rendering for simulation artifacts.

Every plot function takes one of the delimited artifacts written by the CLI
(aggregate, comparison or controller-log CSV) and renders a PNG next to it.
``render_report`` scans a results directory and renders everything it finds.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

# compartments worth a line each on the overview figure
_OVERVIEW = ["S", "E", "Asy", "Sy", "H", "R", "D"]


class ReportError(ValueError):
    """Artifact not usable for rendering."""


def _read_csv(path: str | Path, required: tuple[str, ...]) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise ReportError(f"artifact not found: {path}")
    frame = pd.read_csv(path)
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise ReportError(f"{path} lacks column(s): {', '.join(missing)}")
    return frame


def plot_aggregate(agg_csv: str | Path, out_dir: str | Path, prefix: str = "sim") -> list[Path]:
    """Overview curves plus hospitalized / daily-death detail figures."""
    frame = _read_csv(agg_csv, ("day", "H_mean", "H_std", "D_mean"))
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    days = frame["day"].to_numpy()
    written = []

    fig, ax = plt.subplots(figsize=(9, 5))
    for name in _OVERVIEW:
        col = f"{name}_mean"
        if col in frame.columns:
            ax.plot(days, frame[col], label=name, lw=1.2)
    ax.set_xlabel("day")
    ax.set_ylabel("persons")
    ax.set_title("compartment means over runs")
    ax.legend(ncol=4, fontsize=8)
    path = out_dir / f"{prefix}_compartments.png"
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(9, 4))
    mean_h = frame["H_mean"].to_numpy()
    std_h = frame["H_std"].to_numpy()
    ax.plot(days, mean_h, color="tab:red", lw=1.5, label="hospitalized (mean)")
    ax.fill_between(days, mean_h - 2 * std_h, mean_h + 2 * std_h,
                    color="tab:red", alpha=0.2, label="±2 std")
    ax.set_xlabel("day")
    ax.set_ylabel("persons")
    ax.set_title("hospitalized")
    ax.legend(fontsize=8)
    path = out_dir / f"{prefix}_hospitalized.png"
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(9, 4))
    daily = np.diff(frame["D_mean"].to_numpy(), prepend=frame["D_mean"].iloc[0])
    ax.bar(days, daily, width=1.0, color="tab:gray")
    ax.set_xlabel("day")
    ax.set_ylabel("deaths per day")
    ax.set_title("daily deaths (mean over runs)")
    path = out_dir / f"{prefix}_deaths.png"
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    written.append(path)
    return written


def plot_compare(compare_csv: str | Path, out_dir: str | Path,
                 prefix: str = "scenario") -> list[Path]:
    """Baseline-versus-scenario hospitalized and cumulative-death curves."""
    frame = _read_csv(
        compare_csv,
        ("day", "baseline_H_mean", "scenario_H_mean", "baseline_D_mean", "scenario_D_mean"),
    )
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    days = frame["day"].to_numpy()
    written = []
    for quantity, title in (("H", "hospitalized"), ("D", "cumulative deaths")):
        fig, ax = plt.subplots(figsize=(9, 4))
        ax.plot(days, frame[f"baseline_{quantity}_mean"], label="baseline",
                color="tab:blue", lw=1.5)
        ax.plot(days, frame[f"scenario_{quantity}_mean"], label="scenario",
                color="tab:orange", lw=1.5)
        ax.set_xlabel("day")
        ax.set_ylabel("persons")
        ax.set_title(title)
        ax.legend(fontsize=8)
        path = out_dir / f"{prefix}_{quantity.lower()}_compare.png"
        fig.savefig(path, dpi=120, bbox_inches="tight")
        plt.close(fig)
        written.append(path)
    return written


def plot_controller(controller_csv: str | Path, out_dir: str | Path,
                    prefix: str = "controller") -> list[Path]:
    """Per-run hospitalized traces with the first run's lockdown spans shaded."""
    frame = _read_csv(controller_csv, ("run", "day", "hospitalized", "flag"))
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(9, 4))
    for run, group in frame.groupby("run"):
        ax.plot(group["day"], group["hospitalized"], lw=0.8, alpha=0.7,
                label=f"run {run}" if run < 5 else None)
    first = frame[frame["run"] == frame["run"].min()]
    on = first["flag"].to_numpy().astype(bool)
    days = first["day"].to_numpy()
    if on.any():
        edges = np.flatnonzero(np.diff(np.concatenate(([0], on.astype(int), [0]))))
        for lo, hi in zip(edges[::2], edges[1::2]):
            ax.axvspan(days[lo], days[min(hi, len(days) - 1)], color="tab:red", alpha=0.12)
    ax.set_xlabel("day")
    ax.set_ylabel("hospitalized")
    ax.set_title("controller-driven lockdowns (shaded: run 0)")
    ax.legend(fontsize=7)
    path = out_dir / f"{prefix}_lockdowns.png"
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return [path]


def render_report(results_dir: str | Path, out_dir: str | Path | None = None) -> list[Path]:
    """Render figures for every known artifact in a results directory."""
    results_dir = Path(results_dir)
    out_dir = Path(out_dir) if out_dir is not None else results_dir
    if not results_dir.is_dir():
        raise ReportError(f"not a directory: {results_dir}")
    written: list[Path] = []
    for agg in sorted(results_dir.glob("*aggregate.csv")):
        written += plot_aggregate(agg, out_dir, prefix=agg.stem.replace("aggregate", "sim").strip("_") or "sim")
    for cmp_path in sorted(results_dir.glob("*compare.csv")):
        written += plot_compare(cmp_path, out_dir, prefix=cmp_path.stem)
    for ctl in sorted(results_dir.glob("*controller_log.csv")):
        written += plot_controller(ctl, out_dir, prefix=ctl.stem)
    if not written:
        raise ReportError(f"no renderable artifacts (aggregate/compare/controller_log CSVs) in {results_dir}")
    return written
