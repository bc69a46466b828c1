"""Render relaysim's tidy CSV grids as figures.

Consumes only the documented CSV schemas (the 10-column metrics table and the
3-column stability-region table); never imports the simulator.  Rendering is
read-only: plotted series carry the CSV values verbatim, so a test can compare
line data against the file exactly.

Exit codes mirror the producer CLI: 0 ok, 2 bad input/schema, 3 I/O failure,
4 unknown figure id.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import pandas as pd  # noqa: E402

METRIC_COLUMNS = [
    "channel",
    "strategy",
    "n_users",
    "gamma",
    "metric",
    "value",
    "ci_halfwidth",
    "seed",
    "slots",
    "reps",
]
REGION_COLUMNS = ["lambda_r1", "lambda_r2", "region_id"]

STRATEGY_LABELS = {
    "no_relay": "no relay",
    "one_relay": "one relay",
    "two_relay_simple": "two relays",
    "two_relay_clustered": "two relays, clustered",
    "two_relay_smaller_queue": "two relays, shorter queue",
    "dominant_s1": "relay 1 padded",
    "dominant_s2": "relay 2 padded",
}

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_IO = 3
EXIT_UNKNOWN_FIGURE = 4


class SchemaError(Exception):
    """Input CSV does not match the documented schema."""


@dataclass
class PlotSpec:
    figure_id: str
    metrics: list[str]  # plotted as one series per (strategy, gamma, metric)
    ylabel: str
    log_y: bool = False
    split_gamma: bool = True  # one panel per gamma value when several appear


FIGURES: dict[str, PlotSpec] = {
    "StabilityRegion": PlotSpec("StabilityRegion", [], "arrival rate at relay 2"),
    "SimpleBounds": PlotSpec(
        "SimpleBounds", ["throughput_per_user", "bound_upper", "bound_lower"],
        "per-user throughput (packets/slot)", log_y=True,
    ),
    "ClusterBounds": PlotSpec(
        "ClusterBounds", ["throughput_per_user", "bound_upper", "bound_lower"],
        "per-user throughput (packets/slot)", log_y=True,
    ),
    "ThroughputCompare": PlotSpec(
        "ThroughputCompare", ["aggregate_throughput"], "aggregate throughput (packets/slot)"
    ),
    "DelayCompareCollision": PlotSpec(
        "DelayCompareCollision", ["mean_delay"], "mean per-packet delay (slots)", log_y=True
    ),
    "MprAggregate": PlotSpec(
        "MprAggregate", ["aggregate_throughput"], "aggregate throughput (packets/slot)"
    ),
    "MprPerUser": PlotSpec(
        "MprPerUser", ["throughput_per_user"], "per-user throughput (packets/slot)"
    ),
    "MprQueue": PlotSpec(
        "MprQueue", ["mean_queue_r1", "mean_queue_r2"], "mean relay queue (packets)"
    ),
    "MprDelay": PlotSpec(
        "MprDelay", ["mean_delay"], "mean per-packet delay (slots)", log_y=True
    ),
}
FIGURE_IDS = list(FIGURES)


def _require_columns(df: pd.DataFrame, needed: list[str], path: str) -> None:
    missing = [c for c in needed if c not in df.columns]
    if missing:
        raise SchemaError(f"{path}: missing column(s): {', '.join(missing)}")


def _load_metrics(csv_path: str) -> pd.DataFrame:
    df = pd.read_csv(csv_path)
    _require_columns(df, METRIC_COLUMNS[:7], csv_path)
    return df


def _region_figure(csv_path: str) -> plt.Figure:
    df = pd.read_csv(csv_path)
    _require_columns(df, REGION_COLUMNS, csv_path)
    fig, ax = plt.subplots(figsize=(6, 5))
    # Group the _s1/_s2 halves of each region under one color.
    bases = sorted({rid.rsplit("_", 1)[0] for rid in df["region_id"]})
    colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    for k, base in enumerate(bases):
        for half in ("s1", "s2"):
            sub = df[df["region_id"] == f"{base}_{half}"]
            if sub.empty:
                continue
            ax.plot(
                sub["lambda_r1"],
                sub["lambda_r2"],
                color=colors[k % len(colors)],
                label=base if half == "s1" else None,
            )
    ax.set_xlabel("arrival rate at relay 1 (packets/slot)")
    ax.set_ylabel("arrival rate at relay 2 (packets/slot)")
    ax.set_title("stable-throughput region boundaries")
    ax.legend()
    return fig


def _series_label(strategy: str, metric: str, spec: PlotSpec) -> str:
    name = STRATEGY_LABELS.get(strategy, strategy)
    if len(spec.metrics) > 1 and metric != spec.metrics[0]:
        return f"{name}: {metric}"
    if metric in ("mean_queue_r1", "mean_queue_r2"):
        return f"{name}: relay {metric[-1]}"
    return name


def _metrics_figure(csv_path: str, spec: PlotSpec, log_y: Optional[bool]) -> plt.Figure:
    df = _load_metrics(csv_path)
    df = df[df["metric"].isin(spec.metrics)]
    if df.empty:
        raise SchemaError(f"{csv_path}: no rows for metric(s) {', '.join(spec.metrics)}")
    if spec.figure_id.startswith("Mpr") and df["gamma"].isna().all():
        raise SchemaError(f"{csv_path}: missing column(s): gamma")

    gammas = sorted(df["gamma"].dropna().unique())
    panels = gammas if (spec.split_gamma and len(gammas) > 1) else [None]
    fig, axes = plt.subplots(1, len(panels), figsize=(5.5 * len(panels), 4.5), squeeze=False)
    use_log = spec.log_y if log_y is None else log_y
    for ax, gamma in zip(axes[0], panels):
        sub = df if gamma is None else df[df["gamma"] == gamma]
        for (strategy, metric), grp in sub.groupby(["strategy", "metric"]):
            grp = grp.sort_values("n_users")
            yerr = grp["ci_halfwidth"].to_numpy()
            style = dict(marker="o", markersize=3)
            if metric.startswith("bound_"):
                style = dict(linestyle="--")
            if pd.notna(yerr).any():
                ax.errorbar(
                    grp["n_users"].to_numpy(),
                    grp["value"].to_numpy(),
                    yerr=pd.Series(yerr).fillna(0.0).to_numpy(),
                    capsize=2,
                    label=_series_label(strategy, metric, spec),
                    **style,
                )
            else:
                ax.plot(
                    grp["n_users"].to_numpy(),
                    grp["value"].to_numpy(),
                    label=_series_label(strategy, metric, spec),
                    **style,
                )
        if use_log:
            ax.set_yscale("log")
        ax.set_xlabel("number of users")
        ax.set_ylabel(spec.ylabel)
        if gamma is not None:
            ax.set_title(f"SINR threshold {gamma}")
        ax.legend(fontsize=8)
    fig.suptitle(spec.figure_id)
    fig.tight_layout()
    return fig


def build_figure(figure_id: str, csv_path: str, log_y: Optional[bool] = None) -> plt.Figure:
    """Build the matplotlib figure without writing it; raises SchemaError."""
    if figure_id not in FIGURES:
        raise KeyError(figure_id)
    if figure_id == "StabilityRegion":
        return _region_figure(csv_path)
    return _metrics_figure(csv_path, FIGURES[figure_id], log_y)


def render(figure_id: str, csv_path: str, out_path: str, log_y: Optional[bool] = None) -> str:
    fig = build_figure(figure_id, csv_path, log_y)
    try:
        fig.savefig(out_path, dpi=150)
    finally:
        plt.close(fig)
    return out_path


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="relayfigs", description="Render relaysim CSV grids as figures."
    )
    parser.add_argument("figure_id", help=f"one of: {', '.join(FIGURE_IDS)}")
    parser.add_argument("csv", help="input CSV produced by the relaysim CLI")
    parser.add_argument("out", help="output image path (png/pdf/svg)")
    scale = parser.add_mutually_exclusive_group()
    scale.add_argument("--log", dest="log_y", action="store_true", default=None,
                       help="force a log-scale y axis")
    scale.add_argument("--linear", dest="log_y", action="store_false",
                       help="force a linear y axis")
    args = parser.parse_args(argv)

    if args.figure_id not in FIGURES:
        print(f"error: unknown figure id {args.figure_id!r}", file=sys.stderr)
        return EXIT_UNKNOWN_FIGURE
    try:
        render(args.figure_id, args.csv, args.out, args.log_y)
    except SchemaError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except OSError as e:
        print(f"error: cannot write figure: {e}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {args.out}")
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
