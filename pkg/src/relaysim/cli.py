"""Command-line front end: scenario analysis, simulation runs and the stock
figure grids, all emitted as tidy CSV.

Exit codes: 0 success, 2 invalid input/scenario, 3 I/O failure, 4 unknown
figure id.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Optional

from . import analysis
from .channel import mpr_success_closed_form
from .model import (
    NodeId,
    ScenarioConfig,
    Strategy,
    default_collision_params,
    default_mpr_topology,
    relay,
    user,
    validate,
)
from .sim import MetricsReport, derive_config, run

CSV_COLUMNS = [
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

FIGURE_IDS = [
    "StabilityRegion",
    "SimpleBounds",
    "ClusterBounds",
    "ThroughputCompare",
    "DelayCompareCollision",
    "MprAggregate",
    "MprPerUser",
    "MprQueue",
    "MprDelay",
]

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_IO = 3
EXIT_UNKNOWN_FIGURE = 4


def _fmt(x: Optional[float]) -> str:
    if x is None:
        return ""
    return f"{x:.10g}"


def _report_rows(rep: MetricsReport) -> list[list[str]]:
    base = [
        rep.channel,
        rep.strategy.value,
        str(rep.n_users),
        _fmt(rep.gamma),
    ]
    tail = [str(rep.seed), str(rep.slots), str(rep.reps)]
    pu_mean = sum(rep.throughput_per_user) / len(rep.throughput_per_user)
    metrics = [
        ("throughput_per_user", pu_mean, rep.ci.get("throughput_per_user")),
        ("aggregate_throughput", rep.aggregate_throughput, rep.ci.get("aggregate_throughput")),
        ("mean_delay", rep.mean_delay, rep.ci.get("mean_delay")),
        ("mean_queue_r1", rep.mean_queue[0], rep.ci.get("mean_queue_r1")),
        ("mean_queue_r2", rep.mean_queue[1], rep.ci.get("mean_queue_r2")),
        ("lambda_r1", rep.empirical_lambda[0], rep.ci.get("lambda_r1")),
        ("lambda_r2", rep.empirical_lambda[1], rep.ci.get("lambda_r2")),
        ("mu_r1", rep.empirical_mu[0], rep.ci.get("mu_r1")),
        ("mu_r2", rep.empirical_mu[1], rep.ci.get("mu_r2")),
        ("p_empty_r1", rep.empirical_p_empty[0], rep.ci.get("p_empty_r1")),
        ("p_empty_r2", rep.empirical_p_empty[1], rep.ci.get("p_empty_r2")),
    ]
    return [base + [name, _fmt(v), _fmt(ci)] + tail for name, v, ci in metrics]


def _write_csv(path: str, rows: list[list[str]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        writer.writerows(rows)


def _load_scenario(path: str) -> ScenarioConfig:
    with open(path) as fh:
        text = fh.read()
    return ScenarioConfig.from_json(text)


def cmd_analyze(args) -> int:
    try:
        config = _load_scenario(args.scenario)
    except OSError as e:
        print(f"error: cannot read scenario: {e}", file=sys.stderr)
        return EXIT_IO
    except (json.JSONDecodeError, KeyError, ValueError) as e:
        print(f"error: malformed scenario: {e}", file=sys.stderr)
        return EXIT_INVALID
    res = validate(config)
    if not res.ok:
        for path, msg in res.violations:
            print(f"invalid: {path}: {msg}", file=sys.stderr)
        return EXIT_INVALID

    rows: list[tuple[str, float]] = []
    if config.channel == "collision":
        p = config.params
        s1 = analysis.dominant_rates_s1(p)
        s2 = analysis.dominant_rates_s2(p)
        rows += [
            ("lambda_r2_empty_queue", s1.lambda_0),
            ("lambda_r2_busy_queue", s1.lambda_1),
            ("lambda_r2", s1.lam),
            ("p_empty_r2", s1.p_empty),
            ("mu_r2_dominant1", s1.mu),
            ("lambda_r1_empty_queue", s2.lambda_0),
            ("lambda_r1_busy_queue", s2.lambda_1),
            ("lambda_r1", s2.lam),
            ("p_empty_r1", s2.p_empty),
            ("mu_r1_dominant2", s2.mu),
            ("q_r1_min", analysis.q_min(p, 1)),
            ("q_r2_min", analysis.q_min(p, 2)),
        ]
        bounds = analysis.throughput_bounds(p, 1)
        rows += [
            ("throughput_upper_user1", bounds.per_user_upper),
            ("throughput_lower_user1", bounds.per_user_lower),
            ("no_relay_throughput_user1", analysis.no_relay_throughput(p, 1)),
        ]
    else:
        p = config.params
        # Single-transmitter decode probabilities per link class.
        links = [("u1_to_d", user(1), "d"), ("u1_to_r1", user(1), "r1"), ("u1_to_r2", user(1), "r2"),
                 ("r1_to_d", relay(1), "d")]
        for name, tx, rx_key in links:
            rx = NodeId.parse(rx_key)
            rows.append((name, mpr_success_closed_form(tx, rx, {tx}, p)))

    width = max(len(name) for name, _ in rows)
    for name, value in rows:
        print(f"{name:<{width}}  {value:.6f}")

    if args.csv:
        gamma = config.params.sinr_threshold["d"] if config.channel == "mpr" else None
        csv_rows = [
            [
                config.channel,
                config.strategy.value,
                str(config.params.n_users),
                _fmt(gamma),
                name,
                _fmt(value),
                "",
                str(config.seed),
                "",
                "",
            ]
            for name, value in rows
        ]
        try:
            _write_csv(args.csv, csv_rows)
        except OSError as e:
            print(f"error: cannot write CSV: {e}", file=sys.stderr)
            return EXIT_IO
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        config = _load_scenario(args.scenario)
    except OSError as e:
        print(f"error: cannot read scenario: {e}", file=sys.stderr)
        return EXIT_IO
    except (json.JSONDecodeError, KeyError, ValueError) as e:
        print(f"error: malformed scenario: {e}", file=sys.stderr)
        return EXIT_INVALID
    if args.slots is not None:
        config.horizon_slots = args.slots
        config.warmup_slots = args.slots // 10
    if args.reps is not None:
        config.replications = args.reps
    if args.seed is not None:
        config.seed = args.seed
    res = validate(config)
    if not res.ok:
        for path, msg in res.violations:
            print(f"invalid: {path}: {msg}", file=sys.stderr)
        return EXIT_INVALID
    report = run(config)
    try:
        _write_csv(args.out, _report_rows(report))
    except OSError as e:
        print(f"error: cannot write CSV: {e}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {args.out}")
    return EXIT_OK


def _workers() -> int:
    return max(1, int(os.environ.get("RELAYSIM_WORKERS", "1")))


def _run_points(configs: list[ScenarioConfig]) -> list[MetricsReport]:
    workers = _workers()
    if workers == 1:
        return [run(c) for c in configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, configs))


def _collision_base(strategy: Strategy, seed: int, slots: int, reps: int) -> ScenarioConfig:
    clustered = strategy == Strategy.TWO_RELAY_CLUSTERED
    return ScenarioConfig(
        channel="collision",
        params=default_collision_params(2, clustered=clustered),
        strategy=strategy,
        horizon_slots=slots,
        warmup_slots=slots // 10,
        seed=seed,
        replications=reps,
    )


def _mpr_base(strategy: Strategy, seed: int, slots: int, reps: int) -> ScenarioConfig:
    clustered = strategy == Strategy.TWO_RELAY_CLUSTERED
    return ScenarioConfig(
        channel="mpr",
        params=default_mpr_topology(2, clustered=clustered),
        strategy=strategy,
        horizon_slots=slots,
        warmup_slots=slots // 10,
        seed=seed,
        replications=reps,
    )


COLLISION_COMPARE_STRATEGIES = [
    Strategy.NO_RELAY,
    Strategy.ONE_RELAY,
    Strategy.TWO_RELAY_SIMPLE,
    Strategy.TWO_RELAY_CLUSTERED,
]
MPR_STRATEGIES = [
    Strategy.NO_RELAY,
    Strategy.ONE_RELAY,
    Strategy.TWO_RELAY_SIMPLE,
    Strategy.TWO_RELAY_SMALLER_QUEUE,
    Strategy.TWO_RELAY_CLUSTERED,
]


def _figure_rows(
    figure_id: str,
    seed: int,
    full: bool,
    slots: Optional[int] = None,
    reps: Optional[int] = None,
) -> list[list[str]]:
    n_grid = list(range(2, 15, 2))
    coll_slots = slots or 200_000
    mpr_slots = slots or 100_000
    reps = reps or 3
    rows: list[list[str]] = []
    if figure_id in ("SimpleBounds", "ClusterBounds"):
        strategy = (
            Strategy.TWO_RELAY_SIMPLE if figure_id == "SimpleBounds" else Strategy.TWO_RELAY_CLUSTERED
        )
        base = _collision_base(strategy, seed, slots=coll_slots, reps=reps)
        configs = [derive_config(base, n) for n in n_grid]
        for cfg, report in zip(configs, _run_points(configs)):
            rows += _report_rows(report)
            bounds = analysis.throughput_bounds(cfg.params, 1)
            for name, v in [("bound_upper", bounds.per_user_upper), ("bound_lower", bounds.per_user_lower)]:
                rows.append(
                    ["collision", strategy.value, str(cfg.params.n_users), "", name, _fmt(v), "", str(cfg.seed), "", ""]
                )
    elif figure_id in ("ThroughputCompare", "DelayCompareCollision"):
        for strategy in COLLISION_COMPARE_STRATEGIES:
            base = _collision_base(strategy, seed, slots=coll_slots, reps=reps)
            configs = [derive_config(base, n) for n in n_grid]
            for report in _run_points(configs):
                rows += _report_rows(report)
    elif figure_id.startswith("Mpr"):
        n_values = list(range(2, 51, 4)) if full else list(range(2, 31, 4))
        gammas = [0.2, 1.2, 2.5]
        for strategy in MPR_STRATEGIES:
            base = _mpr_base(strategy, seed, slots=mpr_slots, reps=reps)
            configs = [derive_config(base, n, g) for n in n_values for g in gammas]
            for report in _run_points(configs):
                rows += _report_rows(report)
    return rows


def cmd_figure(args) -> int:
    if args.figure_id not in FIGURE_IDS:
        print(
            f"error: unknown figure id {args.figure_id!r}; known: {', '.join(FIGURE_IDS)}",
            file=sys.stderr,
        )
        return EXIT_UNKNOWN_FIGURE
    try:
        os.makedirs(args.out, exist_ok=True)
        out_path = os.path.join(args.out, f"{args.figure_id}.csv")
        if args.figure_id == "StabilityRegion":
            regions = {
                f"N{n}": analysis.stability_region(default_collision_params(n), resolution=200)
                for n in (2, 4, 8)
            }
            analysis.region_to_csv(regions, out_path)
        else:
            _write_csv(
                out_path,
                _figure_rows(args.figure_id, args.seed, args.full, args.slots, args.reps),
            )
    except OSError as e:
        print(f"error: cannot write figure CSV: {e}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {out_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relaysim",
        description="Two-relay cooperative random-access network: analysis and simulation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_an = sub.add_parser("analyze", help="print closed-form rates and bounds for a scenario")
    p_an.add_argument("scenario", help="scenario JSON file")
    p_an.add_argument("--csv", help="also write the table as CSV")
    p_an.set_defaults(func=cmd_analyze)

    p_sim = sub.add_parser("simulate", help="run a scenario and write metrics CSV")
    p_sim.add_argument("scenario", help="scenario JSON file")
    p_sim.add_argument("--slots", type=int, help="override horizon (warmup becomes 10%%)")
    p_sim.add_argument("--reps", type=int, help="override replication count")
    p_sim.add_argument("--seed", type=int, help="override base seed")
    p_sim.add_argument("--out", required=True, help="output CSV path")
    p_sim.set_defaults(func=cmd_simulate)

    p_fig = sub.add_parser("figure", help="emit the CSV grid behind a stock figure")
    p_fig.add_argument("figure_id", help=f"one of: {', '.join(FIGURE_IDS)}")
    p_fig.add_argument("--out", required=True, help="output directory")
    p_fig.add_argument("--seed", type=int, default=1)
    p_fig.add_argument("--full", action="store_true", help="use the full-size grids (slow)")
    p_fig.add_argument("--slots", type=int, help="override per-point horizon")
    p_fig.add_argument("--reps", type=int, help="override per-point replication count")
    p_fig.set_defaults(func=cmd_figure)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
