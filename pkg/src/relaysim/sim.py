"""Slotted-time Monte Carlo engine for the two-relay random-access system.

One replication is strictly sequential and deterministic given its seed;
replications use independently derived seeds and are merged by averaging.
"""

from __future__ import annotations

import hashlib
import math
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from . import channel as ch
from .model import (
    CollisionParams,
    MprParams,
    Packet,
    ScenarioConfig,
    Strategy,
    default_collision_params,
    default_mpr_topology,
    relay,
    user,
    validate,
)

Z95 = 1.959963984540054  # two-sided 95% normal quantile

# Below this many delivered packets the delay estimate is reported as NaN
# (sample-starved cells near saturation are flagged, not guessed).
MIN_DELAY_SAMPLES = 50


@dataclass
class RelayState:
    queue: deque = field(default_factory=deque)  # FIFO of Packet
    members: set = field(default_factory=set)  # packet ids currently queued

    def push(self, pkt: Packet) -> None:
        self.queue.append(pkt)
        self.members.add(pkt.id)

    def pop_head(self) -> Packet:
        pkt = self.queue.popleft()
        self.members.discard(pkt.id)
        return pkt

    def purge(self, pkt_id: int) -> bool:
        if pkt_id not in self.members:
            return False
        self.members.discard(pkt_id)
        for idx, pkt in enumerate(self.queue):
            if pkt.id == pkt_id:
                del self.queue[idx]
                return True
        return False

    def __len__(self) -> int:
        return len(self.queue)


@dataclass
class SimTrace:
    """Per-slot records, collected only on request (memory-heavy)."""

    tx_nodes: list[tuple[str, ...]] = field(default_factory=list)
    delivered: list[frozenset] = field(default_factory=list)
    queue_r1: list[int] = field(default_factory=list)
    queue_r2: list[int] = field(default_factory=list)
    arrivals_r1: list[int] = field(default_factory=list)
    arrivals_r2: list[int] = field(default_factory=list)


@dataclass
class RepResult:
    measured_slots: int
    delivered_per_user: list[int]
    delay_sum: float
    delay_count: int
    queue_len_sum: list[float]  # slot-start queue length sums, per relay
    empty_slots: list[int]
    busy_slots: list[int]
    arrivals: list[int]
    departures: list[int]
    queue_series: list[list[int]]  # sampled slot-start queue lengths per relay
    trace: Optional[SimTrace] = None
    final_queue_ids: Optional[list[list[int]]] = None
    delivered_ids: Optional[set] = None
    stored_ids: Optional[set] = None
    source_pkt_ids: Optional[list[int]] = None


@dataclass
class MetricsReport:
    channel: str
    strategy: Strategy
    n_users: int
    gamma: Optional[float]
    seed: int
    slots: int
    reps: int
    throughput_per_user: list[float]
    aggregate_throughput: float
    mean_queue: list[float]
    mean_delay: float
    delay_samples: int
    empirical_lambda: list[float]
    empirical_mu: list[float]
    empirical_p_empty: list[float]
    stability_verdict: list[str]
    ci: dict[str, float]


@dataclass
class StabilityVerdict:
    verdict: list[str]  # per relay: "stable" | "unstable" | "inconclusive"
    slope: list[float]  # packets per slot
    slope_ci: list[float]  # 95% halfwidth across replications


def _sub_seed(seed: int, *parts) -> int:
    h = hashlib.blake2b(repr((seed,) + parts).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "big")


def _relays_in_play(strategy: Strategy) -> tuple[bool, bool]:
    if strategy == Strategy.NO_RELAY:
        return False, False
    if strategy == Strategy.ONE_RELAY:
        return True, False
    return True, True


def _run_replication(
    config: ScenarioConfig,
    seed: int,
    collect_trace: bool = False,
    sample_every: Optional[int] = None,
) -> RepResult:
    params = config.params
    strategy = config.strategy
    n = params.n_users
    horizon = config.horizon_slots
    warmup = config.warmup_slots
    is_collision = config.channel == "collision"
    rng = random.Random(seed)
    if sample_every is None:
        sample_every = max(1, horizon // 2000)

    q_user = params.q_user
    q_relay = params.q_relay
    r1_exists, r2_exists = _relays_in_play(strategy)
    relay_exists = (r1_exists, r2_exists)
    dominant = [strategy == Strategy.DOMINANT_S1, strategy == Strategy.DOMINANT_S2]
    smaller_queue = strategy == Strategy.TWO_RELAY_SMALLER_QUEUE
    coin_flip_dup = is_collision  # both-decode rule on the collision channel
    user_nodes = [user(i + 1) for i in range(n)]
    relay_nodes = [relay(1), relay(2)]

    relays = [RelayState(), RelayState()]
    next_id = 0
    src_pkts: list[Packet] = []
    for i in range(n):
        src_pkts.append(Packet(next_id, user_nodes[i], 0))
        next_id += 1

    measured = 0
    delivered_per_user = [0] * n
    delay_sum = 0.0
    delay_count = 0
    queue_len_sum = [0.0, 0.0]
    empty_slots = [0, 0]
    busy_slots = [0, 0]
    arrivals = [0, 0]
    departures = [0, 0]
    queue_series: list[list[int]] = [[], []]
    trace = SimTrace() if collect_trace else None
    delivered_ids: set = set() if collect_trace else None
    stored_ids: set = set() if collect_trace else None

    for slot in range(horizon):
        in_window = slot >= warmup
        q1_len = len(relays[0])
        q2_len = len(relays[1])
        if in_window:
            measured += 1
            queue_len_sum[0] += q1_len
            queue_len_sum[1] += q2_len
            for j, qlen in enumerate((q1_len, q2_len)):
                if qlen == 0:
                    empty_slots[j] += 1
                else:
                    busy_slots[j] += 1
        if slot % sample_every == 0:
            queue_series[0].append(q1_len)
            queue_series[1].append(q2_len)

        entries: list[tuple] = []
        for i in range(n):
            if rng.random() < q_user[i]:
                pkt = src_pkts[i]
                if pkt.first_tx_slot is None:
                    pkt.first_tx_slot = slot
                entries.append((user_nodes[i], pkt))
        relay_tx_pkt: list[Optional[Packet]] = [None, None]
        relay_tx_dummy = [False, False]
        for j in range(2):
            if not relay_exists[j]:
                continue
            nonempty = len(relays[j]) > 0
            if (nonempty or dominant[j]) and rng.random() < q_relay[j]:
                if nonempty:
                    pkt = relays[j].queue[0]
                else:
                    pkt = Packet(next_id, relay_nodes[j], slot, slot)
                    next_id += 1
                    relay_tx_dummy[j] = True
                relay_tx_pkt[j] = pkt
                entries.append((relay_nodes[j], pkt))

        if not entries:
            if trace is not None:
                trace.tx_nodes.append(())
                trace.delivered.append(frozenset())
                trace.queue_r1.append(q1_len)
                trace.queue_r2.append(q2_len)
                trace.arrivals_r1.append(0)
                trace.arrivals_r2.append(0)
            continue

        tx_set = ch.TransmissionSet(entries)
        if is_collision:
            outcome = ch.resolve_slot_collision(tx_set, params, strategy, rng)
        else:
            outcome = ch.resolve_slot_mpr(tx_set, params, rng, strategy)

        delivered = outcome.delivered_to_dest
        counted_this_slot: set = set()

        # Deliveries from direct user transmissions.
        for node, pkt in entries:
            if node.kind != "user" or pkt.id not in delivered:
                continue
            i = node.index - 1
            counted_this_slot.add(pkt.id)
            if in_window:
                delivered_per_user[i] += 1
                delay_sum += slot - pkt.first_tx_slot + 1
                delay_count += 1
            if delivered_ids is not None:
                delivered_ids.add(pkt.id)
            src_pkts[i] = Packet(next_id, user_nodes[i], slot)
            next_id += 1

        # Deliveries from relay transmissions (dummy packets never counted).
        # Decide both relays first: a duplicated packet may be delivered by
        # both in the same slot, and the ACK purge must not touch a queue
        # whose own head is still being dequeued.
        relay_delivers = [
            relay_tx_pkt[j] is not None
            and not relay_tx_dummy[j]
            and relay_tx_pkt[j].id in delivered
            for j in range(2)
        ]
        for j in range(2):
            if not relay_delivers[j]:
                continue
            pkt = relay_tx_pkt[j]
            relays[j].pop_head()
            if in_window:
                departures[j] += 1
            if pkt.id not in counted_this_slot:
                counted_this_slot.add(pkt.id)
                origin = pkt.source.index - 1
                if in_window:
                    delivered_per_user[origin] += 1
                    delay_sum += slot - pkt.first_tx_slot + 1
                    delay_count += 1
                if delivered_ids is not None:
                    delivered_ids.add(pkt.id)
        for j in range(2):
            if relay_delivers[j]:
                # Overheard ACK: the other relay drops any duplicate copy.
                relays[1 - j].purge(relay_tx_pkt[j].id)

        # Relay storage of user packets that failed to reach the destination.
        dec1, dec2 = outcome.decoded_by_relay
        if dec1 or dec2:
            pkt_by_id = {p.id: p for node, p in entries if node.kind == "user"}
            store: tuple[list, list] = ([], [])
            if smaller_queue:
                for pid in dec1 | dec2:
                    if pid in dec1 and pid in dec2:
                        if q1_len < q2_len:
                            tgt = 0
                        elif q2_len < q1_len:
                            tgt = 1
                        else:
                            tgt = 0 if rng.random() < 0.5 else 1
                    else:
                        tgt = 0 if pid in dec1 else 1
                    store[tgt].append(pid)
            elif coin_flip_dup:
                for pid in dec1 | dec2:
                    if pid in dec1 and pid in dec2:
                        tgt = 0 if rng.random() < 0.5 else 1
                    else:
                        tgt = 0 if pid in dec1 else 1
                    store[tgt].append(pid)
            else:  # MPR simple/clustered: every decoding relay keeps a copy
                store = (sorted(dec1), sorted(dec2))

            accepted: set = set()
            slot_arrivals = [0, 0]
            for j in range(2):
                cands = store[j]
                if not cands:
                    continue
                # At most one new packet enters a relay queue per slot; surplus
                # decodes are dropped and the packets retry at their sources.
                if len(cands) > 1:
                    pid = cands[rng.randrange(len(cands))]
                else:
                    pid = cands[0]
                relays[j].push(pkt_by_id[pid])
                accepted.add(pid)
                slot_arrivals[j] = 1
                if in_window:
                    arrivals[j] += 1
            arr1, arr2 = slot_arrivals
            for pid in accepted:
                pkt = pkt_by_id[pid]
                i = pkt.source.index - 1
                if src_pkts[i].id == pid:
                    src_pkts[i] = Packet(next_id, user_nodes[i], slot)
                    next_id += 1
                if stored_ids is not None:
                    stored_ids.add(pid)
        else:
            arr1 = arr2 = 0

        if trace is not None:
            trace.tx_nodes.append(tuple(node.key() for node, _ in entries))
            trace.delivered.append(frozenset(counted_this_slot))
            trace.queue_r1.append(q1_len)
            trace.queue_r2.append(q2_len)
            trace.arrivals_r1.append(arr1)
            trace.arrivals_r2.append(arr2)

    result = RepResult(
        measured_slots=measured,
        delivered_per_user=delivered_per_user,
        delay_sum=delay_sum,
        delay_count=delay_count,
        queue_len_sum=queue_len_sum,
        empty_slots=empty_slots,
        busy_slots=busy_slots,
        arrivals=arrivals,
        departures=departures,
        queue_series=queue_series,
        trace=trace,
    )
    if collect_trace:
        result.final_queue_ids = [[p.id for p in relays[j].queue] for j in range(2)]
        result.delivered_ids = delivered_ids
        result.stored_ids = stored_ids
        result.source_pkt_ids = [p.id for p in src_pkts]
    return result


def _mean_ci(values: list[float]) -> tuple[float, float]:
    k = len(values)
    mean = sum(values) / k
    if k < 2:
        return mean, float("nan")
    var = sum((v - mean) ** 2 for v in values) / (k - 1)
    return mean, Z95 * math.sqrt(var / k)


def _ols_slope(series: list[int], dx: float) -> float:
    m = len(series)
    xs = range(m)
    mean_x = (m - 1) / 2.0
    mean_y = sum(series) / m
    sxy = sum((x - mean_x) * (y - mean_y) for x, y in zip(xs, series))
    sxx = sum((x - mean_x) ** 2 for x in xs)
    return (sxy / sxx) / dx if sxx > 0 else 0.0


def _verdicts(
    reps: list[RepResult], warmup: int, horizon: int
) -> tuple[list[str], list[float], list[float]]:
    sample_every = max(1, horizon // 2000)
    skip = warmup // sample_every
    verdicts, slopes, cis = [], [], []
    for j in range(2):
        per_rep = []
        tail_ratio = []
        for r in reps:
            series = r.queue_series[j][skip:]
            if len(series) < 8:
                series = r.queue_series[j]
            per_rep.append(_ols_slope(series, sample_every))
            q3 = len(series) // 4
            head = series[: 2 * q3] or [0]
            tail = series[-q3:] or [0]
            tail_ratio.append((sum(tail) / len(tail), sum(head) / len(head)))
        slope, ci = _mean_ci(per_rep)
        slopes.append(slope)
        cis.append(ci)
        bounded = all(t <= 2.0 * h + 10.0 for t, h in tail_ratio)
        if math.isnan(ci):
            # single replication: fall back on slope magnitude + boundedness
            if bounded and abs(slope) * horizon < 10.0:
                verdicts.append("stable")
            elif slope * horizon > 50.0:
                verdicts.append("unstable")
            else:
                verdicts.append("inconclusive")
        elif slope - ci > 0:
            verdicts.append("unstable")
        elif slope - ci <= 0 <= slope + ci and bounded:
            verdicts.append("stable")
        elif slope + ci < 0:
            verdicts.append("stable")
        else:
            verdicts.append("inconclusive")
    return verdicts, slopes, cis


def run(config: ScenarioConfig) -> MetricsReport:
    """Execute all replications of a scenario and aggregate the metrics."""
    res = validate(config)
    if not res.ok:
        raise ValueError(f"invalid scenario: {res}")

    reps = [
        _run_replication(config, _sub_seed(config.seed, "rep", k))
        for k in range(config.replications)
    ]
    n = config.params.n_users
    meas = [r.measured_slots for r in reps]

    per_user = [
        sum(r.delivered_per_user[i] / m for r, m in zip(reps, meas)) / len(reps)
        for i in range(n)
    ]
    agg_vals = [sum(r.delivered_per_user) / m for r, m in zip(reps, meas)]
    aggregate, agg_ci = _mean_ci(agg_vals)
    pu_vals = [sum(r.delivered_per_user) / m / n for r, m in zip(reps, meas)]
    pu_mean, pu_ci = _mean_ci(pu_vals)

    delay_vals = [
        r.delay_sum / r.delay_count for r in reps if r.delay_count >= MIN_DELAY_SAMPLES
    ]
    delay_samples = sum(r.delay_count for r in reps)
    if delay_vals and delay_samples >= MIN_DELAY_SAMPLES:
        mean_delay, delay_ci = _mean_ci(delay_vals)
    else:
        mean_delay, delay_ci = float("nan"), float("nan")

    mean_queue, lam, mu, p_empty = [], [], [], []
    ci: dict[str, float] = {
        "throughput_per_user": pu_ci,
        "aggregate_throughput": agg_ci,
        "mean_delay": delay_ci,
    }
    for j in range(2):
        mq, mq_ci = _mean_ci([r.queue_len_sum[j] / m for r, m in zip(reps, meas)])
        lj, lj_ci = _mean_ci([r.arrivals[j] / m for r, m in zip(reps, meas)])
        mu_vals = [
            r.departures[j] / r.busy_slots[j] for r in reps if r.busy_slots[j] > 0
        ]
        muj, muj_ci = (_mean_ci(mu_vals)) if mu_vals else (float("nan"), float("nan"))
        pe, pe_ci = _mean_ci([r.empty_slots[j] / m for r, m in zip(reps, meas)])
        mean_queue.append(mq)
        lam.append(lj)
        mu.append(muj)
        p_empty.append(pe)
        ci[f"mean_queue_r{j + 1}"] = mq_ci
        ci[f"lambda_r{j + 1}"] = lj_ci
        ci[f"mu_r{j + 1}"] = muj_ci
        ci[f"p_empty_r{j + 1}"] = pe_ci

    verdicts, _, _ = _verdicts(reps, config.warmup_slots, config.horizon_slots)

    gamma = None
    if config.channel == "mpr":
        gamma = config.params.sinr_threshold["d"]
    return MetricsReport(
        channel=config.channel,
        strategy=config.strategy,
        n_users=n,
        gamma=gamma,
        seed=config.seed,
        slots=config.horizon_slots,
        reps=config.replications,
        throughput_per_user=per_user,
        aggregate_throughput=aggregate,
        mean_queue=mean_queue,
        mean_delay=mean_delay,
        delay_samples=delay_samples,
        empirical_lambda=lam,
        empirical_mu=mu,
        empirical_p_empty=p_empty,
        stability_verdict=verdicts,
        ci=ci,
    )


def run_traced(config: ScenarioConfig) -> list[RepResult]:
    """Run with full per-slot traces; intended for small horizons."""
    res = validate(config)
    if not res.ok:
        raise ValueError(f"invalid scenario: {res}")
    return [
        _run_replication(config, _sub_seed(config.seed, "rep", k), collect_trace=True)
        for k in range(config.replications)
    ]


def stability_probe(config: ScenarioConfig, horizon_factor: int = 2) -> StabilityVerdict:
    """Empirical stability test: linear trend of the relay queue series.

    Runs an extended horizon, fits a per-replication OLS slope to each relay's
    post-warmup queue-length series, and tests the cross-replication 95% CI:
    strictly positive -> unstable; containing zero with a bounded mean ->
    stable; otherwise inconclusive.
    """
    probe_cfg = ScenarioConfig(
        channel=config.channel,
        params=config.params,
        strategy=config.strategy,
        horizon_slots=config.horizon_slots * horizon_factor,
        warmup_slots=config.warmup_slots,
        seed=config.seed,
        replications=max(config.replications, 3),
    )
    res = validate(probe_cfg)
    if not res.ok:
        raise ValueError(f"invalid scenario: {res}")
    reps = [
        _run_replication(probe_cfg, _sub_seed(probe_cfg.seed, "probe", k))
        for k in range(probe_cfg.replications)
    ]
    verdicts, slopes, cis = _verdicts(reps, probe_cfg.warmup_slots, probe_cfg.horizon_slots)
    return StabilityVerdict(verdict=verdicts, slope=slopes, slope_ci=cis)


def point_seed(base_seed: int, n_users: int, gamma: Optional[float], strategy: Strategy) -> int:
    """Deterministic per-grid-point seed for sweeps."""
    return _sub_seed(base_seed, "point", n_users, gamma, strategy.value)


def derive_config(
    base: ScenarioConfig, n_users: int, gamma: Optional[float] = None
) -> ScenarioConfig:
    """Rebuild a scenario at a different network size (and SINR threshold).

    Homogeneous parameters are taken from the base scenario's first user and
    relay; clustered scenarios are re-split into equal halves.
    """
    clustered = base.strategy == Strategy.TWO_RELAY_CLUSTERED
    if base.channel == "collision":
        p = base.params
        params: CollisionParams | MprParams = default_collision_params(
            n_users,
            clustered=clustered,
            q_user=p.q_user[0],
            q_relay=p.q_relay[0],
            p_user_relay=p.p_user_relay[0][0],
            p_relay_dest=p.p_relay_dest[0],
            p_user_dest=p.p_user_dest[0],
        )
        gamma = None
    else:
        p = base.params
        params = default_mpr_topology(
            n_users,
            clustered=clustered,
            gamma=gamma if gamma is not None else p.sinr_threshold["d"],
            q_user=p.q_user[0],
            q_relay=p.q_relay[0],
            noise=p.noise["d"],
        )
    return ScenarioConfig(
        channel=base.channel,
        params=params,
        strategy=base.strategy,
        horizon_slots=base.horizon_slots,
        warmup_slots=base.warmup_slots,
        seed=point_seed(base.seed, n_users, gamma, base.strategy),
        replications=base.replications,
    )


def sweep(
    base: ScenarioConfig,
    n_values: list[int],
    gamma_values: Optional[list[float]] = None,
) -> list[MetricsReport]:
    """One report per (n_users, gamma) grid point, deterministic in base.seed."""
    gammas: list[Optional[float]] = list(gamma_values) if gamma_values else [None]
    reports = []
    for n_users in n_values:
        for gamma in gammas:
            cfg = derive_config(base, n_users, gamma)
            reports.append(run(cfg))
    return reports


