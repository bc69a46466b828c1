"""Closed-form collision-channel results: arrival/service rates under the two
dominant systems, stability regions, minimum relay transmit probabilities and
throughput bounds.

Everything here is pure arithmetic on CollisionParams; the Monte Carlo engine
validates these numbers empirically.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

from .model import CollisionParams


@dataclass
class RatePair:
    lam: float  # arrival rate, packets/slot
    mu: float  # service rate, packets/slot


@dataclass
class DominantRates:
    """Rates of the non-dummy relay's queue in one dominant system."""

    lambda_0: float  # arrival probability when the queue is empty
    lambda_1: float  # arrival probability when the queue is nonempty
    p_empty: float  # stationary probability the queue is empty
    lam: float  # average arrival rate
    mu: float  # service rate
    stable: bool  # ergodicity flag: lambda_1 < mu


@dataclass
class ThroughputBounds:
    per_user_upper: float
    per_user_lower: float
    clustered: bool


@dataclass
class StabilityRegion:
    boundary_s1: list[tuple[float, float]]  # (lambda_r1, lambda_r2) polyline
    boundary_s2: list[tuple[float, float]]
    q_r1_min: float
    q_r2_min: float
    params: CollisionParams

    def in_region_1(self, lam_r1: float, lam_r2: float) -> bool:
        p = self.params
        silent = _all_silent(p)
        cap2 = p.q_relay[1] * p.p_relay_dest[1] * (1 - p.q_relay[0]) * silent
        if not (lam_r2 < cap2):
            return False
        bound1 = (
            p.q_relay[0]
            * p.p_relay_dest[0]
            * (1 - lam_r2 / (p.p_relay_dest[1] * (1 - p.q_relay[0]) * silent))
            * silent
        )
        return lam_r1 < bound1

    def in_region_2(self, lam_r1: float, lam_r2: float) -> bool:
        p = self.params
        silent = _all_silent(p)
        cap1 = p.q_relay[0] * p.p_relay_dest[0] * (1 - p.q_relay[1]) * silent
        if not (lam_r1 < cap1):
            return False
        bound2 = (
            p.q_relay[1]
            * p.p_relay_dest[1]
            * (1 - lam_r1 / (p.p_relay_dest[0] * (1 - p.q_relay[1]) * silent))
            * silent
        )
        return lam_r2 < bound2

    def contains(self, lam_r1: float, lam_r2: float) -> bool:
        return self.in_region_1(lam_r1, lam_r2) or self.in_region_2(lam_r1, lam_r2)


def _all_silent(params: CollisionParams) -> float:
    prod = 1.0
    for q in params.q_user:
        prod *= 1.0 - q
    return prod


def _others_silent(params: CollisionParams, i: int) -> float:
    prod = 1.0
    for j, q in enumerate(params.q_user):
        if j != i:
            prod *= 1.0 - q
    return prod


def _arrival_sum(params: CollisionParams, to_relay: int) -> float:
    """Sum over users of the single-slot probability that a user's packet is
    decoded by `to_relay` (after the duplicate coin flip) given every relay is
    silent: q_i * p_iRj * (1 - p_id) * [(1 - p_iRk) + p_iRk / 2] * prod(1 - q_j).
    """
    j = to_relay - 1
    k = 1 - j
    total = 0.0
    for i in range(params.n_users):
        total += (
            params.q_user[i]
            * params.p_user_relay[i][j]
            * (1.0 - params.p_user_dest[i])
            * ((1.0 - params.p_user_relay[i][k]) + 0.5 * params.p_user_relay[i][k])
            * _others_silent(params, i)
        )
    return total


def service_rates(
    params: CollisionParams, p_busy_r1: float, p_busy_r2: float
) -> tuple[float, float]:
    """Service rates of the two relay queues given each other's busy probability.

    mu_rj = q_rj * p_rjd * (1 - q_rk * Pr(Q_rk > 0)) * prod_i (1 - q_i)
    """
    if not (0.0 <= p_busy_r1 <= 1.0 and 0.0 <= p_busy_r2 <= 1.0):
        raise ValueError("busy probabilities must lie in [0,1]")
    silent = _all_silent(params)
    mu_r1 = params.q_relay[0] * params.p_relay_dest[0] * (1 - params.q_relay[1] * p_busy_r2) * silent
    mu_r2 = params.q_relay[1] * params.p_relay_dest[1] * (1 - params.q_relay[0] * p_busy_r1) * silent
    return mu_r1, mu_r2


def _dominant_rates(params: CollisionParams, dummy_relay: int) -> DominantRates:
    """Queue rates of the non-dummy relay when `dummy_relay` always contends."""
    other = 3 - dummy_relay
    q_dummy = params.q_relay[dummy_relay - 1]
    q_other = params.q_relay[other - 1]
    silent = _all_silent(params)
    mu = q_other * params.p_relay_dest[other - 1] * (1 - q_dummy) * silent
    lambda_0 = (1 - q_dummy) * _arrival_sum(params, other)
    lambda_1 = (1 - q_other) * lambda_0
    stable = lambda_1 < mu
    if stable:
        p_empty = (mu - lambda_1) / (mu - lambda_1 + lambda_0)
        lam = mu * lambda_0 / (mu - lambda_1 + lambda_0)
    else:
        # Non-ergodic queue: it is eventually never empty.
        p_empty = 0.0
        lam = lambda_1
    return DominantRates(
        lambda_0=lambda_0, lambda_1=lambda_1, p_empty=p_empty, lam=lam, mu=mu, stable=stable
    )


def dominant_rates_s1(params: CollisionParams) -> DominantRates:
    """Relay-2 queue rates in the system where relay 1 pads with dummy packets."""
    return _dominant_rates(params, dummy_relay=1)


def dominant_rates_s2(params: CollisionParams) -> DominantRates:
    """Relay-1 queue rates in the system where relay 2 pads with dummy packets."""
    return _dominant_rates(params, dummy_relay=2)


def q_min(params: CollisionParams, relay: int) -> float:
    """Smallest transmit probability that keeps the given relay's queue stable."""
    if relay not in (1, 2):
        raise ValueError("relay must be 1 or 2")
    s = _arrival_sum(params, relay)
    return s / (s + params.p_relay_dest[relay - 1] * _all_silent(params))


def stability_region(params: CollisionParams, resolution: int = 100) -> StabilityRegion:
    """Sample the boundary polylines of the two dominant-system regions.

    The overall region is their union; membership for arbitrary rate pairs is
    exposed through the predicates on the returned object.
    """
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    silent = _all_silent(params)
    q1, q2 = params.q_relay
    p1d, p2d = params.p_relay_dest

    cap2_s1 = q2 * p2d * (1 - q1) * silent
    boundary_s1 = []
    for k in range(resolution):
        lam2 = cap2_s1 * k / (resolution - 1)
        lam1 = q1 * p1d * (1 - lam2 / (p2d * (1 - q1) * silent)) * silent
        boundary_s1.append((lam1, lam2))

    cap1_s2 = q1 * p1d * (1 - q2) * silent
    boundary_s2 = []
    for k in range(resolution):
        lam1 = cap1_s2 * k / (resolution - 1)
        lam2 = q2 * p2d * (1 - lam1 / (p1d * (1 - q2) * silent)) * silent
        boundary_s2.append((lam1, lam2))

    return StabilityRegion(
        boundary_s1=boundary_s1,
        boundary_s2=boundary_s2,
        q_r1_min=q_min(params, 1),
        q_r2_min=q_min(params, 2),
        params=params,
    )


def throughput_bounds(params: CollisionParams, user: int) -> ThroughputBounds:
    """Per-user throughput bounds for the unclustered system.

    Upper: relays never interfere with the users.  Lower: relay queues never
    empty, so both relays contend every slot.
    """
    if params.cluster_of is not None:
        return clustered_throughput_bounds(params, user)
    i = user - 1
    p_id = params.p_user_dest[i]
    p1, p2 = params.p_user_relay[i]
    upper = (
        params.q_user[i]
        * (p_id + (1 - p_id) * (p1 + p2 - p1 * p2))
        * _others_silent(params, i)
    )
    lower = upper * (1 - params.q_relay[0]) * (1 - params.q_relay[1])
    return ThroughputBounds(per_user_upper=upper, per_user_lower=lower, clustered=False)


def clustered_throughput_bounds(params: CollisionParams, user: int) -> ThroughputBounds:
    """Per-user throughput bounds for the clustered system.

    The relay term's silence product runs over the user's same-cluster peers
    only (the transmitter itself is excluded).
    """
    if params.cluster_of is None:
        raise ValueError("clustered bounds need a cluster assignment")
    i = user - 1
    k = params.cluster_of[i]
    p_id = params.p_user_dest[i]
    peers_silent = 1.0
    for j in range(params.n_users):
        if j != i and params.cluster_of[j] == k:
            peers_silent *= 1.0 - params.q_user[j]
    upper = (
        params.q_user[i] * p_id * _others_silent(params, i)
        + params.q_user[i] * (1 - p_id) * params.p_user_relay[i][k - 1] * peers_silent
    )
    lower = upper * (1 - params.q_relay[0]) * (1 - params.q_relay[1])
    return ThroughputBounds(per_user_upper=upper, per_user_lower=lower, clustered=True)


def no_relay_throughput(params: CollisionParams, user: int) -> float:
    """Exact per-user throughput when no relay exists (direct path only)."""
    i = user - 1
    return params.q_user[i] * params.p_user_dest[i] * _others_silent(params, i)


def region_to_csv(regions: dict[str, StabilityRegion], path: str) -> None:
    """Write boundary polylines as tidy CSV: lambda_r1, lambda_r2, region_id.

    `regions` maps a label (e.g. "N2") to a sampled region; each polyline in
    the file is tagged label + "_s1" or "_s2".
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lambda_r1", "lambda_r2", "region_id"])
        for label, region in regions.items():
            for lam1, lam2 in region.boundary_s1:
                writer.writerow([f"{lam1:.12g}", f"{lam2:.12g}", f"{label}_s1"])
            for lam1, lam2 in region.boundary_s2:
                writer.writerow([f"{lam1:.12g}", f"{lam2:.12g}", f"{label}_s2"])
