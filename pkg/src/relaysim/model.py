"""Domain types: nodes, channel parameters, strategies and scenario configs.

All probabilities are plain decimals in [0, 1]; distances are in meters and
powers in watts.  Node keys used in parameter dictionaries and JSON files are
"u1".."uN" for users, "r1"/"r2" for the relays and "d" for the destination.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

# Receiver noise power (W).  Not part of the published topology; chosen so the
# user-to-destination link is much weaker than the user-to-relay links at the
# default geometry.  Override per scenario if needed.
DEFAULT_NOISE_W = 1e-11

# Mean of the exponential fading coefficient on every link.
DEFAULT_FADING = 1.0

USER_DISTANCE_DEST = 100.0
USER_DISTANCE_RELAY = 59.0
USER_DISTANCE_CROSS_RELAY = 88.0
RELAY_DISTANCE_DEST = 59.0
RELAY_DISTANCE_RELAY = 60.0
PATHLOSS_USER_DEST = 4.0
PATHLOSS_USER_RELAY = 2.0
PATHLOSS_RELAY_DEST = 2.0
PATHLOSS_RELAY_RELAY = 4.0
PATHLOSS_CROSS_RELAY = 4.0
USER_TX_POWER_W = 1e-3
RELAY_TX_POWER_W = 5e-3


class Strategy(str, Enum):
    NO_RELAY = "no_relay"
    ONE_RELAY = "one_relay"
    TWO_RELAY_SIMPLE = "two_relay_simple"
    TWO_RELAY_CLUSTERED = "two_relay_clustered"
    TWO_RELAY_SMALLER_QUEUE = "two_relay_smaller_queue"
    DOMINANT_S1 = "dominant_s1"
    DOMINANT_S2 = "dominant_s2"


#: strategies only meaningful on the SINR channel
MPR_ONLY = {Strategy.TWO_RELAY_SMALLER_QUEUE}
#: analysis-validation modes, defined only on the collision channel
COLLISION_ONLY = {Strategy.DOMINANT_S1, Strategy.DOMINANT_S2}


@dataclass(frozen=True)
class NodeId:
    kind: str  # "user" | "relay" | "dest"
    index: int = 0  # 1-based for users/relays, unused for the destination

    def key(self) -> str:
        if self.kind == "user":
            return f"u{self.index}"
        if self.kind == "relay":
            return f"r{self.index}"
        return "d"

    @staticmethod
    def parse(key: str) -> "NodeId":
        if key == "d":
            return NodeId("dest")
        if key.startswith("u"):
            return NodeId("user", int(key[1:]))
        if key.startswith("r"):
            return NodeId("relay", int(key[1:]))
        raise ValueError(f"bad node key: {key!r}")


def user(i: int) -> NodeId:
    return NodeId("user", i)


def relay(j: int) -> NodeId:
    return NodeId("relay", j)


DEST = NodeId("dest")


@dataclass
class Packet:
    id: int
    source: NodeId
    created_slot: int
    first_tx_slot: Optional[int] = None


@dataclass
class CollisionParams:
    n_users: int
    q_user: list[float]
    q_relay: list[float]  # [q_r1, q_r2]
    p_user_dest: list[float]
    p_user_relay: list[list[float]]  # p_user_relay[i][j], j in {0, 1}
    p_relay_dest: list[float]
    cluster_of: Optional[list[int]] = None  # values in {1, 2}

    def to_dict(self) -> dict:
        d = {
            "n_users": self.n_users,
            "q_user": self.q_user,
            "q_relay": self.q_relay,
            "p_user_dest": self.p_user_dest,
            "p_user_relay": self.p_user_relay,
            "p_relay_dest": self.p_relay_dest,
        }
        if self.cluster_of is not None:
            d["cluster_of"] = self.cluster_of
        return d

    @staticmethod
    def from_dict(d: dict) -> "CollisionParams":
        return CollisionParams(
            n_users=d["n_users"],
            q_user=list(d["q_user"]),
            q_relay=list(d["q_relay"]),
            p_user_dest=list(d["p_user_dest"]),
            p_user_relay=[list(row) for row in d["p_user_relay"]],
            p_relay_dest=list(d["p_relay_dest"]),
            cluster_of=list(d["cluster_of"]) if d.get("cluster_of") is not None else None,
        )


@dataclass
class MprParams:
    n_users: int
    q_user: list[float]
    q_relay: list[float]
    distance: dict[str, dict[str, float]]  # distance[tx_key][rx_key], meters
    pathloss: dict[str, dict[str, float]]
    tx_power: dict[str, float]  # watts, keyed by transmitter
    noise: dict[str, float]  # watts, keyed by receiver ("r1", "r2", "d")
    sinr_threshold: dict[str, float]  # keyed by receiver
    fading: dict[str, dict[str, float]]  # mean of exponential fading per link
    cluster_of: Optional[list[int]] = None

    def to_dict(self) -> dict:
        d = {
            "n_users": self.n_users,
            "q_user": self.q_user,
            "q_relay": self.q_relay,
            "distance": self.distance,
            "pathloss": self.pathloss,
            "tx_power": self.tx_power,
            "noise": self.noise,
            "sinr_threshold": self.sinr_threshold,
            "fading": self.fading,
        }
        if self.cluster_of is not None:
            d["cluster_of"] = self.cluster_of
        return d

    @staticmethod
    def from_dict(d: dict) -> "MprParams":
        return MprParams(
            n_users=d["n_users"],
            q_user=list(d["q_user"]),
            q_relay=list(d["q_relay"]),
            distance={t: dict(r) for t, r in d["distance"].items()},
            pathloss={t: dict(r) for t, r in d["pathloss"].items()},
            tx_power=dict(d["tx_power"]),
            noise=dict(d["noise"]),
            sinr_threshold=dict(d["sinr_threshold"]),
            fading={t: dict(r) for t, r in d["fading"].items()},
            cluster_of=list(d["cluster_of"]) if d.get("cluster_of") is not None else None,
        )


@dataclass
class ScenarioConfig:
    channel: str  # "collision" | "mpr"
    params: "CollisionParams | MprParams"
    strategy: Strategy
    horizon_slots: int = 1_000_000
    warmup_slots: int = 100_000
    seed: int = 1
    replications: int = 10

    def to_dict(self) -> dict:
        return {
            "channel": self.channel,
            "params": self.params.to_dict(),
            "strategy": self.strategy.value,
            "horizon_slots": self.horizon_slots,
            "warmup_slots": self.warmup_slots,
            "seed": self.seed,
            "replications": self.replications,
        }

    @staticmethod
    def from_dict(d: dict) -> "ScenarioConfig":
        channel = d["channel"]
        if channel == "collision":
            params = CollisionParams.from_dict(d["params"])
        elif channel == "mpr":
            params = MprParams.from_dict(d["params"])
        else:
            raise ValueError(f"unknown channel: {channel!r}")
        return ScenarioConfig(
            channel=channel,
            params=params,
            strategy=Strategy(d["strategy"]),
            horizon_slots=d["horizon_slots"],
            warmup_slots=d["warmup_slots"],
            seed=d["seed"],
            replications=d["replications"],
        )

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @staticmethod
    def from_json(text: str) -> "ScenarioConfig":
        return ScenarioConfig.from_dict(json.loads(text))


@dataclass
class ValidationResult:
    violations: list[tuple[str, str]] = field(default_factory=list)  # (field path, message)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, path: str, message: str) -> None:
        self.violations.append((path, message))

    def __str__(self) -> str:
        if self.ok:
            return "OK"
        return "; ".join(f"{p}: {m}" for p, m in self.violations)


def _check_prob(res: ValidationResult, path: str, value: float) -> None:
    if not (0.0 <= value <= 1.0):
        res.add(path, "probability out of [0,1]")


def _validate_collision(res: ValidationResult, p: CollisionParams) -> None:
    n = p.n_users
    if n < 1:
        res.add("params.n_users", "must be >= 1")
        return
    for name, arr, length in [
        ("q_user", p.q_user, n),
        ("q_relay", p.q_relay, 2),
        ("p_user_dest", p.p_user_dest, n),
        ("p_relay_dest", p.p_relay_dest, 2),
    ]:
        if len(arr) != length:
            res.add(f"params.{name}", f"expected {length} entries, got {len(arr)}")
            continue
        for k, v in enumerate(arr):
            _check_prob(res, f"params.{name}[{k}]", v)
    if len(p.p_user_relay) != n:
        res.add("params.p_user_relay", f"expected {n} rows, got {len(p.p_user_relay)}")
    else:
        for i, row in enumerate(p.p_user_relay):
            if len(row) != 2:
                res.add(f"params.p_user_relay[{i}]", "expected 2 entries")
                continue
            for j, v in enumerate(row):
                _check_prob(res, f"params.p_user_relay[{i}][{j}]", v)
    _validate_clusters(res, p.cluster_of, n)


def _validate_clusters(res: ValidationResult, cluster_of: Optional[list[int]], n: int) -> None:
    if cluster_of is None:
        return
    if len(cluster_of) != n:
        res.add("params.cluster_of", f"expected {n} entries, got {len(cluster_of)}")
        return
    if any(c not in (1, 2) for c in cluster_of):
        res.add("params.cluster_of", "cluster index must be 1 or 2")
        return
    if cluster_of.count(1) == 0 or cluster_of.count(2) == 0:
        res.add("params.cluster_of", "each cluster must be nonempty")


def _validate_mpr(res: ValidationResult, p: MprParams) -> None:
    n = p.n_users
    if n < 1:
        res.add("params.n_users", "must be >= 1")
        return
    if len(p.q_user) != n:
        res.add("params.q_user", f"expected {n} entries, got {len(p.q_user)}")
    else:
        for k, v in enumerate(p.q_user):
            _check_prob(res, f"params.q_user[{k}]", v)
    if len(p.q_relay) != 2:
        res.add("params.q_relay", "expected 2 entries")
    else:
        for k, v in enumerate(p.q_relay):
            _check_prob(res, f"params.q_relay[{k}]", v)

    tx_keys = [f"u{i}" for i in range(1, n + 1)] + ["r1", "r2"]
    rx_keys = ["r1", "r2", "d"]
    for t in tx_keys:
        if t not in p.tx_power:
            res.add(f"params.tx_power.{t}", "missing")
        elif p.tx_power[t] <= 0:
            res.add(f"params.tx_power.{t}", "power must be > 0")
        for r in rx_keys:
            if r == t:
                continue
            d = p.distance.get(t, {}).get(r)
            if d is None:
                res.add(f"params.distance.{t}.{r}", "missing")
            elif d <= 0:
                res.add(f"params.distance.{t}.{r}", "distance must be > 0")
            a = p.pathloss.get(t, {}).get(r)
            if a is None:
                res.add(f"params.pathloss.{t}.{r}", "missing")
            elif not (2.0 <= a <= 4.0):
                res.add(f"params.pathloss.{t}.{r}", "pathloss exponent out of [2,4]")
            v = p.fading.get(t, {}).get(r)
            if v is None:
                res.add(f"params.fading.{t}.{r}", "missing")
            elif v <= 0:
                res.add(f"params.fading.{t}.{r}", "fading parameter must be > 0")
    for r in rx_keys:
        if p.noise.get(r) is None:
            res.add(f"params.noise.{r}", "missing")
        elif p.noise[r] <= 0:
            res.add(f"params.noise.{r}", "noise power must be > 0")
        if p.sinr_threshold.get(r) is None:
            res.add(f"params.sinr_threshold.{r}", "missing")
        elif p.sinr_threshold[r] <= 0:
            res.add(f"params.sinr_threshold.{r}", "SINR threshold must be > 0")
    _validate_clusters(res, p.cluster_of, n)


def validate(config: ScenarioConfig) -> ValidationResult:
    """Check every structural invariant of a scenario; returns all violations."""
    res = ValidationResult()
    if config.channel not in ("collision", "mpr"):
        res.add("channel", f"unknown channel {config.channel!r}")
        return res
    if config.channel == "collision":
        if not isinstance(config.params, CollisionParams):
            res.add("params", "collision channel requires CollisionParams")
            return res
        _validate_collision(res, config.params)
    else:
        if not isinstance(config.params, MprParams):
            res.add("params", "mpr channel requires MprParams")
            return res
        _validate_mpr(res, config.params)

    if config.strategy in MPR_ONLY and config.channel != "mpr":
        res.add("strategy", "strategy/channel mismatch")
    if config.strategy in COLLISION_ONLY and config.channel != "collision":
        res.add("strategy", "strategy/channel mismatch")
    if config.strategy == Strategy.TWO_RELAY_CLUSTERED and config.params.cluster_of is None:
        res.add("params.cluster_of", "clustered strategy requires cluster assignment")

    if config.horizon_slots < 1:
        res.add("horizon_slots", "must be >= 1")
    if not (0 <= config.warmup_slots < config.horizon_slots):
        res.add("warmup_slots", "must satisfy 0 <= warmup_slots < horizon_slots")
    if config.replications < 1:
        res.add("replications", "must be >= 1")
    return res


def half_clusters(n_users: int) -> list[int]:
    """Equal split: first half serves relay 1, second half relay 2."""
    if n_users % 2 != 0:
        raise ValueError("clustered mode needs an even number of users")
    half = n_users // 2
    return [1] * half + [2] * half


def default_collision_params(
    n_users: int,
    clustered: bool = False,
    q_user: float = 0.25,
    q_relay: float = 0.85,
    p_user_relay: float = 0.9,
    p_relay_dest: float = 0.9,
    p_user_dest: float = 0.25,
) -> CollisionParams:
    """Homogeneous collision-channel parameter set used by the stock scenarios."""
    return CollisionParams(
        n_users=n_users,
        q_user=[q_user] * n_users,
        q_relay=[q_relay, q_relay],
        p_user_dest=[p_user_dest] * n_users,
        p_user_relay=[[p_user_relay, p_user_relay] for _ in range(n_users)],
        p_relay_dest=[p_relay_dest, p_relay_dest],
        cluster_of=half_clusters(n_users) if clustered else None,
    )


def default_mpr_topology(
    n_users: int,
    clustered: bool = False,
    gamma: float = 1.2,
    q_user: float = 0.25,
    q_relay: float = 0.85,
    noise: float = DEFAULT_NOISE_W,
) -> MprParams:
    """Stock SINR-channel topology: collocated users, two relays, one destination.

    In clustered mode the link from a user to the non-serving relay gets the
    longer published distance (1.5x the serving distance, rounded to 88 m) and
    the steeper exponent, so cross-cluster reception is suppressed by geometry
    rather than masked out.
    """
    if n_users < 1:
        raise ValueError("n_users must be >= 1")
    if clustered and n_users % 2 != 0:
        raise ValueError("clustered mode needs an even number of users")
    cluster_of = half_clusters(n_users) if clustered else None

    distance: dict[str, dict[str, float]] = {}
    pathloss: dict[str, dict[str, float]] = {}
    fading: dict[str, dict[str, float]] = {}
    tx_power: dict[str, float] = {}

    for i in range(1, n_users + 1):
        uk = f"u{i}"
        tx_power[uk] = USER_TX_POWER_W
        dist = {"d": USER_DISTANCE_DEST}
        loss = {"d": PATHLOSS_USER_DEST}
        for j in (1, 2):
            rk = f"r{j}"
            if cluster_of is not None and cluster_of[i - 1] != j:
                dist[rk] = USER_DISTANCE_CROSS_RELAY
                loss[rk] = PATHLOSS_CROSS_RELAY
            else:
                dist[rk] = USER_DISTANCE_RELAY
                loss[rk] = PATHLOSS_USER_RELAY
        distance[uk] = dist
        pathloss[uk] = loss
        fading[uk] = {k: DEFAULT_FADING for k in dist}

    for j in (1, 2):
        rk = f"r{j}"
        other = f"r{3 - j}"
        tx_power[rk] = RELAY_TX_POWER_W
        distance[rk] = {"d": RELAY_DISTANCE_DEST, other: RELAY_DISTANCE_RELAY}
        pathloss[rk] = {"d": PATHLOSS_RELAY_DEST, other: PATHLOSS_RELAY_RELAY}
        fading[rk] = {"d": DEFAULT_FADING, other: DEFAULT_FADING}

    receivers = ["r1", "r2", "d"]
    return MprParams(
        n_users=n_users,
        q_user=[q_user] * n_users,
        q_relay=[q_relay, q_relay],
        distance=distance,
        pathloss=pathloss,
        tx_power=tx_power,
        noise={r: noise for r in receivers},
        sinr_threshold={r: gamma for r in receivers},
        fading=fading,
        cluster_of=cluster_of,
    )
