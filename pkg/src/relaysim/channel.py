"""Per-slot reception resolution for the collision and SINR channel models.

Both resolvers are stateless: all randomness comes from the injected random
source, so one source per replication keeps runs reproducible and
parallelizable.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .model import CollisionParams, MprParams, NodeId, Packet, Strategy


@dataclass
class TransmissionSet:
    entries: list[tuple[NodeId, Packet]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class SlotOutcome:
    delivered_to_dest: set[int] = field(default_factory=set)
    decoded_by_relay: tuple[set[int], set[int]] = field(default_factory=lambda: (set(), set()))
    collided: bool = False
    # Raw per-receiver decode sets before ACK suppression, keyed "r1"/"r2"/"d".
    # Diagnostic only; the simulator consumes the suppressed sets above.
    raw_decoded: dict[str, set[int]] = field(default_factory=dict)


def collision_link_success(
    gamma: float, noise: float, distance: float, pathloss: float, tx_power: float
) -> float:
    """Success probability of an isolated transmission over a fading link.

    exp(-gamma * noise * distance**pathloss / tx_power); monotone decreasing
    in gamma, noise and distance.
    """
    if tx_power <= 0:
        raise ValueError("tx_power must be > 0")
    if distance <= 0:
        raise ValueError("distance must be > 0")
    if noise < 0 or gamma < 0:
        raise ValueError("gamma and noise must be >= 0")
    return math.exp(-gamma * noise * distance**pathloss / tx_power)


def _link_gain(params: MprParams, tx_key: str, rx_key: str) -> float:
    return params.tx_power[tx_key] * params.distance[tx_key][rx_key] ** (
        -params.pathloss[tx_key][rx_key]
    )


def mpr_success_closed_form(
    tx: NodeId, rx: NodeId, active: set[NodeId], params: MprParams
) -> float:
    """Average decode probability of `tx` at `rx` given the active set.

    Fading on each link is exponential with mean v(i,j); averaging the SINR
    threshold event over all fading draws gives
        exp(-gamma * noise / (v_i * g_i)) * prod_k 1 / (1 + gamma * v_k g_k / (v_i g_i))
    with g the deterministic power gain of each link and k ranging over the
    other active transmitters.
    """
    if tx not in active:
        raise ValueError("tx must be in the active set")
    if rx in active:
        raise ValueError("rx cannot transmit and receive in the same slot")
    rxk = rx.key()
    txk = tx.key()
    gamma = params.sinr_threshold[rxk]
    noise = params.noise[rxk]
    vg_signal = params.fading[txk][rxk] * _link_gain(params, txk, rxk)
    p = math.exp(-gamma * noise / vg_signal)
    for k in active:
        if k == tx:
            continue
        kk = k.key()
        vg_interf = params.fading[kk][rxk] * _link_gain(params, kk, rxk)
        p /= 1.0 + gamma * vg_interf / vg_signal
    return p


def _relay_listening(strategy: Strategy, j: int, transmitting: bool) -> bool:
    if transmitting:
        return False
    if strategy == Strategy.NO_RELAY:
        return False
    if strategy == Strategy.ONE_RELAY and j == 2:
        return False
    return True


def resolve_slot_collision(
    tx_set: TransmissionSet,
    params: CollisionParams,
    strategy: Strategy,
    rng: random.Random,
) -> SlotOutcome:
    """Resolve one collision-channel slot; returns raw decode sets.

    The duplicate coin flip and queue-aware storage rules live in the
    simulator; this reports which receivers decoded which packet.
    """
    out = SlotOutcome()
    n_tx = len(tx_set.entries)
    if n_tx == 0:
        return out
    clustered = strategy == Strategy.TWO_RELAY_CLUSTERED

    relay_tx = [False, False]
    for node, _ in tx_set.entries:
        if node.kind == "relay":
            relay_tx[node.index - 1] = True

    if not clustered:
        if n_tx >= 2:
            out.collided = True
            return out
        node, pkt = tx_set.entries[0]
        if node.kind == "user":
            i = node.index - 1
            if rng.random() < params.p_user_dest[i]:
                out.delivered_to_dest.add(pkt.id)
                return out  # instantaneous ACK: relays discard the copy
            for j in (1, 2):
                if _relay_listening(strategy, j, relay_tx[j - 1]):
                    if rng.random() < params.p_user_relay[i][j - 1]:
                        out.decoded_by_relay[j - 1].add(pkt.id)
        else:
            j = node.index
            if rng.random() < params.p_relay_dest[j - 1]:
                out.delivered_to_dest.add(pkt.id)
        return out

    # Clustered rules: users collide at the destination with any other
    # transmitter; a user's packet can reach only its own cluster's relay and
    # only when no same-cluster user transmits alongside it.  A relay's
    # transmission is immune to user activity but collides with the other
    # relay.  Relay storage is gated on the user-destination link outage draw,
    # so the destination-failure factor applies even in collided slots.
    out.collided = n_tx >= 2
    cluster_of = params.cluster_of
    assert cluster_of is not None
    user_entries = [(n, p) for n, p in tx_set.entries if n.kind == "user"]
    cluster_tx_count = {1: 0, 2: 0}
    for node, _ in user_entries:
        cluster_tx_count[cluster_of[node.index - 1]] += 1

    for node, pkt in user_entries:
        i = node.index - 1
        k = cluster_of[i]
        dest_link_ok = rng.random() < params.p_user_dest[i]
        if dest_link_ok:
            if n_tx == 1:
                out.delivered_to_dest.add(pkt.id)
            continue  # link ok but collided, or delivered: never stored
        if cluster_tx_count[k] == 1 and _relay_listening(strategy, k, relay_tx[k - 1]):
            if rng.random() < params.p_user_relay[i][k - 1]:
                out.decoded_by_relay[k - 1].add(pkt.id)

    if relay_tx[0] != relay_tx[1]:  # both transmitting -> relay collision
        for node, pkt in tx_set.entries:
            if node.kind == "relay":
                if rng.random() < params.p_relay_dest[node.index - 1]:
                    out.delivered_to_dest.add(pkt.id)
    return out


def resolve_slot_mpr(
    tx_set: TransmissionSet,
    params: MprParams,
    rng: random.Random,
    strategy: Strategy = Strategy.TWO_RELAY_SIMPLE,
) -> SlotOutcome:
    """Resolve one SINR-channel slot.

    Every receiver that is not transmitting (the destination, plus each silent
    relay in play) draws independent exponential fading per transmitter and
    decodes a packet iff its SINR clears the receiver's threshold.  User
    packets decoded at the destination are removed from the relay decode sets
    (instantaneous ACK).
    """
    out = SlotOutcome()
    if not tx_set.entries:
        return out

    relay_tx = [False, False]
    for node, _ in tx_set.entries:
        if node.kind == "relay":
            relay_tx[node.index - 1] = True

    receivers = ["d"]
    for j in (1, 2):
        if _relay_listening(strategy, j, relay_tx[j - 1]):
            receivers.append(f"r{j}")

    decoded: dict[str, set[int]] = {}
    for rxk in receivers:
        gamma = params.sinr_threshold[rxk]
        noise = params.noise[rxk]
        powers = []
        total = 0.0
        for node, pkt in tx_set.entries:
            txk = node.key()
            mean = params.fading[txk][rxk] * _link_gain(params, txk, rxk)
            p_rx = rng.expovariate(1.0 / mean)
            powers.append((pkt, p_rx))
            total += p_rx
        hits = set()
        for pkt, p_rx in powers:
            if p_rx >= gamma * (noise + total - p_rx):
                hits.add(pkt.id)
        decoded[rxk] = hits

    out.raw_decoded = decoded
    out.delivered_to_dest = set(decoded.get("d", set()))
    # Only packets transmitted by their source user are candidates for relay
    # storage: a relay overhearing the other relay's forwarding never re-stores
    # the packet, and destination-decoded packets are ACK-suppressed.
    user_tx_ids = {pkt.id for node, pkt in tx_set.entries if node.kind == "user"}
    for j in (1, 2):
        rxk = f"r{j}"
        if rxk in decoded:
            out.decoded_by_relay[j - 1].update(
                pid
                for pid in decoded[rxk]
                if pid in user_tx_ids and pid not in out.delivered_to_dest
            )
    return out
