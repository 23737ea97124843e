"""Per-node route discovery: neighbor tables, PRP forwarding and blind flooding.

PRP (probabilistic routing) sends each route request to only n/K of a
node's neighbors, picking the farthest ones. The rebroadcast carries the
list of chosen forwarders; every other receiver marks itself blocked for
that request. Blind flooding rebroadcasts on first reception.
"""

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .kernels import BLOCKED, FORWARDED, REPLIED, UNSEEN
from .radio import BROADCAST, Frame, distances_from_rssi

PRP = "PRP"
FLOOD = "Flood"


@dataclass(frozen=True)
class NeighborEntry:
    neighbor: int
    distance_m: float
    last_heard: float


class NeighborhoodVector:
    """One node's neighbor list, farthest first, at most one entry per id.

    Equal distances order by ascending id.
    """

    def __init__(self, entries=()):
        self._entries: dict[int, NeighborEntry] = {}
        self._order: list[NeighborEntry] = []
        for e in entries:
            self._entries[e.neighbor] = e
        self._resort()

    def _resort(self):
        self._order = sorted(self._entries.values(), key=lambda e: (-e.distance_m, e.neighbor))

    def update(self, neighbor: int, distance_m: float, now: float) -> None:
        if distance_m < 0:
            raise ValueError(f"distance must be non-negative, got {distance_m!r}")
        self._entries[neighbor] = NeighborEntry(neighbor, distance_m, now)
        self._resort()

    def expire(self, now: float, max_age: float) -> None:
        """Drop entries not heard for more than ``max_age`` seconds."""
        stale = [v for v, e in self._entries.items() if now - e.last_heard > max_age]
        for v in stale:
            del self._entries[v]
        if stale:
            self._resort()

    @property
    def ids(self) -> list[int]:
        return [e.neighbor for e in self._order]

    def __iter__(self):
        return iter(self._order)

    def __len__(self):
        return len(self._order)

    def __contains__(self, node):
        return node in self._entries

    def __getitem__(self, i):
        return self._order[i]

    def __repr__(self):
        inner = ", ".join(f"({e.neighbor}, {e.distance_m:g})" for e in self._order)
        return f"NeighborhoodVector([{inner}])"


class NeighborTable:
    """Every node's neighborhood vector, stored densely.

    Row ``i`` is node i's view: when it last heard each other node and the
    distance it estimated from that HELLO's RSSI.
    """

    def __init__(self, node_count: int, config):
        self.config = config
        self.max_age = 2.0 * config.hello_period_s
        self.heard_at = np.full((node_count, node_count), -np.inf)
        self.dist_m = np.zeros((node_count, node_count))
        self.ever = np.zeros((node_count, node_count), dtype=bool)

    def record_hellos(self, receivers, senders, rssi_dbm, now) -> np.ndarray:
        """Apply a batch of HELLO receptions; return receivers owed a reply HELLO.

        A receiver owes a reply when at least one of its senders was never
        heard before.
        """
        receivers = np.asarray(receivers)
        senders = np.asarray(senders)
        if np.any(np.asarray(rssi_dbm) > self.config.tx_power_dbm):
            raise ValueError("received power above transmit power")
        cfg = self.config
        d_m = 1000.0 * distances_from_rssi(cfg.tx_power_dbm, rssi_dbm, cfg.frequency_mhz)
        self.heard_at[receivers, senders] = now
        self.dist_m[receivers, senders] = d_m
        first = ~self.ever[receivers, senders]
        self.ever[receivers, senders] = True
        return np.unique(receivers[first])

    def knows(self, node: int, other: int, now: float) -> bool:
        return now - self.heard_at[node, other] <= self.max_age

    def ranked(self, node: int, now: float) -> np.ndarray:
        """Live neighbor ids of ``node``, farthest first."""
        return kernels.neighbor_order(self.heard_at[node], self.dist_m[node], now,
                                      self.max_age, node)

    def vector(self, node: int, now: float) -> NeighborhoodVector:
        ids = self.ranked(node, now).tolist()
        return NeighborhoodVector(
            NeighborEntry(v, float(self.dist_m[node, v]), float(self.heard_at[node, v]))
            for v in ids
        )


def on_hello(table: NeighborTable, receiver: int, sender: int, rx_power_dbm: float,
             now: float) -> NeighborhoodVector:
    """Process one HELLO at ``receiver``; return its refreshed vector."""
    table.record_hellos(np.array([receiver]), np.array([sender]),
                        np.array([rx_power_dbm], dtype=float), now)
    return table.vector(receiver, now)


def choose_k(policy, rng) -> int:
    if policy.kind == "fixed":
        return policy.lo
    return int(rng.integers(policy.lo, policy.hi + 1))


def select_forwarders(nv, k: int, exclude=()) -> tuple[tuple[int, ...], bool]:
    """Pick the ceil(m/K) farthest of the m eligible neighbors.

    ``nv`` is a NeighborhoodVector or a sequence of ids already sorted
    farthest first. When m < K only the single farthest neighbor is chosen,
    and the unblock flag is set so it forwards even if some other node has
    already blocked it.
    """
    ids = nv.ids if isinstance(nv, NeighborhoodVector) else nv
    eligible = [v for v in ids if v not in exclude]
    m = len(eligible)
    if m == 0:
        return (), False
    if m < k:
        return (eligible[0],), True
    return tuple(eligible[: -(-m // k)]), False


@dataclass(slots=True, eq=False)
class RreqPacket:
    frame_type = "RREQ"
    origin: int
    target: int
    seq: int
    path: tuple[int, ...]
    forwarders: tuple[int, ...] | None  # None: blind flood, everyone may forward
    unblock: bool = False
    mask: bytearray | None = field(default=None, repr=False)


@dataclass(slots=True, eq=False)
class RrepPacket:
    frame_type = "RREP"
    origin: int
    target: int
    seq: int
    path: tuple[int, ...]


class DiscoveryState:
    """Every node's view of one (origin, seq) route request, plus its bookkeeping."""

    def __init__(self, origin, target, seq, start, node_count):
        self.origin = origin
        self.target = target
        self.seq = seq
        self.start = start
        self.end = None
        self.status = bytearray(node_count)
        self.received = bytearray(node_count)
        self.transmitted: list[int] = []
        self.k_used: dict[int, int] = {}
        self.finished = False
        self.succeeded = False
        self.path: tuple[int, ...] | None = None
        self.oracle_hops: int | None = None
        self.dead_ends = 0

    def node_status(self, node):
        return self.status[node]


class Router:
    """Protocol logic shared by every node of one run.

    Methods return the frames to transmit; the caller owns the channel.
    """

    def __init__(self, protocol: str, config, table: NeighborTable, k_rng,
                 target_handoff: bool = True):
        if protocol not in (PRP, FLOOD):
            raise ValueError(f"unknown protocol {protocol!r}")
        self.protocol = protocol
        self.config = config
        self.table = table
        self.k_rng = k_rng
        self.node_count = config.node_count
        # PRP: a forwarder that knows the target unicasts to it instead of broadcasting
        self.target_handoff = target_handoff
        self.diagnostics = {"malformed_rreq": 0, "unknown_rrep": 0, "dead_end": 0}

    def build_rreq(self, disc, path, forwarders, unblock):
        pkt = RreqPacket(disc.origin, disc.target, disc.seq, path, forwarders, unblock)
        if forwarders is not None:
            mask = bytearray(self.node_count)
            for v in forwarders:
                mask[v] = 1
            pkt.mask = mask
        return pkt

    def _broadcast_from(self, node, disc, path, now):
        """The forwarding step at ``node``; ``path`` already ends with ``node``."""
        if self.protocol == FLOOD:
            disc.transmitted.append(node)
            return [Frame(node, BROADCAST, self.build_rreq(disc, path, None, False), now)]
        k = choose_k(self.config.k_policy, self.k_rng)
        chosen, unblock = select_forwarders(self.table.ranked(node, now).tolist(), k, path)
        if not chosen:
            disc.dead_ends += 1
            self.diagnostics["dead_end"] += 1
            return []
        disc.k_used[node] = k
        disc.transmitted.append(node)
        return [Frame(node, BROADCAST, self.build_rreq(disc, path, chosen, unblock), now)]

    def start_discovery(self, disc: DiscoveryState, now: float):
        """Returns (outcome, frames); outcome is "direct", "isolated" or "sent"."""
        src, dst = disc.origin, disc.target
        if src == dst:
            raise ValueError("source and target must differ")
        if self.table.knows(src, dst, now):
            return "direct", []
        if len(self.table.ranked(src, now)) == 0:
            return "isolated", []
        disc.status[src] = FORWARDED
        disc.received[src] = 1
        frames = self._broadcast_from(src, disc, (src,), now)
        return ("sent", frames) if frames else ("isolated", [])

    def on_rreq(self, receivers: np.ndarray, rreq: RreqPacket, disc: DiscoveryState, now: float):
        """Deliver one RREQ transmission to all its receivers at once."""
        path = rreq.path
        if len(set(path)) != len(path):
            self.diagnostics["malformed_rreq"] += 1
            return []
        handlers, target_hit = kernels.rreq_fanout(
            receivers, rreq.target, disc.status, disc.received, rreq.mask, rreq.unblock)
        frames = []
        if target_hit:
            rrep = RrepPacket(rreq.origin, rreq.target, rreq.seq, path + (rreq.target,))
            frames.append(Frame(rreq.target, path[-1], rrep, now))
        table = self.table
        for u in handlers:
            new_path = path + (u,)
            handoff = self.protocol == PRP and self.target_handoff
            if handoff and table.knows(u, rreq.target, now):
                # target is a known neighbor: hand the request straight to it
                disc.transmitted.append(u)
                pkt = self.build_rreq(disc, new_path, (rreq.target,), False)
                frames.append(Frame(u, rreq.target, pkt, now))
            else:
                frames.extend(self._broadcast_from(u, disc, new_path, now))
        return frames

    def prp_on_rreq(self, node, rreq, disc, now):
        if self.protocol != PRP:
            raise RuntimeError("router is not running PRP")
        return self.on_rreq(np.array([node], dtype=np.int32), rreq, disc, now)

    def flood_on_rreq(self, node, rreq, disc, now):
        if self.protocol != FLOOD:
            raise RuntimeError("router is not running blind flooding")
        return self.on_rreq(np.array([node], dtype=np.int32), rreq, disc, now)

    def on_rrep(self, node: int, rrep: RrepPacket, disc: DiscoveryState | None, now: float):
        """RREP reception at ``node``: relay one hop toward the origin, or finish."""
        if disc is None:
            self.diagnostics["unknown_rrep"] += 1
            return []
        if node != rrep.origin:
            hop = rrep.path.index(node)
            return [Frame(node, rrep.path[hop - 1], rrep, now)]
        if not disc.finished:
            disc.finished = True
            disc.succeeded = True
            disc.end = now
            disc.path = rrep.path
        return []


__all__ = [
    "BLOCKED", "FORWARDED", "REPLIED", "UNSEEN", "PRP", "FLOOD",
    "NeighborEntry", "NeighborhoodVector", "NeighborTable", "on_hello", "choose_k",
    "select_forwarders", "RreqPacket", "RrepPacket", "DiscoveryState", "Router",
]
