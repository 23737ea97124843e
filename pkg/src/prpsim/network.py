"""One simulation run: nodes, mobility, HELLO exchange and route discoveries."""

import math
from dataclasses import dataclass, field

import numpy as np

from . import mobility as mob
from .metrics import DiscoveryRecord, bfs_shortest_hops, connectivity_snapshot
from .protocol import DiscoveryState, NeighborTable, RreqPacket, Router
from .radio import Channel, Delivery, HelloBatch
from .sim_core import EventKind, Simulator, rng_stream


@dataclass
class RunResult:
    config: object
    records: list[DiscoveryRecord]
    diagnostics: dict = field(default_factory=dict)
    events: int = 0


def discovery_schedule(config, rng):
    """(start_time, source, target) for every discovery of the run.

    Each flow starts one discovery per simulated second, at a uniform offset
    inside that second. Within a second all endpoints are distinct.
    """
    plan = []
    last = int(math.floor(config.sim_duration_s - config.discovery_timeout_s)) - 1
    first = max(1, int(math.ceil(config.hello_period_s)))
    for second in range(first, last + 1):
        ends = rng.permutation(config.node_count)[: 2 * config.flow_count]
        offsets = rng.random(config.flow_count)
        for f in range(config.flow_count):
            plan.append((second + float(offsets[f]), int(ends[2 * f]), int(ends[2 * f + 1])))
    plan.sort()
    return plan


class Network:
    def __init__(self, config, trace=None, target_handoff: bool = True):
        self.config = config
        self.sim = Simulator(trace=trace)
        seed = config.rng_seed
        self.mob_rng = rng_stream(seed, "mobility")
        self.state = mob.initial_state(config, self.mob_rng)
        self.channel = Channel(config, self.sim, self.state.x, self.state.y,
                               loss_rng=rng_stream(seed, "loss"))
        self.table = NeighborTable(config.node_count, config)
        self.router = Router(config.protocol, config, self.table, rng_stream(seed, "k_choice"),
                             target_handoff=target_handoff)
        self.discoveries: dict[tuple[int, int], DiscoveryState] = {}
        self.order: list[DiscoveryState] = []
        self._next_seq = [0] * config.node_count
        self._snapshot = None
        self._all = np.arange(config.node_count, dtype=np.int32)

        sim = self.sim
        sim.on(EventKind.HELLO_TICK, self._on_hello_tick)
        sim.on(EventKind.PACKET_DELIVERY, self._on_delivery)
        sim.on(EventKind.MOBILITY_UPDATE, self._on_mobility)
        sim.on(EventKind.DISCOVERY_START, self._on_start)
        sim.on(EventKind.DISCOVERY_TIMEOUT, self._on_timeout)

        sim.schedule(0.0, EventKind.HELLO_TICK)
        if config.mobility.model != "static":
            sim.schedule(config.mobility.tick_s, EventKind.MOBILITY_UPDATE)
        for start, src, dst in discovery_schedule(config, rng_stream(seed, "flow_selection")):
            sim.schedule(start, EventKind.DISCOVERY_START, (src, dst))

    # -- periodic machinery ------------------------------------------------

    def _on_hello_tick(self, event):
        self.channel.hello_round(self._all, event.fire_at)
        nxt = event.fire_at + self.config.hello_period_s
        if nxt <= self.config.sim_duration_s:
            self.sim.schedule(nxt, EventKind.HELLO_TICK)

    def _on_mobility(self, event):
        self.state = mob.advance(self.state, self.config.mobility.tick_s, self.mob_rng)
        self.channel.set_positions(self.state.x, self.state.y)
        self._snapshot = None
        nxt = event.fire_at + self.config.mobility.tick_s
        if nxt <= self.config.sim_duration_s:
            self.sim.schedule(nxt, EventKind.MOBILITY_UPDATE)

    # -- packets -------------------------------------------------------------

    def _send(self, frames):
        transmit = self.channel.transmit
        for frame in frames:
            transmit(frame)

    def _on_delivery(self, event):
        now = event.fire_at
        payload = event.payload
        if isinstance(payload, HelloBatch):
            repliers = self.table.record_hellos(payload.receivers, payload.senders,
                                                payload.rssi_dbm, now)
            if len(repliers):
                self.channel.hello_round(repliers, now)
            return
        delivery: Delivery = payload
        pkt = delivery.frame.payload
        disc = self.discoveries.get((pkt.origin, pkt.seq))
        if isinstance(pkt, RreqPacket):
            if disc is None:
                self.router.diagnostics["malformed_rreq"] += 1
                return
            self._send(self.router.on_rreq(delivery.receivers, pkt, disc, now))
        else:
            node = int(delivery.receivers[0])
            self._send(self.router.on_rrep(node, pkt, disc, now))

    # -- discoveries -----------------------------------------------------------

    def _oracle_adjacency(self):
        if self._snapshot is None:
            self._snapshot = connectivity_snapshot(self.state.x, self.state.y,
                                                   self.channel.range_m)
        return self._snapshot

    def _on_start(self, event):
        now = event.fire_at
        src, dst = event.payload
        seq = self._next_seq[src]
        self._next_seq[src] += 1
        disc = DiscoveryState(src, dst, seq, now, self.config.node_count)
        disc.oracle_hops = bfs_shortest_hops(self._oracle_adjacency(), src, dst)
        self.discoveries[(src, seq)] = disc
        self.order.append(disc)

        outcome, frames = self.router.start_discovery(disc, now)
        if outcome == "direct":
            # the first data frame goes straight out; it only arrives if the
            # table entry is not stale
            disc.finished = True
            disc.end = now
            if self.channel.linked(src, dst):
                disc.succeeded = True
                disc.path = (src, dst)
            return
        if outcome == "isolated":
            disc.finished = True
            return
        self._send(frames)
        self.sim.schedule(now + self.config.discovery_timeout_s,
                          EventKind.DISCOVERY_TIMEOUT, disc)

    def _on_timeout(self, event):
        disc = event.payload
        if not disc.finished:
            disc.finished = True

    # -- results -------------------------------------------------------------

    def records(self):
        out = []
        for d in self.order:
            received = frozenset(i for i, b in enumerate(d.received) if b)
            out.append(DiscoveryRecord(
                origin=d.origin, target=d.target, seq=d.seq, start=d.start,
                end=d.end if d.succeeded else None,
                received=received, transmitted=frozenset(d.transmitted),
                succeeded=d.succeeded,
                path_hops=len(d.path) - 1 if d.succeeded else None,
                oracle_hops=d.oracle_hops,
            ))
        return out

    def run(self) -> RunResult:
        events = self.sim.run_until(self.config.sim_duration_s)
        diag = dict(self.router.diagnostics)
        diag["transmissions"] = int(self.channel.tx_count.sum())
        diag["deliveries"] = int(self.channel.delivered)
        return RunResult(self.config, self.records(), diag, events)


def simulate(config, *, allow_degenerate_k: bool = False, trace=None,
             target_handoff: bool = True) -> RunResult:
    """Validate ``config`` and run it to completion."""
    config.validate(allow_degenerate_k=allow_degenerate_k)
    return Network(config, trace=trace, target_handoff=target_handoff).run()
