"""Free-space channel model and RSSI distance estimation.

Frequencies are in MHz and distances in km inside the path-loss formula,
which is what makes the 32.45 dB constant dimensionally consistent.
"""

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from . import kernels
from .sim_core import EventKind

FSPL_CONSTANT_DB = 32.45
BROADCAST = -1

# bytes on the air, for serialization delay only
FRAME_BYTES = {"HELLO": 64, "RREQ": 512, "RREP": 512}


def path_loss_at(distance_km: float, frequency_mhz: float) -> float:
    """Free-space loss in dB over ``distance_km`` at ``frequency_mhz``."""
    if not distance_km > 0:
        raise ValueError(f"distance must be positive, got {distance_km!r} km")
    if not frequency_mhz > 0:
        raise ValueError(f"frequency must be positive, got {frequency_mhz!r} MHz")
    return FSPL_CONSTANT_DB + 20.0 * math.log10(distance_km) + 20.0 * math.log10(frequency_mhz)


@dataclass(frozen=True)
class LinkBudget:
    tx_power_dbm: float
    rx_power_dbm: float
    frequency_mhz: float

    def __post_init__(self):
        if not self.frequency_mhz > 0:
            raise ValueError(f"frequency must be positive, got {self.frequency_mhz!r} MHz")

    @property
    def path_loss_db(self) -> float:
        return self.tx_power_dbm - self.rx_power_dbm


def distance_from_rssi(budget: LinkBudget) -> float:
    """Invert the free-space formula: distance in km for a measured loss."""
    exponent = (budget.path_loss_db - FSPL_CONSTANT_DB - 20.0 * math.log10(budget.frequency_mhz)) / 20.0
    return 10.0 ** exponent


def distances_from_rssi(tx_power_dbm: float, rx_power_dbm: np.ndarray, frequency_mhz: float) -> np.ndarray:
    """Vector form of distance_from_rssi, in km."""
    loss = tx_power_dbm - np.asarray(rx_power_dbm, dtype=np.float64)
    return 10.0 ** ((loss - FSPL_CONSTANT_DB - 20.0 * math.log10(frequency_mhz)) / 20.0)


def received_power(tx_power_dbm: float, distance_m: np.ndarray, frequency_mhz: float) -> np.ndarray:
    """Noiseless RSSI (dBm) at the given distances.

    The far-field formula goes negative below about 1 cm at 2.4 GHz; the
    loss is floored at 0 dB there.
    """
    d_km = np.maximum(np.asarray(distance_m, dtype=np.float64), 1e-6) / 1000.0
    loss = FSPL_CONSTANT_DB + 20.0 * np.log10(d_km) + 20.0 * math.log10(frequency_mhz)
    return tx_power_dbm - np.maximum(loss, 0.0)


def radio_range_m(config) -> float:
    """Distance at which the free-space loss equals the link budget."""
    budget = LinkBudget(config.tx_power_dbm, config.sensitivity_dbm, config.frequency_mhz)
    return 1000.0 * distance_from_rssi(budget)


def _xy(p):
    return (p.x, p.y) if hasattr(p, "x") else (p[0], p[1])


def in_range(a, b, config) -> bool:
    """True iff the free-space loss between positions a and b fits the link budget.

    Loss grows monotonically with distance, so this is a distance test
    against the range; comparing squared distances keeps it bit-identical
    to the channel's connectivity matrix.
    """
    (ax, ay), (bx, by) = _xy(a), _xy(b)
    dx, dy = ax - bx, ay - by
    r = radio_range_m(config)
    return dx * dx + dy * dy <= r * r


def delivery_delay(config, frame_type: str) -> float:
    """Channel delay plus serialization time for one frame."""
    return config.channel_delay_s + 8 * FRAME_BYTES[frame_type] / config.bandwidth_bps


@dataclass(slots=True)
class Frame:
    src: int
    dst: int  # BROADCAST for local broadcast
    payload: Any
    tx_time: float


@dataclass(slots=True)
class Delivery:
    """One transmission's receptions; all receivers get it at the same instant."""

    frame: Frame
    receivers: np.ndarray  # int32 node ids, ascending


class Channel:
    """Idealized shared medium: no contention, optional independent loss.

    Connectivity is recomputed lazily from the live position arrays after
    ``positions_changed()``.
    """

    def __init__(self, config, sim, x: np.ndarray, y: np.ndarray, loss_rng=None):
        self.config = config
        self.sim = sim
        self.range_m = radio_range_m(config)
        self.loss_rng = loss_rng
        self.tx_count = np.zeros(config.node_count, dtype=np.int64)
        self.delivered = 0
        self._delay = {kind: delivery_delay(config, kind) for kind in FRAME_BYTES}
        self.set_positions(x, y)

    def set_positions(self, x, y):
        self.x = x
        self.y = y
        self.positions_changed()

    def positions_changed(self):
        self._adj = None
        self._csr = None

    @property
    def adjacency(self) -> np.ndarray:
        if self._adj is None:
            self._adj = kernels.adjacency(self.x, self.y, self.range_m)
        return self._adj

    def neighbors(self, node: int) -> np.ndarray:
        """In-range node ids (int32, ascending)."""
        if self._csr is None:
            self._csr = kernels.neighbor_lists(self.adjacency)
        indptr, indices = self._csr
        return indices[indptr[node]:indptr[node + 1]]

    def linked(self, a: int, b: int) -> bool:
        return bool(self.adjacency[a, b])

    def _survivors(self, receivers: np.ndarray) -> np.ndarray:
        p = self.config.loss_prob
        if p > 0.0 and len(receivers):
            keep = self.loss_rng.random(len(receivers)) >= p
            receivers = receivers[keep]
        return receivers

    def transmit(self, frame: Frame) -> Delivery:
        """Send a frame now; schedules one PACKET_DELIVERY carrying every reception."""
        self.tx_count[frame.src] += 1
        if frame.dst == BROADCAST:
            receivers = self.neighbors(frame.src)
        elif self.linked(frame.src, frame.dst):
            receivers = np.array([frame.dst], dtype=np.int32)
        else:
            receivers = np.empty(0, dtype=np.int32)
        receivers = self._survivors(receivers)
        delivery = Delivery(frame, receivers)
        if len(receivers):
            self.delivered += len(receivers)
            fire_at = frame.tx_time + self._delay[frame.payload.frame_type]
            self.sim.schedule(fire_at, EventKind.PACKET_DELIVERY, delivery)
        return delivery

    def hello_round(self, senders: np.ndarray, now: float):
        """Every node in ``senders`` broadcasts a HELLO at ``now``.

        Schedules a single PACKET_DELIVERY whose payload is a HelloBatch of
        (receiver, sender, rssi) triples.
        """
        senders = np.asarray(senders, dtype=np.int32)
        self.tx_count[senders] += 1
        recv, which = np.nonzero(self.adjacency[:, senders])
        send = senders[which]
        keep = self._survivors(np.arange(len(recv)))
        recv, send = recv[keep], send[keep]
        dist = np.hypot(self.x[recv] - self.x[send], self.y[recv] - self.y[send])
        rssi = received_power(self.config.tx_power_dbm, dist, self.config.frequency_mhz)
        if self.config.rssi_noise_db > 0.0:
            rssi = rssi + self.loss_rng.normal(0.0, self.config.rssi_noise_db, len(rssi))
            rssi = np.minimum(rssi, self.config.tx_power_dbm)
        batch = HelloBatch(recv.astype(np.int32), send, rssi)
        if len(recv):
            self.delivered += len(recv)
            self.sim.schedule(now + self._delay["HELLO"], EventKind.PACKET_DELIVERY, batch)
        return batch


@dataclass(slots=True)
class HelloBatch:
    frame_type = "HELLO"
    receivers: np.ndarray
    senders: np.ndarray
    rssi_dbm: np.ndarray
