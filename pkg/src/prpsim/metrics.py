"""Discovery metrics and the shortest-path oracle.

Saved rebroadcast for one discovery is (r - t) / r: r distinct nodes
received the route request, t distinct nodes transmitted it.
"""

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

UNREACHABLE = None

RUN_COLUMNS = ("node_count", "flow_count", "k_policy", "protocol", "seed", "discoveries",
               "success_rate", "mean_srb", "mean_latency_s", "mean_path_stretch")
RECORD_COLUMNS = ("node_count", "flow_count", "k_policy", "protocol", "seed", "origin",
                  "target", "seq", "start", "end", "r", "t", "srb",
                  "succeeded", "path_hops", "oracle_hops", "latency_s")


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class DiscoveryRecord:
    origin: int
    target: int
    seq: int
    start: float
    end: float | None
    received: frozenset
    transmitted: frozenset
    succeeded: bool
    path_hops: int | None = None
    oracle_hops: int | None = None

    def __post_init__(self):
        extra = self.transmitted - self.received - {self.origin}
        if extra:
            raise MetricError(f"nodes {sorted(extra)} transmitted without receiving")
        if self.succeeded and (self.path_hops is None or self.path_hops < 1
                               or self.end is None or self.end < self.start):
            raise MetricError("a succeeded record needs path_hops >= 1 and end >= start")

    @property
    def r(self) -> int:
        return len(self.received)

    @property
    def t(self) -> int:
        return len(self.transmitted)

    @property
    def stretch(self) -> float | None:
        if not self.succeeded or not self.oracle_hops:
            return None
        return self.path_hops / self.oracle_hops


def srb(r: int, t: int) -> float:
    if r < 1:
        raise MetricError("saved rebroadcast is undefined when nothing was received")
    if not 0 <= t <= r:
        raise MetricError(f"need 0 <= t <= r, got r={r}, t={t}")
    return (r - t) / r


def success_rate(records) -> float | None:
    records = list(records)
    if not records:
        return None
    return sum(1 for rec in records if rec.succeeded) / len(records)


def latency(record: DiscoveryRecord) -> float:
    if not record.succeeded:
        raise MetricError("latency is only defined for a succeeded discovery")
    return record.end - record.start


def connectivity_snapshot(x, y, range_m) -> np.ndarray:
    """Boolean in-range matrix at one instant (no self loops)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dx = x[:, None] - x[None, :]
    dy = y[:, None] - y[None, :]
    adj = dx * dx + dy * dy <= range_m * range_m
    np.fill_diagonal(adj, False)
    return adj


def bfs_shortest_hops(adj, src: int, dst: int) -> int | None:
    """Minimum hop count from src to dst, or None when unreachable.

    ``adj`` is a square boolean matrix or a mapping node -> iterable of neighbors.
    """
    if src == dst:
        return 0
    if isinstance(adj, np.ndarray):
        neighbors = lambda u: np.flatnonzero(adj[u]).tolist()  # noqa: E731
    else:
        neighbors = lambda u: adj.get(u, ())  # noqa: E731
    seen = {src}
    queue = deque([(src, 0)])
    while queue:
        u, hops = queue.popleft()
        for v in neighbors(u):
            if v == dst:
                return hops + 1
            if v not in seen:
                seen.add(v)
                queue.append((v, hops + 1))
    return UNREACHABLE


def _mean(values):
    values = list(values)
    return sum(values) / len(values) if values else None


@dataclass(frozen=True)
class RunSummary:
    discoveries: int
    success_rate: float | None
    mean_srb: float | None
    mean_latency_s: float | None
    mean_path_stretch: float | None
    srb_excluded: int


def summarize(records) -> RunSummary:
    """Per-run means. Records that sent no RREQ (r = 0) are left out of SRB."""
    records = sorted(records, key=lambda rec: (rec.start, rec.origin, rec.seq))
    srbs = []
    excluded = 0
    for rec in records:
        if rec.r == 0:
            excluded += 1
            continue
        srbs.append(srb(rec.r, rec.t))
    ok = [rec for rec in records if rec.succeeded]
    return RunSummary(
        discoveries=len(records),
        success_rate=success_rate(records),
        mean_srb=_mean(srbs),
        mean_latency_s=_mean(latency(rec) for rec in ok),
        mean_path_stretch=_mean(rec.stretch for rec in ok if rec.stretch is not None),
        srb_excluded=excluded,
    )


@dataclass(frozen=True)
class AggregateReport:
    """Means across replications, with 95% normal-approximation half-widths."""

    key: tuple
    protocol: str
    mean_srb: float | None
    srb_ci: float | None
    success_rate: float | None
    mean_latency_s: float | None
    mean_path_stretch: float | None
    discovery_count: int


def _mean_ci(values):
    values = [v for v in values if v is not None]
    if not values:
        return None, None
    mean = sum(values) / len(values)
    if len(values) < 2:
        return mean, None
    var = sum((v - mean) ** 2 for v in values) / (len(values) - 1)
    return mean, 1.96 * math.sqrt(var / len(values))


def aggregate(key, protocol, summaries) -> AggregateReport:
    summaries = sorted(summaries, key=lambda s: (s.mean_srb is None, s.mean_srb or 0.0,
                                                 s.success_rate or 0.0, s.discoveries))
    mean_srb, ci = _mean_ci(s.mean_srb for s in summaries)
    return AggregateReport(
        key=key,
        protocol=protocol,
        mean_srb=mean_srb,
        srb_ci=ci,
        success_rate=_mean_ci(s.success_rate for s in summaries)[0],
        mean_latency_s=_mean_ci(s.mean_latency_s for s in summaries)[0],
        mean_path_stretch=_mean_ci(s.mean_path_stretch for s in summaries)[0],
        discovery_count=sum(s.discoveries for s in summaries),
    )


def fmt(value) -> str:
    """CSV cell text: fixed precision for floats, empty for absent values."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)
