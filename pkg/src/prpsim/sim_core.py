"""Discrete-event engine: clock, event queue and named random streams."""

import enum
import heapq
import itertools
from typing import Any, Callable, NamedTuple

import numpy as np


class SchedulingError(RuntimeError):
    """An event was scheduled before the current simulation time."""


class EventKind(enum.IntEnum):
    HELLO_TICK = 0
    PACKET_DELIVERY = 1
    MOBILITY_UPDATE = 2
    DISCOVERY_START = 3
    DISCOVERY_TIMEOUT = 4
    METRICS_SNAPSHOT = 5


class Event(NamedTuple):
    """A timestamped occurrence.

    Tuple ordering is (fire_at, seq_no, ...); seq_no is unique per
    simulator, so the payload never takes part in a comparison.
    """

    fire_at: float
    seq_no: int
    kind: EventKind
    payload: Any = None


class Simulator:
    """Single-threaded event loop with a total (fire_at, seq_no) order."""

    def __init__(self, trace: Callable[[Event], None] | None = None):
        self.now = 0.0
        self._queue: list[Event] = []
        self._seq = itertools.count()
        self._handlers: dict[EventKind, Callable[[Event], None]] = {}
        self._trace = trace

    def __len__(self):
        return len(self._queue)

    def on(self, kind: EventKind, handler: Callable[[Event], None]) -> None:
        self._handlers[kind] = handler

    def schedule(self, fire_at: float, kind: EventKind, payload: Any = None) -> Event:
        if fire_at < self.now:
            raise SchedulingError(
                f"cannot schedule {kind.name} at t={fire_at!r}: clock is already at {self.now!r}"
            )
        event = Event(fire_at, next(self._seq), kind, payload)
        heapq.heappush(self._queue, event)
        return event

    def run_until(self, end: float) -> int:
        """Process every event with fire_at <= end; leave the clock at end."""
        if end < self.now:
            raise SchedulingError(f"run_until({end!r}) is before the clock ({self.now!r})")
        queue = self._queue
        handlers = self._handlers
        trace = self._trace
        count = 0
        while queue and queue[0].fire_at <= end:
            event = heapq.heappop(queue)
            self.now = event.fire_at
            if trace is not None:
                trace(event)
            handler = handlers.get(event.kind)
            if handler is not None:
                handler(event)
            count += 1
        self.now = end
        return count


STREAM_LABELS = ("mobility", "k_choice", "flow_selection", "loss")


def rng_stream(seed: int, label: str) -> np.random.Generator:
    """Independent deterministic generator for one stochastic subsystem."""
    try:
        index = STREAM_LABELS.index(label)
    except ValueError:
        raise ValueError(
            f"unknown random stream {label!r}; expected one of {', '.join(STREAM_LABELS)}"
        ) from None
    seq = np.random.SeedSequence(entropy=seed & 0xFFFF_FFFF_FFFF_FFFF, spawn_key=(index,))
    return np.random.Generator(np.random.PCG64(seq))
