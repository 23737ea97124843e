"""Node placement and movement models.

``advance`` is a pure transformation: it returns a new state and leaves the
input untouched. All randomness comes from the generator passed in, which
in a simulation run is the ``mobility`` stream.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .config import MobilitySpec


@dataclass(frozen=True)
class Position:
    x: float
    y: float


def place_initial(config, rng) -> list[Position]:
    """Uniform random placement over the map rectangle."""
    xs = rng.uniform(0.0, config.map_width_m, config.node_count)
    ys = rng.uniform(0.0, config.map_height_m, config.node_count)
    return [Position(float(x), float(y)) for x, y in zip(xs, ys)]


@dataclass(frozen=True)
class MobilityState:
    spec: MobilitySpec
    width: float
    height: float
    x: np.ndarray
    y: np.ndarray
    # random_waypoint only
    target_x: np.ndarray | None = None
    target_y: np.ndarray | None = None
    speed: np.ndarray | None = None
    pause_left: np.ndarray | None = None

    @property
    def positions(self) -> list[Position]:
        return [Position(float(a), float(b)) for a, b in zip(self.x, self.y)]


def _draw_legs(spec, width, height, rng, k):
    """New waypoint targets and speeds in (0, max_speed] for k nodes."""
    tx = rng.uniform(0.0, width, k)
    ty = rng.uniform(0.0, height, k)
    speed = spec.max_speed * (1.0 - rng.random(k))
    return tx, ty, speed


def initial_state(config, rng) -> MobilityState:
    """Place every node and, for random waypoint, draw its first leg."""
    pos = place_initial(config, rng)
    x = np.array([p.x for p in pos])
    y = np.array([p.y for p in pos])
    spec = config.mobility
    state = MobilityState(spec, config.map_width_m, config.map_height_m, x, y)
    if spec.model == "random_waypoint":
        tx, ty, speed = _draw_legs(spec, state.width, state.height, rng, len(x))
        state = replace(state, target_x=tx, target_y=ty, speed=speed,
                        pause_left=np.zeros(len(x)))
    return state


def reflect(v: np.ndarray, limit: float) -> np.ndarray:
    """Fold coordinates back into [0, limit] by mirroring at both edges."""
    period = 2.0 * limit
    v = np.mod(v, period)
    return np.where(v > limit, period - v, v)


def advance(state: MobilityState, dt: float, rng) -> MobilityState:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt!r}")
    model = state.spec.model
    if model == "static":
        return state
    if model == "random_waypoint":
        return _advance_waypoint(state, dt, rng)
    if model == "restricted_random_walk":
        return _advance_walk(state, dt, rng)
    raise ValueError(f"unknown mobility model {model!r}")


def _advance_waypoint(state, dt, rng):
    tx, ty, speed, pause_left = state.target_x, state.target_y, state.speed, state.pause_left
    moving = pause_left <= 0.0
    dx = tx - state.x
    dy = ty - state.y
    dist = np.hypot(dx, dy)
    reach = speed * dt
    arrived = moving & (dist <= reach)
    going = moving & ~arrived
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(going, reach / dist, 0.0)
    x = state.x + dx * frac
    y = state.y + dy * frac
    waiting = ~moving
    if not (arrived.any() or waiting.any()):
        return replace(state, x=x, y=y)

    # an arriving node stops at its waypoint for the rest of the tick
    x[arrived] = tx[arrived]
    y[arrived] = ty[arrived]
    tx, ty, speed, pause_left = tx.copy(), ty.copy(), speed.copy(), pause_left.copy()
    pause_left[waiting] -= dt
    pause_left[arrived] = state.spec.pause
    fresh = np.flatnonzero((arrived | waiting) & (pause_left <= 0.0))
    if len(fresh):
        ntx, nty, nspeed = _draw_legs(state.spec, state.width, state.height, rng, len(fresh))
        tx[fresh], ty[fresh], speed[fresh] = ntx, nty, nspeed
        pause_left[fresh] = 0.0
    return replace(state, x=x, y=y, target_x=tx, target_y=ty, speed=speed,
                   pause_left=pause_left)


def _advance_walk(state, dt, rng):
    n = len(state.x)
    heading = rng.uniform(0.0, 2.0 * math.pi, n)
    length = rng.random(n) * min(state.spec.step * dt, state.spec.bound)
    x = reflect(state.x + length * np.cos(heading), state.width)
    y = reflect(state.y + length * np.sin(heading), state.height)
    return replace(state, x=x, y=y)
