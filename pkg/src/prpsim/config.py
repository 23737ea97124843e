"""Scenario configuration: defaults, validation and the TOML file loader.

A scenario file is TOML. Top-level keys set the run itself; the ``map``,
``radio``, ``mobility`` and ``timing`` tables hold the rest::

    node_count = 100
    protocol = "PRP"            # or "Flood"
    k_policy = "Random(3,7)"    # or "Fixed(4)"
    flow_count = 1
    sim_duration_s = 900
    rng_seed = 7

    [map]
    width_m = 350
    height_m = 350

    [radio]
    tx_power_dbm = 20.0
    frequency_mhz = 2400.0

    [mobility]
    model = "random_waypoint"   # "static", "restricted_random_walk"
    max_speed = 20.0

Unknown keys are rejected.
"""

import dataclasses
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

PROTOCOLS = ("PRP", "Flood")
MOBILITY_MODELS = ("static", "random_waypoint", "restricted_random_walk")

# 32.45 + 20 log10(0.1 km) + 20 log10(2400 MHz): the loss over exactly 100 m
DEFAULT_LINK_BUDGET_DB = 32.45 + 20.0 * math.log10(0.1) + 20.0 * math.log10(2400.0)


class ConfigError(ValueError):
    """Invalid scenario; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class KPolicy:
    """How a forwarding node picks its reachability divisor K."""

    kind: str  # "fixed" or "random"
    lo: int
    hi: int

    @classmethod
    def fixed(cls, k: int) -> "KPolicy":
        return cls("fixed", k, k)

    @classmethod
    def random(cls, lo: int, hi: int) -> "KPolicy":
        return cls("random", lo, hi)

    _PATTERN = re.compile(r"^\s*(fixed|random)\s*\(\s*(\d+)\s*(?:,\s*(\d+)\s*)?\)\s*$", re.I)

    @classmethod
    def parse(cls, text: str) -> "KPolicy":
        """Parse ``Fixed(k)`` or ``Random(lo,hi)``."""
        m = cls._PATTERN.match(str(text))
        if m is None:
            raise ValueError(f"expected Fixed(k) or Random(lo,hi), got {text!r}")
        kind, a, b = m.group(1).lower(), int(m.group(2)), m.group(3)
        if kind == "fixed":
            if b is not None:
                raise ValueError(f"Fixed takes one value, got {text!r}")
            return cls.fixed(a)
        if b is None:
            raise ValueError(f"Random takes two values, got {text!r}")
        return cls.random(a, int(b))

    @property
    def label(self) -> str:
        if self.kind == "fixed":
            return f"Fixed({self.lo})"
        return f"Random({self.lo},{self.hi})"

    @property
    def sort_key(self):
        return (self.kind, self.lo, self.hi)

    def __str__(self):
        return self.label


@dataclass(frozen=True)
class MobilitySpec:
    model: str = "random_waypoint"
    max_speed: float = 20.0  # m/s
    pause: float = 0.0  # s, random_waypoint only
    step: float = 20.0  # m/s, restricted_random_walk walking speed
    bound: float = 5.0  # m, longest single restricted_random_walk step
    tick_s: float = 0.1


@dataclass(frozen=True)
class ScenarioConfig:
    node_count: int = 50
    protocol: str = "PRP"
    k_policy: KPolicy = field(default_factory=lambda: KPolicy.random(3, 7))
    flow_count: int = 1
    sim_duration_s: float = 900.0
    rng_seed: int = 1

    map_width_m: float = 350.0
    map_height_m: float = 350.0

    tx_power_dbm: float = 20.0
    # None: tx_power_dbm minus the 100 m free-space loss at 2400 MHz
    rx_sensitivity_dbm: float | None = None
    frequency_mhz: float = 2400.0
    bandwidth_bps: float = 11e6
    channel_delay_s: float = 10e-6
    loss_prob: float = 0.0
    rssi_noise_db: float = 0.0

    mobility: MobilitySpec = field(default_factory=MobilitySpec)

    hello_period_s: float = 1.0
    discovery_timeout_s: float = 0.5

    @property
    def sensitivity_dbm(self) -> float:
        if self.rx_sensitivity_dbm is None:
            return self.tx_power_dbm - DEFAULT_LINK_BUDGET_DB
        return self.rx_sensitivity_dbm

    @property
    def link_budget_db(self) -> float:
        return self.tx_power_dbm - self.sensitivity_dbm

    @property
    def density(self) -> float:
        """Nodes per square meter."""
        return self.node_count / (self.map_width_m * self.map_height_m)

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    def validate(self, allow_degenerate_k: bool = False) -> "ScenarioConfig":
        """Raise ConfigError on the first violated invariant; return self.

        ``allow_degenerate_k`` admits K = 1, which only tests use.
        """
        if self.node_count < 2:
            raise ConfigError("node_count", f"must be at least 2, got {self.node_count}")
        if self.flow_count < 1:
            raise ConfigError("flow_count", f"must be at least 1, got {self.flow_count}")
        if 2 * self.flow_count > self.node_count:
            raise ConfigError(
                "flow_count",
                f"{self.flow_count} flows need {2 * self.flow_count} distinct endpoints "
                f"but node_count is {self.node_count}",
            )
        if self.protocol not in PROTOCOLS:
            raise ConfigError("protocol", f"must be one of {PROTOCOLS}, got {self.protocol!r}")
        k = self.k_policy
        min_k = 1 if allow_degenerate_k else 2
        if k.kind not in ("fixed", "random"):
            raise ConfigError("k_policy", f"unknown kind {k.kind!r}")
        if k.lo < min_k or k.lo > k.hi:
            raise ConfigError("k_policy", f"{k.label} must satisfy {min_k} <= lo <= hi")
        for name in ("map_width_m", "map_height_m", "sim_duration_s", "frequency_mhz",
                     "bandwidth_bps", "hello_period_s", "discovery_timeout_s"):
            if not getattr(self, name) > 0:
                raise ConfigError(name, f"must be positive, got {getattr(self, name)!r}")
        if self.channel_delay_s < 0:
            raise ConfigError("radio.channel_delay_s", "must be non-negative")
        if not 0.0 <= self.loss_prob < 1.0:
            raise ConfigError("radio.loss_prob", f"must lie in [0, 1), got {self.loss_prob!r}")
        if self.rssi_noise_db < 0:
            raise ConfigError("radio.rssi_noise_db", "must be non-negative")
        if self.link_budget_db <= 0:
            raise ConfigError("radio.rx_sensitivity_dbm", "must be below tx_power_dbm")
        mob = self.mobility
        if mob.model not in MOBILITY_MODELS:
            raise ConfigError("mobility.model", f"must be one of {MOBILITY_MODELS}, got {mob.model!r}")
        if mob.max_speed <= 0:
            raise ConfigError("mobility.max_speed", "must be positive")
        if mob.pause < 0:
            raise ConfigError("mobility.pause", "must be non-negative")
        if mob.step <= 0 or mob.bound <= 0:
            raise ConfigError("mobility.step", "step and bound must be positive")
        if mob.tick_s <= 0:
            raise ConfigError("mobility.tick_s", "must be positive")
        return self


# file key -> ScenarioConfig attribute, per table ("" is the top level)
_TOP_KEYS = {
    "node_count": "node_count", "protocol": "protocol", "k_policy": "k_policy",
    "flow_count": "flow_count", "sim_duration_s": "sim_duration_s", "rng_seed": "rng_seed",
}
_SECTIONS = {
    "map": {"width_m": "map_width_m", "height_m": "map_height_m"},
    "radio": {
        "tx_power_dbm": "tx_power_dbm", "rx_sensitivity_dbm": "rx_sensitivity_dbm",
        "frequency_mhz": "frequency_mhz", "bandwidth_bps": "bandwidth_bps",
        "channel_delay_s": "channel_delay_s", "loss_prob": "loss_prob",
        "rssi_noise_db": "rssi_noise_db",
    },
    "timing": {"hello_period_s": "hello_period_s", "discovery_timeout_s": "discovery_timeout_s"},
}
_MOBILITY_KEYS = {f.name for f in dataclasses.fields(MobilitySpec)}
_INT_FIELDS = {"node_count", "flow_count", "rng_seed"}


def _coerce(name: str, value):
    if name == "k_policy":
        if isinstance(value, KPolicy):
            return value
        try:
            return KPolicy.parse(value)
        except ValueError as exc:
            raise ConfigError("k_policy", str(exc)) from None
    if name == "protocol" or name == "model":
        if not isinstance(value, str):
            raise ConfigError(name, f"expected a string, got {value!r}")
        return value
    if name in _INT_FIELDS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(name, f"expected an integer, got {value!r}")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(name, f"expected a number, got {value!r}")
    return float(value)


def config_from_dict(data: dict, base: ScenarioConfig | None = None) -> ScenarioConfig:
    """Overlay a parsed TOML mapping on ``base`` (defaults if None). No validation."""
    cfg = base or ScenarioConfig()
    changes = {}
    mobility = {}
    for key, value in data.items():
        if key in _TOP_KEYS:
            changes[_TOP_KEYS[key]] = _coerce(key, value)
        elif key in _SECTIONS or key == "mobility":
            if not isinstance(value, dict):
                raise ConfigError(key, "expected a table")
            for sub, subval in value.items():
                dotted = f"{key}.{sub}"
                if key == "mobility":
                    if sub not in _MOBILITY_KEYS:
                        raise ConfigError(dotted, "unknown field")
                    try:
                        mobility[sub] = _coerce(sub, subval)
                    except ConfigError as exc:
                        raise ConfigError(dotted, str(exc).split(": ", 1)[-1]) from None
                else:
                    if sub not in _SECTIONS[key]:
                        raise ConfigError(dotted, "unknown field")
                    try:
                        changes[_SECTIONS[key][sub]] = _coerce(sub, subval)
                    except ConfigError as exc:
                        raise ConfigError(dotted, str(exc).split(": ", 1)[-1]) from None
        else:
            raise ConfigError(key, "unknown field")
    if mobility:
        changes["mobility"] = dataclasses.replace(cfg.mobility, **mobility)
    return dataclasses.replace(cfg, **changes)


def load_config(path) -> ScenarioConfig:
    """Read and validate a scenario file."""
    text = Path(path).read_text()
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(str(path), f"not valid TOML ({exc})") from None
    return config_from_dict(data).validate()


def config_to_dict(cfg: ScenarioConfig) -> dict:
    """Inverse of config_from_dict (rx_sensitivity_dbm omitted when derived)."""
    out = {key: getattr(cfg, attr) for key, attr in _TOP_KEYS.items()}
    out["k_policy"] = cfg.k_policy.label
    for section, keys in _SECTIONS.items():
        table = {key: getattr(cfg, attr) for key, attr in keys.items()}
        if table.get("rx_sensitivity_dbm", 0) is None:
            del table["rx_sensitivity_dbm"]
        out[section] = table
    out["mobility"] = dataclasses.asdict(cfg.mobility)
    return out
