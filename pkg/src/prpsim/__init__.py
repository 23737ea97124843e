"""Route-discovery simulator comparing n/K farthest-neighbor forwarding with blind flooding."""

from .config import ConfigError, KPolicy, MobilitySpec, ScenarioConfig, load_config
from .kernels import BACKEND
from .network import RunResult, simulate

__all__ = ["BACKEND", "ConfigError", "KPolicy", "MobilitySpec", "RunResult",
           "ScenarioConfig", "load_config", "simulate"]
__version__ = "0.1.0"
