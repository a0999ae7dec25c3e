from .config import ScenarioConfig, parse_config
from .exceptions import (
    ArgumentError,
    ConfigurationError,
    EstimationError,
    OutputError,
    SimulationError,
)

__all__ = [
    "ScenarioConfig",
    "parse_config",
    "ArgumentError",
    "ConfigurationError",
    "EstimationError",
    "OutputError",
    "SimulationError",
]
