"""
Module for custom exceptions raised by the simulator.

@organization: HappyRavenLabs
"""


class SimulationError(Exception):
    """Base exception for simulation errors"""

    pass


class ConfigurationError(SimulationError):
    """Raised when scenario parameters are invalid or inconsistent"""

    pass


class ArgumentError(SimulationError, ValueError):
    """Raised when an operation receives malformed arguments"""

    pass


class EstimationError(SimulationError):
    """Raised when channel estimation cannot be carried out"""

    pass


class OutputError(SimulationError):
    """Raised when an output artifact cannot be written"""

    pass
