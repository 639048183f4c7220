from typing import Optional


class SimulatorError(Exception):
    """
    Base class for every error raised by the simulator tools
    """


class ConfigError(SimulatorError, ValueError):
    """
    A configuration document could not be parsed or failed validation
    """

    def __init__(self, message: str, key: Optional[str] = None):
        """
        Initialize the ConfigError

        Args:
            message: Human readable description of the problem
            key: Dotted key path of the offending entry, if any
        """
        self.key = key
        if key:
            message = f"{key}: {message}"
        super().__init__(message)


class DomainError(SimulatorError, ValueError):
    """
    An argument lies outside the domain of an operation
    """


class ContractError(SimulatorError, ValueError):
    """
    Two operations were combined with inconsistent inputs
    """


class NumericalError(SimulatorError, RuntimeError):
    """
    A numerical procedure failed (quadrature, integration or propagation)
    """


class TableRangeError(NumericalError):
    """
    A rate lookup fell outside the precomputed table
    """

    def __init__(self, axis: str, value: float, low: float, high: float):
        self.axis = axis
        self.value = value
        super().__init__(
            f"Rate table lookup out of range on the {axis} axis: {value:.6g} not in [{low:.6g}, {high:.6g}]"
        )


class ValidityBoundError(SimulatorError):
    """
    The polaron master equation validity metric reached the hard limit
    """
