"""Site-specific mmWave coverage simulation and UAV relay planning."""

from .errors import (EmptyMapError, EmptyTableError, InfeasibleError, InvalidParameterError,
                     InvalidPositionError, ResourceLimitError, UndefinedGainError)

__version__ = "0.1.0"

__all__ = ["EmptyMapError", "EmptyTableError", "InfeasibleError", "InvalidParameterError",
           "InvalidPositionError", "ResourceLimitError", "UndefinedGainError", "__version__"]
