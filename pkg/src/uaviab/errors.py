"""Exception types raised by the simulator."""


class InvalidParameterError(ValueError):
    """An argument or configuration value is outside its valid domain."""


class InvalidPositionError(InvalidParameterError):
    """A transmitter or receiver is placed inside a building or out of bounds."""


class ResourceLimitError(RuntimeError):
    """A requested computation exceeds a configured budget."""


class InfeasibleError(RuntimeError):
    """No candidate satisfies the placement constraints."""


class EmptyTableError(ValueError):
    """A power table would have no rows."""


class UndefinedGainError(ZeroDivisionError):
    """Coverage gain requested against a baseline with zero coverage."""


class EmptyMapError(ValueError):
    """A statistic was requested from a map without outdoor cells."""
