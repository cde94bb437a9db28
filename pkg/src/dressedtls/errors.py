"""Exception hierarchy shared by all modules."""


class DressedError(Exception):
    """Base class for all package errors."""


class ConfigError(DressedError, ValueError):
    """Invalid configuration file or CLI arguments."""


class DomainError(DressedError, ValueError):
    """Argument outside the supported numerical domain."""


class DegenerateError(DressedError, ValueError):
    """Mixing angle undefined: zero detuning and zero dressed gap."""


class ConvergenceError(DressedError, ArithmeticError):
    """A truncated sum or iterative procedure did not converge."""


class SingularError(DressedError, ArithmeticError):
    """Bloch steady state undefined (vanishing decay rate)."""


class GainDivergenceError(DressedError, ArithmeticError):
    """Reflection coefficient diverges (negative load cancels the line)."""


class UnitarityError(DressedError, ArithmeticError):
    """Numerical propagator drifted away from unitarity."""


class MeasurementFormatError(DressedError, ValueError):
    """Map file could not be parsed."""
