"""Exception types raised by the library."""


class RabinowitzError(Exception):
    """Base class for all library errors."""


class DomainError(RabinowitzError, ValueError):
    """A point lies outside the chart of its contact model."""


class PositivityError(RabinowitzError, ValueError):
    """A contact Hamiltonian that must be positive is not."""


class FlowError(RabinowitzError, ArithmeticError):
    """The ODE integrator failed (step underflow or step budget exhausted).

    ``diagnostics`` carries the integrator state at the point of failure.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class UnsupportedModelError(RabinowitzError, NotImplementedError):
    """The requested operation is not available for this contact model."""


class ConfigError(RabinowitzError, ValueError):
    """Invalid run configuration; ``field`` names the offending entry."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
