"""Exception types shared across the package."""


class BRWError(Exception):
    """Base class for all package errors."""


class AssumptionViolated(BRWError):
    """A model fails one of the standing assumptions.

    ``condition`` names the failed check, e.g. ``"p_0=0"``.
    """

    def __init__(self, condition: str, detail: str = ""):
        self.condition = condition
        msg = condition if not detail else f"{condition}: {detail}"
        super().__init__(msg)


class DomainExceeded(BRWError):
    """Argument lies outside the domain where the CGF is finite."""


class BoundaryPoint(BRWError):
    """Query sits exactly on a boundary where no limit value is known."""


class NoSolution(BRWError):
    """A defining equation has no root for the given parameters."""


class WrongRegime(BRWError):
    """Operation requested outside the regime it is defined for."""


class OutOfRange(BRWError):
    """Parameter outside the admissible range of a bound."""


class ZeroProbability(BRWError):
    """A forced event has probability zero."""


class PopulationCapExceeded(BRWError):
    """A simulated replicate exceeded the particle cap."""


class TooLarge(BRWError):
    """Exact computation would exceed the state-space limit."""


class ConfigError(BRWError):
    """Invalid or incomplete run configuration."""

    def __init__(self, field: str, detail: str):
        self.field = field
        super().__init__(f"{field}: {detail}")


class NumericalDrift(BRWError):
    """An exact computation lost more probability mass than rounding explains."""
