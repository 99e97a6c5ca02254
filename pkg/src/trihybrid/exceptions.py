"""Exception hierarchy shared by every front-end model."""


class ModelError(Exception):
    """Base class for all model errors raised by the library."""

    module = "trihybrid"

    def __init__(self, message, module=None):
        super().__init__(message)
        if module is not None:
            self.module = module

    def __str__(self):
        return f"[{self.module}] {super().__str__()}"


class DimensionError(ModelError, ValueError):
    """Matrix dimensions do not chain."""


class InvalidGeometryError(ModelError, ValueError):
    """Geometry parameters are outside their physical domain."""


class InvalidParameterError(ModelError, ValueError):
    """A scalar or vector parameter is outside its admissible range."""


class SingularConfigurationError(ModelError, ArithmeticError):
    """A configuration leads to a singular or ill-conditioned inverse."""


class PassivityError(ModelError, ArithmeticError):
    """A physically passive model produced negative power."""


class ConvergenceError(ModelError, RuntimeError):
    """An iterative numerical procedure failed to reach tolerance."""


class LinearityViolationError(ModelError, ValueError):
    """A logarithmic quantity was fed where a linear one is required."""


class UndefinedBaselineError(ModelError, ZeroDivisionError):
    """A relative change was requested against a zero reference."""


class SpecificationError(ModelError, ValueError):
    """An efficiency-metric specification is inconsistent."""


class InfeasibleError(ModelError, ValueError):
    """A requested configuration lies outside the feasible set."""


class ScenarioError(ModelError, ValueError):
    """A scenario file violates the schema.

    Parameters
    ----------
    message : str
        Human readable description.
    field : str, optional
        Dotted path of the offending field.
    line : int, optional
        1-based line number in the source file when known.
    """

    module = "cli"

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if field is not None:
            loc.append(f"field '{field}'")
        prefix = (", ".join(loc) + ": ") if loc else ""
        super().__init__(prefix + message)
