"""Exception hierarchy shared by all flexcube modules."""


class FlexCubeError(Exception):
    """Base class for every error raised by this package."""


# polytope algebra
class PolytopeError(FlexCubeError, ValueError):
    pass


class EmptyInput(PolytopeError):
    pass


class DimensionTooHigh(PolytopeError):
    pass


class DimensionMismatch(PolytopeError):
    pass


class Unbounded(PolytopeError):
    pass


class UnboundedInDirection(Unbounded):
    pass


class Infeasible(PolytopeError):
    pass


# power node dynamics
class ConstraintViolation(FlexCubeError, ValueError):
    """A control or state breaks one of the power node constraints."""

    tag = "?"

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step

    def __str__(self):
        msg = super().__str__()
        if self.step is not None:
            return f"step {self.step}: {msg}"
        return msg


class SocOutOfBounds(ConstraintViolation):
    tag = "a"


class PowerBoundViolation(ConstraintViolation):
    tag = "b/c"


class RampViolation(ConstraintViolation):
    tag = "d/e"


class CurtailmentSignViolation(ConstraintViolation):
    tag = "f/g"


class BalanceViolation(ConstraintViolation):
    tag = "balance"


# flexibility metrics / reach / ensemble
class InfeasibleNominal(FlexCubeError, ValueError):
    pass


class EmptySet(FlexCubeError, ValueError):
    pass


class MixedTimeIndex(FlexCubeError, ValueError):
    pass


class MixedHorizon(FlexCubeError, ValueError):
    pass


class EmptySeries(FlexCubeError, ValueError):
    pass


# scenario ingestion
class ScenarioError(FlexCubeError):
    pass


class ParseError(ScenarioError):
    def __init__(self, message, line=None, field=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)
        self.line = line
        self.field = field


class SchemaVersionUnsupported(ScenarioError):
    pass


class ValidationError(ScenarioError):
    def __init__(self, message, unit=None, tag=None):
        prefix = f"unit {unit!r}" if unit is not None else ""
        if tag is not None:
            prefix += f" [{tag}]"
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.unit = unit
        self.tag = tag
