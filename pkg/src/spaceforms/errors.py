"""Exception hierarchy shared by all spaceforms modules."""


class SpaceformsError(Exception):
    """Base class for every error raised by this package."""


class DomainError(SpaceformsError):
    """A point lies outside the domain of a metric or model space."""


class GuardZoneError(DomainError):
    """A point lies inside the guard zone around a puncture."""

    def __init__(self, message, point=None, distance=None):
        super().__init__(message)
        self.point = point
        self.distance = distance


class PathExitsDomainError(DomainError):
    """An integrated trajectory left the admissible domain.

    Carries the last admissible point seen before the exit.
    """

    def __init__(self, message, exit_point=None):
        super().__init__(message)
        self.exit_point = exit_point


class EvaluationError(SpaceformsError):
    """A metric or expression could not be evaluated at a point."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class NotPositiveDefiniteError(EvaluationError):
    """A metric evaluation produced a non positive definite matrix."""


class NoConvergenceError(SpaceformsError):
    """An iterative solve (shooting, Newton) failed to converge."""


class StepTooLargeError(SpaceformsError):
    """A continuation segment stayed unreachable after maximal subdivision."""


class InvalidFrameError(SpaceformsError):
    """A tangent frame fails the complex-linear isometry precondition."""


class NotSpaceFormError(SpaceformsError):
    """A metric field failed the constant-curvature identity check."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class UnreachableSamplesError(SpaceformsError):
    """Some development samples are disconnected from the base sample."""

    def __init__(self, message, unreachable=None):
        super().__init__(message)
        self.unreachable = list(unreachable) if unreachable is not None else []


class ChartError(DomainError):
    """A projective-space point cannot be represented in the requested chart."""


class NotHolomorphicError(SpaceformsError):
    """Torus boundary data carries too much anti-holomorphic mass."""

    def __init__(self, message, negative_mass=None):
        super().__init__(message)
        self.negative_mass = negative_mass


class ExtensionFailure(SpaceformsError):
    """An extension pipeline check failed; carries the partial report."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ParseError(SpaceformsError):
    """Syntax error in a potential/map expression."""

    def __init__(self, message, line, column, expected=None):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column
        self.expected = tuple(expected) if expected else ()


class ExprTypeError(SpaceformsError):
    """Type error in an expression (complex value where a real is required)."""

    def __init__(self, message, position=None):
        super().__init__(message)
        self.position = position


class ConfigError(SpaceformsError):
    """Invalid or incomplete run configuration."""
