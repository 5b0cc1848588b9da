"""Exception hierarchy shared by every stage of the pipeline."""


class SSHError(Exception):
    """Base class for errors raised by this package."""

    exit_code = 1


class InvalidInputError(SSHError, ValueError):
    """Arguments violate a documented precondition."""

    exit_code = 2


class ConfigError(InvalidInputError):
    """A configuration key is unknown or out of range."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class ConvergenceError(SSHError):
    """An iterative procedure hit its iteration cap.

    ``history`` holds the residual recorded at every iteration.
    """

    exit_code = 3

    def __init__(self, message, history=()):
        self.history = list(history)
        super().__init__(message)


class NumericFailure(SSHError, ArithmeticError):
    """Non-finite values or a failed linear-algebra kernel."""

    exit_code = 4

    def __init__(self, message, time=None, size=None):
        self.time = time
        self.size = size
        super().__init__(message)


class SingularityError(NumericFailure):
    """Degenerate occupied/empty level pair in a perturbative sum."""

    def __init__(self, message, pair):
        self.pair = pair
        super().__init__(message)


class UnstableGeometryError(NumericFailure):
    """The Hessian has non-positive eigenvalues."""

    def __init__(self, message, modes):
        self.modes = list(modes)
        super().__init__(message)


class TrajectoryError(SSHError):
    """A trajectory in an ensemble failed; wraps the original cause."""

    def __init__(self, index, cause):
        self.index = index
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)
        super().__init__(f"trajectory {index} failed: {cause!r}")
