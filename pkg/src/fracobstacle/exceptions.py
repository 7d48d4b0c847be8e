"""Exception types raised by the solvers and verifiers."""


class InvalidDomainError(ValueError):
    """Box domain specification is malformed."""


class DomainMismatchError(ValueError):
    """A grid function does not live on the expected grid."""


class PreconditionError(ValueError):
    """Inputs violate an ordering or range precondition of an operation."""


class SolverError(RuntimeError):
    """A solver hit a fatal condition (cycling, indefinite matrix, ...)."""


class EvolutionError(RuntimeError):
    """An evolution step failed; ``state`` holds everything computed so far."""

    def __init__(self, message, step=None, state=None):
        super().__init__(message)
        self.step = step
        self.state = state


class ConfigError(ValueError):
    """Malformed or invalid run configuration."""

    def __init__(self, message, lines=(), field=None):
        if lines:
            where = ", ".join(str(n) for n in lines)
            message = f"line {where}: {message}" if len(lines) == 1 else f"lines {where}: {message}"
        super().__init__(message)
        self.lines = tuple(lines)
        self.field = field
