"""Exception types shared across the package.

Two families matter to the CLI: configuration/validation problems (exit
code 1) and numerical failures (exit code 2). Everything derives from
BlockmfError so callers can catch broadly.
"""


class BlockmfError(Exception):
    pass


class ValidationError(BlockmfError, ValueError):
    """Bad user input: malformed graph, measure, scenario, argument."""


class InvalidConfigurationError(ValidationError):
    pass


class InvalidArgumentError(ValidationError):
    pass


class WrongClassError(InvalidArgumentError):
    """Operation defined only for peripheral (or only central) nodes."""


class UnknownEdgeError(InvalidArgumentError):
    pass


class CapacityError(ValidationError):
    """Problem size beyond a hard cap (e.g. oracle state space)."""


class NumericalError(BlockmfError):
    pass


class NumericalBlowupError(NumericalError):
    def __init__(self, msg, t=None):
        super().__init__(msg)
        self.t = t


class NonConvergenceError(NumericalError):
    """Iteration budget exhausted; carries the residual history."""

    def __init__(self, msg, residuals=None):
        super().__init__(msg)
        self.residuals = list(residuals) if residuals is not None else []


class AssumptionViolationError(NumericalError):
    """A quantity required to be bounded away from zero fell below its floor."""


class InternalConsistencyError(BlockmfError):
    """Invariant broken inside the simulator; indicates a bug, not bad input."""
