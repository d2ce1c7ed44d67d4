"""Exception types shared across the package."""


class ContractError(ValueError):
    """An argument does not conform to the expected block structure."""


class ParameterError(ValueError):
    """A numerical parameter lies outside its admissible range."""


class PreconditionError(ValueError):
    """A documented precondition of an operation does not hold."""


class ConvergenceError(RuntimeError):
    """An iterative solver ran out of iterations.

    The last residual is kept in ``residual`` so callers can decide whether
    the partial answer is still usable.
    """

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class DivergenceError(RuntimeError):
    """The iterate norm crossed the divergence guard."""


class ProtocolError(RuntimeError):
    """A coordinator or agent transition was requested in the wrong state."""


class BoundedDelayError(RuntimeError):
    """An agent went longer than the declared delay bound without a write."""


class TraceFormatError(ValueError):
    """A persisted trace is missing, corrupt or thinned."""
