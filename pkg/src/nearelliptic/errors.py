"""Exception types shared across the package."""


class NearEllipticError(Exception):
    """Base class for package-specific failures."""


class InputError(NearEllipticError, ValueError):
    """Malformed or inconsistent input: bad shapes, broken symmetry, out-of-range parameters."""


class DegenerateSymbolError(NearEllipticError):
    """Symbol matrix numerically singular at some direction or frequency."""

    def __init__(self, message, direction=None, frequency=None):
        super().__init__(message)
        self.direction = direction
        self.frequency = frequency


class EvaluationError(NearEllipticError):
    """A nonlinearity produced non-finite values."""


class DivergenceError(NearEllipticError):
    """Fixed-point iteration failed to contract; usually an invalid certificate."""

    def __init__(self, message, trace=None, certificate=None):
        super().__init__(message)
        self.trace = trace
        self.certificate = certificate


class EstimateBreachError(NearEllipticError):
    """A certified inequality came out violated; indicates a bad certificate or a bug."""


class NearnessConditionError(NearEllipticError):
    """Operator-distance admission test failed; the report explains the refusal."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
