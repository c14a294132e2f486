"""Exception hierarchy shared by all modules."""


class SFGMError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(SFGMError, ValueError):
    pass


class NonFiniteError(SFGMError, ValueError):
    pass


class LipschitzNotConverged(SFGMError, RuntimeError):
    """Power iteration did not settle; carries the last two Rayleigh quotients."""

    def __init__(self, message, last_quotients):
        super().__init__(message)
        self.last_quotients = tuple(last_quotients)


class GroundTruthError(SFGMError, RuntimeError):
    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class DegenerateAlpha(SFGMError, ArithmeticError):
    pass


class DegenerateY(SFGMError, ArithmeticError):
    pass


class DegenerateGamma(SFGMError, ArithmeticError):
    pass


class InfeasibleBeta(SFGMError, ValueError):
    pass


class ConfigError(SFGMError, ValueError):
    pass


class SolverStall(SFGMError, RuntimeError):
    """Objective kept increasing; usually means the Lipschitz constant is too small."""

    def __init__(self, message, k, history=()):
        super().__init__(message)
        self.k = k
        self.history = tuple(history)


class FlatScanningFunction(SFGMError, ArithmeticError):
    pass


class ValidityDomainError(SFGMError, ValueError):
    pass


class LibsvmParseError(SFGMError, ValueError):
    def __init__(self, message, lineno):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class TraceError(SFGMError, ValueError):
    pass
