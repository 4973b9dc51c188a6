"""Exception hierarchy shared by all koper_slow modules."""


class KoperError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 1


class DomainError(KoperError, ValueError):
    """A parameter lies outside the mathematical domain of an operation."""

    exit_code = 3


class InputError(KoperError, ValueError):
    """Malformed input: bad grids, mismatched shapes, empty boxes."""

    exit_code = 3


class RangeError(KoperError, IndexError):
    """A requested time or state lies outside the sampled support."""

    exit_code = 3


class StatisticsError(KoperError):
    """A statistical test cannot be evaluated (e.g. degenerate samples)."""

    exit_code = 4


class ConvergenceError(KoperError):
    """An iterative method exhausted its iteration budget."""

    exit_code = 4


class NumericalError(KoperError):
    """Singular matrices, non-finite values and similar numerical failures."""

    exit_code = 4


class BlowUpError(NumericalError):
    """The state norm crossed the overflow guard during integration.

    ``step`` is the index of the first offending step and ``time`` its time.
    """

    def __init__(self, message, step=None, time=None):
        super().__init__(message)
        self.step = step
        self.time = time


class ContractionError(KoperError):
    """The Lyapunov-Perron map is not a contraction for the given constants."""

    exit_code = 3

    def __init__(self, message, K=None, gamma=None, rho=None):
        super().__init__(message)
        self.K = K
        self.gamma = gamma
        self.rho = rho


class BoxEscapeError(NumericalError):
    """A fixed-point iterate left the box on which the Lipschitz bound holds."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class ConfigError(KoperError):
    """Invalid run configuration; ``line`` is 1-based when known."""

    exit_code = 2

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
