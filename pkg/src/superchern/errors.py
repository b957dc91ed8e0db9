"""Exception and warning types shared across the package."""


class SuperchernError(Exception):
    """Base class for all package-specific errors."""


class ChartMismatchError(SuperchernError):
    """Operands live on different charts or have incompatible rank/grading."""


class ParityError(SuperchernError):
    """An element violates a required total-parity constraint."""


class ParityWarning(UserWarning):
    """Diagnostic for parity violations that are tolerated by default."""


class ValidationWarning(UserWarning):
    """Diagnostic for hermiticity/parity checks that run in warn mode."""


class ClosednessError(SuperchernError):
    """A form required to be closed has a significant exterior derivative."""

    def __init__(self, message, residual):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class CycleError(SuperchernError):
    """A coordinate cycle descriptor does not match the chart."""


class NotInvertibleError(SuperchernError):
    """The degree-0 term has no spectral gap where one is required."""

    def __init__(self, message, min_gap):
        super().__init__(f"{message} (min gap {min_gap:.3e})")
        self.min_gap = min_gap


class StabilizerInsufficientError(SuperchernError):
    """A stabilizer map fails the pointwise surjectivity requirement."""


class NonConstantRankError(SuperchernError):
    """The kernel of the degree-0 term jumps rank across the grid."""

    def __init__(self, message, histogram):
        super().__init__(f"{message} (rank histogram {histogram})")
        self.histogram = histogram


class NonSmoothKernelError(SuperchernError):
    """A smooth global frame for the kernel bundle could not be aligned."""


class GapError(SuperchernError):
    """Spectrum enters the forbidden window of a parametrix construction."""

    def __init__(self, message, offending):
        super().__init__(f"{message} (offending eigenvalues {offending})")
        self.offending = offending


class SceneError(SuperchernError):
    """A scene file or payload cannot be decoded."""
