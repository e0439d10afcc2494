"""Exception hierarchy shared by the library and the command line.

Every error carries the process exit code the CLI reports for it:
1 for invalid input, 2 for numerical failure and 3 for file I/O.
"""


class CamError(Exception):
    """Base class for camix errors."""

    exit_code = 1


class InputError(CamError, ValueError):
    """Invalid arguments, shapes or parameter combinations."""

    exit_code = 1


class NumericalError(CamError, ArithmeticError):
    """A numerical procedure could not produce a valid result."""

    exit_code = 2


class ConvergenceError(NumericalError):
    """An iterative solver ran out of iterations."""


class InsufficientEdgesError(NumericalError):
    """Fewer lateral edges were detected than sources requested."""

    def __init__(self, detected: int, requested: int):
        self.detected = detected
        self.requested = requested
        super().__init__(
            f"insufficient edges detected ({detected} < K={requested}); "
            "raise the sector count J or lower tau"
        )


class RankDeficientError(NumericalError):
    """The mixing estimate does not have full column rank."""


class DegenerateSectorError(NumericalError):
    """A sector contains only zero vectors."""


class InfeasibleConstraintError(NumericalError):
    """Rejection sampling exhausted its budget."""


class InfiniteSNRError(NumericalError):
    """Signal-to-noise ratio is undefined for zero-trace noise."""


class StorageError(CamError, OSError):
    """Unreadable, missing or malformed files."""

    exit_code = 3
