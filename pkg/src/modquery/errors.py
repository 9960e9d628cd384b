"""Exception hierarchy shared by all modquery modules.

Each class maps onto one CLI exit code (see :mod:`modquery.cli`).
"""


class ModqueryError(Exception):
    """Base class for all library errors."""


class FormatError(ModqueryError, ValueError):
    """Malformed input file (edge list, label file, index)."""


class IndexFormatError(FormatError):
    """Index file cannot be decoded."""


class ChecksumError(IndexFormatError):
    """Index file failed its CRC-64 check (truncated or corrupted)."""


class VersionError(IndexFormatError):
    """Index file written by an unsupported format version."""


class FingerprintError(IndexFormatError):
    """Index was built on a different graph than the one supplied."""


class PreconditionError(ModqueryError, ValueError):
    """Inputs are well-formed but violate an operation's precondition."""


class ConvergenceError(ModqueryError, RuntimeError):
    """Iterative solver did not converge within its iteration cap."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
