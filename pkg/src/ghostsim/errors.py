"""Exception types shared across the package.

Each class carries the process exit code the command line front end uses
when the error escapes a subcommand.
"""


class GhostSimError(Exception):
    exit_code = 1


class ValidationError(GhostSimError, ValueError):
    """Invalid parameter or configuration."""

    exit_code = 2


class FormatError(GhostSimError, OSError):
    """Malformed or unreadable file."""

    exit_code = 3
    code = "format"


class MagicMismatchError(FormatError):
    code = "bad-magic"


class VersionMismatchError(FormatError):
    code = "bad-version"


class TruncatedFileError(FormatError):
    code = "truncated"


class ConvergenceError(GhostSimError, ArithmeticError):
    """Iterative numerical procedure did not converge."""

    exit_code = 4
