"""Exception hierarchy shared by the whole package.

The CLI maps these onto process exit codes: configuration problems exit
with 2, numeric failures with 3 and violated preconditions with 4.
"""


class PidspaceError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(PidspaceError):
    """Invalid project configuration or malformed input document."""


class NumericsError(PidspaceError):
    """A numeric computation failed (non-convergence, pole hit, ...)."""


class PreconditionError(PidspaceError):
    """An operation was called outside its documented preconditions."""
