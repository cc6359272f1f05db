"""Exception hierarchy shared by all modules.

Each class maps to a CLI exit code through ``exit_code``.
"""


class RMFError(Exception):
    exit_code = 2


class InvalidArgument(RMFError, ValueError):
    pass


class OutOfRange(RMFError, IndexError):
    pass


class InvalidSpec(RMFError, ValueError):
    pass


class Unsupported(RMFError, ValueError):
    pass


class BudgetExceeded(RMFError):
    """An exact enumeration would exceed its configured budget."""

    exit_code = 3


class InternalConsistencyError(RMFError, AssertionError):
    """A result that must be exact failed its own integrality/consistency check."""

    exit_code = 1
