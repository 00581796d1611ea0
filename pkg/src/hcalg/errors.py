"""Exception hierarchy shared by every module."""


class HcalgError(Exception):
    """Base class for all package errors."""


class SpecError(HcalgError, ValueError):
    """A configuration or input object is malformed."""


class HorizonError(HcalgError):
    """The requested computation needs indices beyond the materialised horizon.

    Raised instead of silently truncating.  The CLI maps it to the
    "inconclusive" exit status.
    """


class BudgetExhausted(HcalgError):
    """A search ran out of its scan budget without finding a certificate."""


class NumericalError(HcalgError, ArithmeticError):
    """A coefficient became non-finite or a certificate is numerically degenerate."""


class InconclusiveError(HcalgError):
    """The verification could neither confirm nor refute the claim."""
