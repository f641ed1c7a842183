"""Exception hierarchy shared by every module.

Each class carries a short ``code`` that the command line maps to an exit
status: configuration problems exit with 2, runtime estimator failures with 3.
"""


class SLEError(Exception):
    code = "ERROR"
    exit_status = 3


class ParamError(SLEError, ValueError):
    code = "PARAM"
    exit_status = 2


class DomainError(SLEError, ValueError):
    code = "DOMAIN"
    exit_status = 2


class SwallowedError(SLEError):
    """A point was absorbed by the hull during a slit step."""

    code = "SWALLOWED"


class DeadPointError(SLEError):
    code = "DEAD_POINT"


class TargetSwallowedEarly(SLEError):
    code = "TARGET_SWALLOWED_EARLY"


class WalkerBudgetExceeded(SLEError):
    code = "WALKER_BUDGET_EXCEEDED"


class HorizonError(SLEError):
    code = "HORIZON"


class ResolutionError(SLEError):
    code = "RESOLUTION"


class StarvedError(SLEError):
    code = "STARVED"


class TraceFormatError(SLEError):
    code = "FORMAT"
