"""
Exception types raised by gigmatch services.

Validation findings are returned as data (ValidationReport); the exceptions
below are reserved for calls that cannot proceed.
"""
from typing import Dict, Optional


class GigmatchError(Exception):
    "Base class for every error raised by gigmatch."
    pass


class ParameterError(GigmatchError):
    "Raised when a user-supplied parameter is outside its legal range."
    pass


class ContractError(GigmatchError):
    "Raised when a caller breaks an operation's precondition."
    pass


class InstanceFormatError(GigmatchError):
    "Raised when an instance document cannot be parsed."
    pass


class InstanceValidationError(GigmatchError):
    "Raised when an operation needs a valid instance and got an invalid one."

    def __init__(self, report):
        self.report = report
        rules = ', '.join(sorted({v.rule for v in report.violations}))
        super().__init__(f"Instance is invalid ({len(report.violations)} violations: {rules})")


class SolverError(GigmatchError):
    "Raised when the simplex solver cannot certify an optimum."

    def __init__(self, message: str, diagnostics: Optional[Dict] = None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class SizeBudgetError(GigmatchError):
    "Raised when an exact computation would exceed its configured state budget."

    def __init__(self, what: str, requested: float, budget: float, hint: str = ''):
        self.what = what
        self.requested = requested
        self.budget = budget
        message = f"{what} needs {requested:.0f} states, budget is {budget:.0f}"
        if hint:
            message = f"{message}; {hint}"
        super().__init__(message)
