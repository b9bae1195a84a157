"""
GreenLB - Error Codes

Every failure the package reports carries an ``ErrorCode``. The CLI turns
the code into the process exit status and a single stderr line.
"""

from enum import Enum


# ====================================================================== #
# region           ERROR CODES                                            #
# ====================================================================== #

class ErrorCode(Enum):
    """Error codes for policy, model, simulation and results operations."""
    POLICY_SYNTAX = (10, "Policy syntax error")
    UNKNOWN_IDENTIFIER = (11, "Unknown identifier in policy")
    POLICY_EVALUATION = (12, "Policy evaluation failed")
    CONFIG = (20, "Invalid configuration")
    MODEL_LOGIC = (30, "Internal power-state logic error")
    SIMULATION = (31, "Simulation aborted")
    EMPTY_SAMPLE = (40, "No samples to estimate from")
    INSUFFICIENT_DATA = (41, "Not enough data for batch means")
    TRACE = (50, "Inconsistent trace")
    VALIDATION_INPUT = (51, "Invalid validation input")
    RESULTS_FORMAT = (60, "Malformed results table")
    UNKNOWN_ERROR = (99, "Unknown error occurred")

    def __init__(self, code, message):
        self.code = code
        self.message = message

    def __str__(self):
        return f"[ERROR {self.code}] {self.message}"

    def __repr__(self):
        return f"ErrorCode.{self.name}"

# endregion


# ====================================================================== #
# region           EXCEPTIONS                                             #
# ====================================================================== #

class GreenLBError(Exception):
    """Base exception; subclasses pin the ``ErrorCode``.

    Parameters
    ----------
    detail : str
        Human-readable description of what went wrong.
    """

    error_code = ErrorCode.UNKNOWN_ERROR

    def __init__(self, detail=""):
        super().__init__(detail or self.error_code.message)
        self.detail = detail or self.error_code.message

    @property
    def exit_status(self):
        """int: Process exit status for this error."""
        return self.error_code.code

    def one_line(self):
        """Return the machine-parseable single-line form used by the CLI."""
        detail = " ".join(self.detail.split())
        return f"error {self.error_code.code} {self.error_code.name}: {detail}"


class PolicySyntaxError(GreenLBError):
    """Policy text does not match the grammar.

    Parameters
    ----------
    detail : str
        What was expected or found.
    line, column : int
        1-based position of the offending character.
    """

    error_code = ErrorCode.POLICY_SYNTAX

    def __init__(self, detail, line, column):
        super().__init__(f"line {line}, column {column}: {detail}")
        self.line = line
        self.column = column


class UnknownIdentifierError(PolicySyntaxError):
    error_code = ErrorCode.UNKNOWN_IDENTIFIER


class PolicyEvaluationError(GreenLBError):
    error_code = ErrorCode.POLICY_EVALUATION


class ConfigError(GreenLBError):
    error_code = ErrorCode.CONFIG


class ModelLogicError(GreenLBError):
    error_code = ErrorCode.MODEL_LOGIC


class SimulationError(GreenLBError):
    error_code = ErrorCode.SIMULATION


class EmptySampleError(GreenLBError):
    error_code = ErrorCode.EMPTY_SAMPLE


class InsufficientDataError(GreenLBError):
    error_code = ErrorCode.INSUFFICIENT_DATA


class TraceError(GreenLBError):
    error_code = ErrorCode.TRACE


class ValidationInputError(GreenLBError):
    error_code = ErrorCode.VALIDATION_INPUT


class ResultsFormatError(GreenLBError):
    error_code = ErrorCode.RESULTS_FORMAT

# endregion
