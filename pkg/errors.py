"""
Error types for the CU robust toolkit.

Every error raised by the library derives from CuError and carries:
- a stable machine-readable code
- a human message
- optional details (dimensions, offending values)
- the process exit code the CLI maps it to
"""

from __future__ import annotations

from typing import Any, Dict, Optional


class CuError(Exception):
    """Base class for all toolkit errors."""

    code = "cu_error"
    exit_code = 1

    def __init__(self, message: str = "", details: Optional[Dict[str, Any]] = None):
        super().__init__(message or self.code)
        self.message = message or self.code
        self.details = details or {}

    def to_dict(self) -> Dict[str, Any]:
        """Structured diagnostic for the error stream."""
        return {
            "error": self.code,
            "message": self.message,
            "details": self.details,
        }


class DimensionMismatch(CuError):
    code = "dimension_mismatch"


class NotSquare(CuError):
    code = "not_square"


class NotSymmetric(CuError):
    code = "not_symmetric"


class NotPsd(CuError):
    code = "not_psd"


class InvalidProcess(CuError):
    """Process data violates a construction invariant."""
    code = "invalid_process"


class ModeUnsupportedForDimension(CuError):
    code = "mode_unsupported_for_dimension"


class HorizonTooLarge(CuError):
    code = "horizon_too_large"


class LpInfeasible(CuError):
    code = "lp_infeasible"


class LpUnbounded(CuError):
    code = "lp_unbounded"


class NumericalFailure(CuError):
    code = "numerical_failure"


class CutLimitExceeded(CuError):
    code = "cut_limit_exceeded"


class InfeasibleMomentSet(CuError):
    code = "infeasible_moment_set"


class KnapsackInfeasible(CuError):
    code = "knapsack_infeasible"


class SchemaError(CuError):
    """Instance or config document does not match the expected schema."""
    code = "schema_error"


class ReformulationUnsupported(CuError):
    code = "reformulation_unsupported"


class UsageError(CuError):
    """Command-line misuse; exits with status 2."""
    code = "usage_error"
    exit_code = 2


class UnknownVerb(UsageError):
    code = "unknown_verb"


class MissingInput(UsageError):
    code = "missing_input"


class BadOverride(UsageError):
    code = "bad_override"
