#!/usr/bin/env python3
"""
Validation module for the ACMCA simulator.
Provides the error hierarchy shared by every module and the validators
used to check experiment configurations before a run starts.
"""

import math
from typing import Any, Iterable, Optional, Sequence, Tuple

# Constants
VALID_MATRIX_KINDS = ("bernoulli", "gaussian", "stochastic")
VALID_MODES = ("uniform", "nonuniform", "adaptive")
VALID_SOLVERS = ("bp", "omp")
MAX_DIMENSION = 100000
MAX_TRIALS = 1000000


class ValidationError(Exception):
    """Base exception for invalid inputs, carrying the offending field."""
    def __init__(self, message: str, field: str = None):
        self.message = message
        self.field = field
        super().__init__(self.message)


class ConfigError(ValidationError):
    """Experiment configuration is invalid."""


class InvalidPulseError(ValidationError):
    """Programming pulse parameters are out of range."""


class DimensionError(ValidationError):
    """Array or vector dimensions do not agree."""


class CellIndexError(ValidationError, IndexError):
    """Row or column index is outside the crossbar."""


class GatedLineError(ValidationError):
    """Operation addressed a row or column that is powered down."""


class EmptySelectionError(ValidationError):
    """Winner-takes-all was asked to choose among zero enabled rows."""


class UndefinedMetricError(ValidationError):
    """Every frame was skipped, so the error metric has no value."""


class StaleMatrixError(ValidationError):
    """The realized matrix no longer matches the crossbar it came from."""


class ConfigValidator:
    """Field validators for experiment configurations."""

    @staticmethod
    def validate_positive_int(value: Any, field: str,
                              maximum: int = MAX_DIMENSION) -> Tuple[bool, Optional[str]]:
        """
        Validate a strictly positive integer.

        Args:
            value: Value to validate
            field: Field name used in the error message
            maximum: Largest accepted value

        Returns:
            Tuple of (is_valid, error_message)
        """
        if isinstance(value, bool) or not isinstance(value, int):
            return False, f"{field} must be a whole number"
        if value < 1:
            return False, f"{field} must be at least 1"
        if value > maximum:
            return False, f"{field} cannot exceed {maximum}"
        return True, None

    @staticmethod
    def validate_fraction(value: Any, field: str, allow_zero: bool = True,
                          allow_one: bool = True) -> Tuple[bool, Optional[str]]:
        """
        Validate a real number in [0, 1] (endpoints optional).

        Args:
            value: Value to validate
            field: Field name used in the error message
            allow_zero: Whether 0 is accepted
            allow_one: Whether 1 is accepted

        Returns:
            Tuple of (is_valid, error_message)
        """
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            return False, f"{field} must be a number"
        if not math.isfinite(value):
            return False, f"{field} must be finite"
        low_ok = value > 0 or (allow_zero and value == 0)
        high_ok = value < 1 or (allow_one and value == 1)
        if not (low_ok and high_ok):
            lo = "[0" if allow_zero else "(0"
            hi = "1]" if allow_one else "1)"
            return False, f"{field} must lie in {lo}, {hi}"
        return True, None

    @staticmethod
    def validate_nonnegative(value: Any, field: str,
                             allow_inf: bool = False) -> Tuple[bool, Optional[str]]:
        """
        Validate a nonnegative real number.

        Args:
            value: Value to validate
            field: Field name used in the error message
            allow_inf: Whether +inf is accepted

        Returns:
            Tuple of (is_valid, error_message)
        """
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            return False, f"{field} must be a number"
        if math.isnan(value):
            return False, f"{field} must not be NaN"
        if math.isinf(value) and not allow_inf:
            return False, f"{field} must be finite"
        if value < 0:
            return False, f"{field} cannot be negative"
        return True, None

    @staticmethod
    def validate_m_list(m_list: Sequence[int], n: int) -> Tuple[bool, Optional[str]]:
        """
        Validate the list of measurement counts against the signal length.

        Args:
            m_list: Measurement counts to sweep
            n: Signal length

        Returns:
            Tuple of (is_valid, error_message)
        """
        if not m_list:
            return False, "m_list must contain at least one value"
        for m in m_list:
            ok, msg = ConfigValidator.validate_positive_int(m, "m_list")
            if not ok:
                return False, msg
            if m > n:
                return False, f"m_list entry {m} exceeds n = {n}"
        if len(set(m_list)) != len(m_list):
            return False, "m_list contains duplicate values"
        return True, None

    @staticmethod
    def validate_choice(value: str, field: str,
                        choices: Iterable[str]) -> Tuple[bool, Optional[str]]:
        """
        Validate a keyword against a fixed set of choices (case-insensitive).

        Args:
            value: Keyword to validate
            field: Field name used in the error message
            choices: Accepted keywords

        Returns:
            Tuple of (is_valid, error_message)
        """
        choices = tuple(choices)
        if not isinstance(value, str) or not value.strip():
            return False, f"{field} is required"
        if value.strip().lower() not in choices:
            return False, f"Invalid {field}. Must be one of: {', '.join(choices)}"
        return True, None

    @staticmethod
    def validate_budget(e_budget: float, e_critical: float,
                        total_budget: Optional[float]) -> Tuple[bool, Optional[str]]:
        """
        Validate energy-budget thresholds (0 < e_critical < e_budget).

        Args:
            e_budget: Per-iteration energy allowance in pJ
            e_critical: Critical per-iteration energy in pJ
            total_budget: Optional cap for the whole run in pJ

        Returns:
            Tuple of (is_valid, error_message)
        """
        if not isinstance(e_critical, (int, float)) or not e_critical > 0:
            return False, "e_critical_pJ must be greater than 0"
        if not isinstance(e_budget, (int, float)) or not e_budget > e_critical:
            return False, "e_budget_pJ must be greater than e_critical_pJ"
        if total_budget is not None:
            ok, msg = ConfigValidator.validate_nonnegative(total_budget, "total_budget_pJ")
            if not ok:
                return False, msg
        return True, None


def require(check: Tuple[bool, Optional[str]], field: str,
            error: type = ConfigError) -> None:
    """Raise ``error`` naming ``field`` when a validator tuple reports failure."""
    ok, message = check
    if not ok:
        raise error(message, field)
