"""Exception hierarchy.

Every error carries the process exit code the CLI maps it to:
2 flag/config error, 3 input error, 4 missing prerequisite table,
5 internal numeric failure.
"""

from __future__ import annotations

from typing import Any


class ChangePointError(Exception):
    exit_code = 5


# ============================
# Configuration (exit 2)
# ============================
class ConfigError(ChangePointError, ValueError):
    exit_code = 2


class InvalidLength(ConfigError):
    pass


class InvalidParameter(ConfigError):
    pass


class InconsistentNormalization(ConfigError):
    pass


class UnsupportedOrder(ConfigError):
    pass


class StudyFileError(ConfigError):
    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


# ============================
# Input (exit 3)
# ============================
class InputError(ChangePointError):
    exit_code = 3


# ============================
# Missing table entry (exit 4)
# ============================
class MissingQuantile(ChangePointError, KeyError):
    exit_code = 4

    def __init__(self, key: Any):
        super().__init__(key)
        self.key = key

    def __str__(self) -> str:
        return f"no critical value for {self.key}"


# ============================
# Numerics (exit 5)
# ============================
class NumericError(ChangePointError, ArithmeticError):
    exit_code = 5


class EmbeddingNotPSD(NumericError):
    pass


class QuadratureNonConvergence(NumericError):
    pass
