"""
Error hierarchy and contract checks.

Every raised failure derives from SeizurecastError and carries the exit
code the CLI maps it to:

  1  bad input, configuration, or a violated operation precondition
  2  runtime failure (numeric blow-up, diverging training)

ContractValidationResult collects non-fatal findings over recordings and
window sets so a caller can log warnings and only raise on violations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List


class SeizurecastError(Exception):
    """Base class for all toolkit errors."""

    exit_code: int = 2


class ValidationError(SeizurecastError):
    """Input data or arguments violate a documented invariant."""

    exit_code = 1


class ConfigurationError(ValidationError):
    """Configuration is invalid, incomplete, or references missing inputs."""


class ContractError(ValidationError):
    """An operation was called outside its precondition."""


class DimensionError(ContractError):
    """Tensor or layer shapes do not line up."""


class FitError(ValidationError):
    """A density could not be fitted (e.g. no samples)."""


class GenerationError(ValidationError):
    """A synthetic dataset spec cannot be realized."""


class MetricError(ValidationError):
    """A metric is undefined for the given inputs."""


class NumericError(SeizurecastError):
    """NaN reached a numeric kernel."""


class TrainingError(SeizurecastError):
    """Optimization diverged."""


# ── Contract Validation ──────────────────────────────────────────────────────


@dataclass
class ContractValidationResult:
    ok: bool = True
    violations: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    def violate(self, message: str) -> None:
        self.violations.append(message)
        self.ok = False

    def warn(self, message: str) -> None:
        self.warnings.append(message)

    def raise_for_violations(self, context: str = "") -> None:
        if self.ok:
            return
        prefix = f"{context}: " if context else ""
        raise ValidationError(prefix + "; ".join(self.violations))

