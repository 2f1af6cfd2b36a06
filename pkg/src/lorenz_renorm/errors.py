"""Exception hierarchy shared by all modules.

Every exception carries the data needed to diagnose the failure
(offending point, bracket values, iteration trace) as attributes,
so callers such as the CLI can serialize them.
"""

from __future__ import annotations

from typing import Any


class RenormError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.details = details

    def to_dict(self) -> dict:
        out = {"type": type(self).__name__, "message": str(self)}
        for key, value in self.details.items():
            if key == "trace":
                continue
            out[key] = _jsonable(value)
        return out


def _jsonable(value):
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if hasattr(value, "item"):
        return value.item()
    if isinstance(value, (str, int, float, bool)) or value is None:
        return value
    return repr(value)


class UsageError(RenormError, ValueError):
    """Invalid arguments (order out of range, empty grids, disjoint domains)."""


class ConfigError(UsageError):
    exit_code = 2


class DomainError(RenormError, ValueError):
    """A point lies outside the domain of a function representation."""


class ConstructionError(RenormError, ValueError):
    """A sampled function returned a non-finite value."""


class CompositionError(DomainError):
    """The inner function's range escapes the outer function's domain."""


class BranchError(DomainError):
    """Negative argument handed to the real rho-th root."""


class SingularDerivativeError(RenormError, ArithmeticError):
    """A derivative vanishes where a nonlinearity is requested."""


class PreconditionError(RenormError, ValueError):
    """Input violates a structural precondition (e.g. monotonicity)."""


class RangeError(RenormError, ValueError):
    """Target value outside the range of a monotone function."""


class BracketError(RenormError):
    """No sign change on a bracket that should contain a root."""

    exit_code = 3


class InconsistentInputError(BracketError):
    """Sign conditions guaranteed for admissible input do not hold."""


class NonConvergenceError(RenormError):
    """Iteration cap reached; the partial trace is attached as ``trace``."""

    exit_code = 4


class InvariantError(RenormError):
    """A monitored invariant failed at a given iterate."""

    exit_code = 4


class NotRenormalizableError(RenormError):
    """An orbit used by the renormalization leaves a branch domain."""


class VerificationError(RenormError):
    exit_code = 5


class BlowUpError(RenormError, ArithmeticError):
    """A comparison bound has a non-positive denominator and is vacuous."""


class SchemaError(ConfigError):
    """A stored result file is unreadable or does not match the schema."""
