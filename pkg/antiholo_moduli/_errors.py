from __future__ import annotations

from typing import Any, Mapping


class ModuliError(Exception):
    """Base class for all errors raised by this package.

    Every error has a short machine-readable ``kind`` and an optional mapping of
    ``details`` (worst residual, last iterate, offending parameter, ...). The CLI prints
    ``to_json()`` to stderr and exits with status 1.
    """

    kind = "error"

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details: dict[str, Any] = dict(details)

    def to_json(self) -> dict[str, Any]:
        return {
            "error": self.kind,
            "message": self.message,
            "details": _jsonable(self.details),
        }


def _jsonable(details: Mapping[str, Any]) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for key, value in details.items():
        if isinstance(value, complex):
            out[key] = [value.real, value.imag]
        elif isinstance(value, (int, float, str, bool)) or value is None:
            out[key] = value
        else:
            out[key] = str(value)
    return out


# ---------------------------------------------------------------------------
# Series and input errors
# ---------------------------------------------------------------------------
class TruncationOrderError(ModuliError, ValueError):
    kind = "truncation-order"


class SingularSeriesError(ModuliError, ValueError):
    kind = "singular-series"


class DegeneracyError(ModuliError, ValueError):
    kind = "degeneracy"


class DomainError(ModuliError, ValueError):
    kind = "domain"


class MisuseError(ModuliError, TypeError):
    kind = "misuse"


class DataError(ModuliError, ValueError):
    kind = "data"


class ConfigError(ModuliError, ValueError):
    kind = "config"


# ---------------------------------------------------------------------------
# Dynamics and charts
# ---------------------------------------------------------------------------
class NewtonError(ModuliError, RuntimeError):
    kind = "newton"


class PoleError(ModuliError, ValueError):
    kind = "pole"


class InverseError(ModuliError, RuntimeError):
    kind = "inverse"


class InfinitePeriodError(ModuliError, ValueError):
    kind = "infinite-period"


class BranchError(ModuliError, ValueError):
    kind = "branch"


class GenericityError(ModuliError, ValueError):
    kind = "genericity"


class PreparationError(ModuliError, RuntimeError):
    kind = "preparation"


# ---------------------------------------------------------------------------
# Fatou coordinates and moduli
# ---------------------------------------------------------------------------
class GeometryError(ModuliError, ValueError):
    kind = "geometry"


class EscapeError(ModuliError, RuntimeError):
    kind = "escape"


class FatouConvergenceError(ModuliError, RuntimeError):
    kind = "fatou-convergence"


class ResolutionError(ModuliError, RuntimeError):
    kind = "resolution"


class ComparisonError(ModuliError, ValueError):
    kind = "comparison"


class ClassificationError(ModuliError, RuntimeError):
    kind = "classification"


class NormalizationMismatchError(ModuliError, ValueError):
    kind = "normalization-mismatch"


class CriterionError(ModuliError, RuntimeError):
    kind = "criterion"
