"""
Error hierarchy for the lab.

Every error carries an exit code and a detail message, so the CLI can turn
it into a process exit status plus a diagnostic JSON file.
"""
from typing import Any, Dict, Optional


class LabError(Exception):
    """Base class for all lab failures."""

    exit_code: int = 1

    def __init__(self, detail: str, context: Optional[Dict[str, Any]] = None):
        super().__init__(detail)
        self.detail = detail
        self.context = context or {}

    def to_dict(self) -> Dict[str, Any]:
        return {
            "error": type(self).__name__,
            "detail": self.detail,
            "exit_code": self.exit_code,
            "context": self.context,
        }


class UsageError(LabError, ValueError):
    """Invalid arguments, schema violations or unknown experiments."""

    exit_code = 2


class OracleError(LabError, ValueError):
    """Malformed oracle construction or a query of the wrong dimension."""


class NumericalError(LabError):
    """A numerical hard error; signals a bug or a violated caller contract."""


class CertificationError(NumericalError):
    """A grid certificate could not be established."""


class ContractViolation(NumericalError):
    """Budgets exceeded or a probability-zero degeneracy was hit."""


class InfeasibleProblem(NumericalError):
    """The moment LP is infeasible or the duality gap is too large."""
