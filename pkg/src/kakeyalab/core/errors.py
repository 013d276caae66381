"""Exception hierarchy and process exit codes."""

from typing import Any, Dict, Optional

EXIT_CODES = {
    0: "All pass-gated checks passed",
    1: "Unexpected error",
    2: "Check failure",
    3: "Validation failed",
    4: "Statistical failure",
    5: "I/O failure",
    6: "Grid resolution error",
}


class KakeyaLabError(Exception):
    """Base class for all kakeyalab errors."""

    exit_code: int = 1

    def __init__(self, message: str, suggestion: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.suggestion = suggestion

    def to_dict(self) -> Dict[str, Any]:
        """Render the error the way core functions report failures."""
        return {
            "status": "error",
            "error": type(self).__name__,
            "message": self.message,
            "suggestion": self.suggestion,
            "exit_code": self.exit_code,
        }


class ValidationError(KakeyaLabError):
    """Parameter out of range or schema violation."""

    exit_code = 3


class GridMismatchError(ValidationError):
    """Shadings were measured on different grids."""


class EmptyCandidatesError(ValidationError):
    """A candidate family (or slab net) came out empty."""


class ResolutionError(KakeyaLabError):
    """Voxel grid too coarse for the thickness being measured."""

    exit_code = 6


class ExtentError(ResolutionError):
    """A body leaves the voxel grid."""


class StatisticalFailure(KakeyaLabError):
    """Randomized construction did not verify within its round budget."""

    exit_code = 4

    def __init__(self, message: str, rounds: int, suggestion: Optional[str] = None):
        super().__init__(message, suggestion)
        self.rounds = rounds


class VerificationError(KakeyaLabError):
    """A factoring conclusion needed a constant above the cap."""

    exit_code = 2

    def __init__(
        self,
        conclusion: str,
        value: float,
        cap: float,
        witness: Optional[Dict[str, Any]] = None,
    ):
        super().__init__(
            f"Conclusion {conclusion} needs K = {value:.4g} > cap {cap:.4g}",
            "Raise factoring.k_cap or inspect the witness body",
        )
        self.conclusion = conclusion
        self.value = value
        self.cap = cap
        self.witness = witness

    def to_dict(self) -> Dict[str, Any]:
        data = super().to_dict()
        data.update(
            {
                "conclusion": self.conclusion,
                "value": self.value,
                "cap": self.cap,
                "witness": self.witness,
            }
        )
        return data


class ContractViolation(KakeyaLabError):
    """An algorithm broke a guarantee it is supposed to keep."""

    exit_code = 1


class ReportIOError(KakeyaLabError):
    """Reading or writing a report file failed."""

    exit_code = 5

    def __init__(self, message: str, path: Any):
        super().__init__(f"{message}: {path}", "Check the output directory permissions")
        self.path = str(path)
