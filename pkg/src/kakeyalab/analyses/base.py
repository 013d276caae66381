"""Base analysis class and the per-section result record."""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Tuple

import numpy as np
from loguru import logger

from ..core.errors import KakeyaLabError, ValidationError
from ..core.family import TubeFamily
from ..core.generators import SlabFamily
from ..core.volumes import InequalityReport

# Stages run in this order; analyses inside one stage are independent.
STAGES = {0: "constants", 1: "factoring", 2: "inequalities"}


def to_plain(value: Any) -> Any:
    """Recursively convert numpy scalars and arrays into JSON-native values."""
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_plain(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


@dataclass
class AnalysisResult:
    """One report section: pass flag, inequality rows and free-form details.

    `passed` is None for report-only analyses.
    """

    name: str
    passed: Optional[bool]
    rows: List[dict] = field(default_factory=list)
    details: Dict[str, Any] = field(default_factory=dict)
    error: Optional[Dict[str, Any]] = None
    gated: bool = True

    @property
    def status(self) -> str:
        if self.error is not None:
            return "error"
        if self.passed is None:
            return "reported"
        return "passed" if self.passed else "failed"

    @classmethod
    def from_error(cls, name: str, error: KakeyaLabError) -> "AnalysisResult":
        return cls(name, False, error=to_plain(error.to_dict()))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "status": self.status,
            "passed": self.passed,
            "gated": self.gated,
            "rows": to_plain(self.rows),
            "details": to_plain(self.details),
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "AnalysisResult":
        return cls(
            name=data["name"],
            passed=data.get("passed"),
            rows=list(data.get("rows", [])),
            details=dict(data.get("details", {})),
            error=data.get("error"),
            gated=bool(data.get("gated", True)),
        )


class BaseAnalysis(ABC):
    """Base class for all named analyses."""

    # Subclasses must define these
    name: str = None
    stage: int = 2
    sections: Tuple[str, ...] = ()
    defaults: Dict[str, Any] = {}
    needs_family: bool = True
    needs_shading: bool = False
    family_types: Tuple[type, ...] = (TubeFamily,)

    def __init__(self, params: Optional[dict] = None, options: Optional[Dict[str, dict]] = None, workers: int = 1):
        """Initialize analysis.

        Args:
            params: Analysis parameters from the experiment config
            options: Calibration sections from settings, keyed by section name
            workers: Thread count for candidate scoring and rasterization

        Raises:
            ValidationError: If a parameter is not known to the analysis
        """
        params = dict(params or {})
        unknown = set(params) - set(self.defaults)
        if unknown:
            raise ValidationError(
                f"Unknown parameters for analysis '{self.name}': {sorted(unknown)}",
                f"Allowed: {sorted(self.defaults)}",
            )
        self.params = {**self.defaults, **params}
        self.options: Dict[str, Any] = {}
        for section in self.sections:
            self.options.update((options or {}).get(section, {}))
        self.options["workers"] = int(workers)

    def execute(self, family: Any, seed: int = 0) -> AnalysisResult:
        """Check the input kind, then run the analysis."""
        if self.needs_family and not isinstance(family, self.family_types):
            expected = " or ".join(t.__name__ for t in self.family_types)
            raise ValidationError(f"Analysis '{self.name}' needs a {expected}, got {type(family).__name__}")
        if self.needs_shading and not family.shadings:
            raise ValidationError(f"Analysis '{self.name}' needs a shaded family")
        self.options["seed"] = int(seed)
        logger.info(f"Running analysis '{self.name}'")
        result = self.run(family, seed)
        logger.info(f"Analysis '{self.name}' {result.status}")
        return result

    @abstractmethod
    def run(self, family: Any, seed: int) -> AnalysisResult:
        """Run the analysis.

        Args:
            family: Generated (and shaded) family, or None when not needed
            seed: Experiment seed

        Returns:
            The report section
        """
        pass

    def result(
        self,
        passed: Optional[bool],
        reports: Iterable[InequalityReport] = (),
        details: Optional[dict] = None,
    ) -> AnalysisResult:
        reports = list(reports)
        details = dict(details or {})
        if reports:
            details.setdefault("inequalities", [r.to_dict() for r in reports])
        return AnalysisResult(self.name, passed, [r.to_row() for r in reports], details)


def all_passed(flags: Iterable[Optional[bool]]) -> Optional[bool]:
    """False if any flag is False, None if all are None, else True."""
    flags = list(flags)
    if any(flag is False for flag in flags):
        return False
    if all(flag is None for flag in flags):
        return None
    return True


SlabOrTube = (TubeFamily, SlabFamily)
