"""Experiment configs, the run loop, and report bundles."""

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError as SchemaError, field_validator

from ..analyses import get_analysis
from ..analyses.base import STAGES, AnalysisResult
from .broadness import regularize_shading
from .errors import KakeyaLabError, ReportIOError, ValidationError
from .generators import FamilySpec, SlabFamily, as_spec, generate_family, shade_family
from .volumes import besicovitch_gain

SCHEMA_VERSION = 1


class ShadingSpec(BaseModel):
    """How each body is shaded before the analyses see it."""

    model_config = ConfigDict(extra="forbid")

    mode: Literal["full", "random", "two_ends"] = "full"
    lam: float = Field(default=1.0, gt=0.0, le=1.0)
    cells_per_delta: float = Field(default=4.0, ge=2.0, description="Grid spacing h = delta / cells_per_delta")
    regularize: bool = False


class AnalysisSpec(BaseModel):
    """One named check with its parameters; `gate` decides whether it affects the exit code."""

    model_config = ConfigDict(extra="forbid")

    name: str
    label: Optional[str] = Field(default=None, description="Section name in the report; defaults to `name`")
    params: Dict[str, Any] = Field(default_factory=dict)
    gate: bool = True
    enabled: bool = True
    family: Optional[FamilySpec] = None
    shading: Optional[ShadingSpec] = None

    @property
    def section(self) -> str:
        return self.label or self.name


class OutputSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    directory: str = "reports"
    stem: Optional[str] = None
    formats: List[Literal["json", "csv"]] = Field(default_factory=lambda: ["json", "csv"])


class ExperimentConfig(BaseModel):
    """A complete, seed-determined experiment."""

    model_config = ConfigDict(extra="forbid")

    schema_version: int = SCHEMA_VERSION
    name: str = "experiment"
    seed: int = 0
    family: Optional[FamilySpec] = None
    shading: ShadingSpec = Field(default_factory=ShadingSpec)
    analyses: List[AnalysisSpec] = Field(default_factory=list)
    output: OutputSpec = Field(default_factory=OutputSpec)
    threads: int = Field(default=1, ge=1)

    @field_validator("schema_version")
    @classmethod
    def _supported(cls, value: int) -> int:
        if value != SCHEMA_VERSION:
            raise ValueError(f"Unsupported schema_version {value}, expected {SCHEMA_VERSION}")
        return value

    def with_seed(self, seed: int) -> "ExperimentConfig":
        """Same experiment with every seed replaced."""
        data = self.model_dump()
        data["seed"] = seed
        if data.get("family"):
            data["family"]["seed"] = seed
        for spec in data["analyses"]:
            if spec.get("family"):
                spec["family"]["seed"] = seed
        return ExperimentConfig(**data)


def _schema_message(error: SchemaError) -> str:
    first = error.errors()[0]
    where = ".".join(str(part) for part in first["loc"])
    return f"{where}: {first['msg']}" if where else first["msg"]


def as_config(config: Union[ExperimentConfig, dict]) -> ExperimentConfig:
    if isinstance(config, ExperimentConfig):
        return config
    try:
        return ExperimentConfig(**config)
    except SchemaError as e:
        raise ValidationError(f"Invalid experiment config: {_schema_message(e)}", "Check the config against schema_version 1")


def load_config(path: Path) -> ExperimentConfig:
    """Read and validate an experiment JSON file.

    Raises:
        ReportIOError: If the file cannot be read
        ValidationError: If it is not a valid config
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as e:
        raise ReportIOError(f"Could not read config ({e})", path)
    except json.JSONDecodeError as e:
        raise ValidationError(f"Config is not valid JSON: {e}", str(path))
    return as_config(data)


# -- bundles ----------------------------------------------------------------------------------


@dataclass
class ReportBundle:
    """All analysis sections of one run, in config order."""

    name: str
    seed: int
    sections: List[AnalysisResult] = field(default_factory=list)
    created: str = ""
    schema_version: int = SCHEMA_VERSION

    @property
    def exit_code(self) -> int:
        for section in self.sections:
            if section.error is not None:
                return int(section.error["exit_code"])
        if any(section.gated and section.passed is False for section in self.sections):
            return 2
        return 0

    def failures(self) -> List[str]:
        return [s.name for s in self.sections if s.error is not None or (s.gated and s.passed is False)]

    def rows(self) -> List[dict]:
        """Inequality rows of every section, flattened for CSV."""
        rows = []
        for section in self.sections:
            for row in section.rows:
                rows.append({"section": section.name, **row})
        return rows

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "name": self.name,
            "seed": self.seed,
            "created": self.created,
            "exit_code": self.exit_code,
            "failures": self.failures(),
            "sections": [s.to_dict() for s in self.sections],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ReportBundle":
        if data.get("schema_version") != SCHEMA_VERSION:
            raise ValidationError(f"Unsupported report schema_version {data.get('schema_version')}")
        return cls(
            name=data.get("name", ""),
            seed=int(data.get("seed", 0)),
            sections=[AnalysisResult.from_dict(s) for s in data.get("sections", [])],
            created=data.get("created", ""),
        )


# -- run loop ---------------------------------------------------------------------------------


def _family_key(spec: FamilySpec, shading: Optional[ShadingSpec]) -> str:
    return spec.model_dump_json() + "|" + (shading.model_dump_json() if shading else "")


def prepare_family(family: Any, shading: ShadingSpec, seed: int) -> Any:
    """Shade every body, then cut shadings down to regular ones when asked."""
    shadings = shade_family(family, shading.mode, shading.lam, seed, cells_per_delta=shading.cells_per_delta)
    if shading.regularize:
        bodies = family.slabs if isinstance(family, SlabFamily) else list(family)
        shadings = {i: regularize_shading(bodies[i], s, family.delta) for i, s in shadings.items()}
    return family.with_shadings(shadings)


def _materialize(config: ExperimentConfig, plan: Sequence[Tuple[AnalysisSpec, Any]]) -> Dict[int, Any]:
    """Generate and shade every family the plan needs, once each."""
    cache: Dict[str, Any] = {}
    inputs: Dict[int, Any] = {}
    for position, (spec, analysis) in enumerate(plan):
        if not analysis.needs_family:
            continue
        family_spec = spec.family or config.family
        if family_spec is None:
            raise ValidationError(f"Analysis '{spec.name}' needs a family and none is configured")
        shading = (spec.shading or config.shading) if analysis.needs_shading else None
        key = _family_key(family_spec, shading)
        if key not in cache:
            plain_key = _family_key(family_spec, None)
            if plain_key not in cache:
                cache[plain_key] = generate_family(family_spec)
            cache[key] = cache[plain_key] if shading is None else prepare_family(cache[plain_key], shading, config.seed)
        inputs[position] = cache[key]
    return inputs


def run_experiment(
    config: Union[ExperimentConfig, dict],
    options: Optional[Dict[str, dict]] = None,
    threads: Optional[int] = None,
) -> ReportBundle:
    """Run every enabled analysis: generation and shading first, then by stage.

    Analyses in one stage run on a thread pool; sections keep config order.
    Errors raised by an analysis are recorded in its section.

    Raises:
        ValidationError: If the config or an analysis' parameters are invalid
    """
    config = as_config(config)
    workers = int(threads or config.threads)
    options = options or {}
    plan = []
    for spec in config.analyses:
        if spec.enabled:
            plan.append((spec, get_analysis(spec.name)(spec.params, options, workers)))
    logger.info(f"Running experiment '{config.name}' with {len(plan)} analyses (seed {config.seed})")

    inputs = _materialize(config, plan)
    results: Dict[int, AnalysisResult] = {}

    def run_one(position: int) -> AnalysisResult:
        spec, analysis = plan[position]
        try:
            result = analysis.execute(inputs.get(position), config.seed)
        except KakeyaLabError as e:
            logger.error(f"Analysis '{spec.section}' failed: {e.message}")
            result = AnalysisResult.from_error(spec.section, e)
        result.name = spec.section
        result.gated = spec.gate
        return result

    stages = sorted({analysis.stage for _, analysis in plan})
    for stage in stages:
        positions = [i for i, (_, analysis) in enumerate(plan) if analysis.stage == stage]
        logger.info(f"Stage {stage} ({STAGES.get(stage, 'other')}): {len(positions)} analyses")
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for position, result in zip(positions, pool.map(run_one, positions)):
                results[position] = result

    bundle = ReportBundle(
        name=config.name,
        seed=config.seed,
        sections=[results[i] for i in range(len(plan))],
        created=datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )
    logger.info(f"Experiment '{config.name}' finished with exit code {bundle.exit_code}")
    return bundle


# -- sweeps -----------------------------------------------------------------------------------


@dataclass
class SweepResult:
    analysis: str
    rows: List[dict]
    monotone: bool

    def series(self) -> List[Tuple[float, float]]:
        return [(row["delta"], row["ratio"]) for row in self.rows]

    def to_dict(self) -> dict:
        return {"analysis": self.analysis, "monotone": self.monotone, "rows": self.rows}


def increasing_with_slack(values: Sequence[float], allowed: int = 1, tolerance: float = 0.05) -> bool:
    """Strictly increasing, except for at most `allowed` steps that drop by under `tolerance`."""
    misses = 0
    for before, after in zip(values, values[1:]):
        if after > before:
            continue
        if after < (1.0 - tolerance) * before:
            return False
        misses += 1
    return misses <= allowed


def sweep(
    config: Union[ExperimentConfig, dict],
    analysis: str,
    deltas: Sequence[float],
    options: Optional[Dict[str, dict]] = None,
    threads: Optional[int] = None,
) -> SweepResult:
    """Run one analysis of the config at each δ (coarse to fine), one row per δ.

    Raises:
        ValidationError: If the config has no family or no such analysis
    """
    config = as_config(config)
    specs = [s for s in config.analyses if analysis in (s.name, s.label)]
    if not specs:
        raise ValidationError(f"Analysis '{analysis}' is not in the config")
    spec = specs[0]
    base = spec.family or config.family
    if base is None:
        raise ValidationError("A sweep needs a family to rescale")

    rows = []
    for delta in sorted(deltas, reverse=True):
        family = as_spec({**base.model_dump(), "delta": float(delta)})
        single = config.model_copy(
            update={"family": family, "analyses": [spec.model_copy(update={"family": None, "enabled": True})]}
        )
        bundle = run_experiment(single, options, threads)
        section = bundle.sections[0]
        if section.error is not None:
            raise ValidationError(f"Sweep step at delta={delta} failed: {section.error['message']}")
        row = dict(section.rows[0]) if section.rows else {"delta": delta, "ratio": math.nan}
        row["delta"] = float(delta)
        row["gain"] = besicovitch_gain(delta) if delta < math.exp(-1) else math.nan
        rows.append(row)
        logger.debug(f"Sweep {analysis} delta={delta:.4g}: ratio {row.get('ratio')}")
    monotone = increasing_with_slack([row["ratio"] for row in rows])
    logger.info(f"Sweep of {analysis} over {len(rows)} scales: monotone={monotone}")
    return SweepResult(analysis, rows, monotone)
