"""Command-level workflows: each returns a dict with a "status" key."""

import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from loguru import logger
from pydantic import ValidationError as SchemaError

from ..utils.file_manager import ReportFileManager
from ..utils.formatters import json_default
from .errors import KakeyaLabError, ReportIOError, ValidationError
from .experiment import ReportBundle, ShadingSpec, load_config, prepare_family, run_experiment, sweep
from .factoring import factor_convex, factor_slab
from .family import TubeFamily
from .generators import generate_family, load_family, save_family, shade_family


def _merged(options: Optional[Dict[str, dict]], sections: Sequence[str]) -> dict:
    merged: Dict[str, Any] = {}
    for section in sections:
        merged.update((options or {}).get(section, {}))
    return merged


def _write_json(data: dict, path: Path) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(data, indent=2, default=json_default))
    except OSError as e:
        raise ReportIOError(f"Could not write factoring ({e})", path)
    logger.info(f"Factoring saved to: {path}")


def generate_to_file(spec: dict, output: Path, shading: Optional[dict] = None) -> Dict[str, Any]:
    """Generate a family, optionally shade it, and save it as JSON.

    Args:
        spec: FamilySpec fields (kind, delta, seed, params)
        output: Destination JSON path
        shading: Optional ShadingSpec fields

    Returns:
        Dictionary with result status and a short summary
    """
    try:
        family = generate_family(spec)
        if shading is not None:
            family = prepare_family(family, ShadingSpec(**shading), int(spec.get("seed", 0)))
        path = save_family(family, Path(output))
    except KakeyaLabError as e:
        return e.to_dict()
    except SchemaError as e:
        return ValidationError(f"Invalid shading: {e.errors()[0]['msg']}").to_dict()
    return {
        "status": "success",
        "path": str(path),
        "kind": spec.get("kind"),
        "delta": family.delta,
        "count": len(family),
        "shaded": bool(family.shadings),
        "message": f"Generated {len(family)} bodies at delta={family.delta:.4g}",
    }


def analyze_config(
    config_path: Path,
    options: Optional[Dict[str, dict]] = None,
    seed: Optional[int] = None,
    threads: Optional[int] = None,
    output_dir: Optional[Path] = None,
) -> Dict[str, Any]:
    """Run an experiment config and write its report files.

    Returns:
        Dictionary with status, the bundle, written paths and the bundle exit code
    """
    try:
        config = load_config(config_path)
        if seed is not None:
            config = config.with_seed(seed)
        bundle = run_experiment(config, options, threads)
        manager = ReportFileManager(Path(output_dir or config.output.directory), config.output.stem or config.name)
        paths = manager.save_bundle(bundle.to_dict(), bundle.rows(), config.output.formats)
    except KakeyaLabError as e:
        return e.to_dict()
    return {
        "status": "success",
        "bundle": bundle,
        "paths": [str(p) for p in paths],
        "exit_code": bundle.exit_code,
        "failures": bundle.failures(),
    }


def factor_file(
    family_path: Path,
    mode: str = "convex",
    options: Optional[Dict[str, dict]] = None,
    output: Optional[Path] = None,
) -> Dict[str, Any]:
    """Factor a saved tube family from above (convex) or by slabs.

    Slab mode shades unshaded families fully first.
    """
    if mode not in ("convex", "slab"):
        return ValidationError(f"Unknown mode: {mode}. Available: ['convex', 'slab']").to_dict()
    try:
        family = load_family(family_path)
        if not isinstance(family, TubeFamily):
            raise ValidationError("Factoring needs a tube family", "Generate a tube kind, not a slab kind")
        if mode == "convex":
            result = factor_convex(family, family.delta, _merged(options, ("geometry", "wolff", "factoring")))
            summary = {"kept": len(result.kept), "covers": len(result.covers), "achieved_K": result.achieved_K}
        else:
            if not family.shadings:
                cells = float(_merged(options, ("geometry",)).get("cells_per_delta", 4.0))
                family = family.with_shadings(shade_family(family, cells_per_delta=cells))
            result = factor_slab(family, _merged(options, ("geometry", "wolff", "slab_factoring")))
            summary = {"groups": len(result.groups), "retention": result.retention, "passed": result.passed}
        if output is not None:
            _write_json(result.to_dict(), Path(output))
    except KakeyaLabError as e:
        return e.to_dict()
    return {"status": "success", "mode": mode, "summary": summary, "path": str(output) if output else None}


def canonical_report(data: dict) -> str:
    """Report JSON with the timestamp removed, for byte comparison."""
    stripped = {k: v for k, v in data.items() if k != "created"}
    return json.dumps(json.loads(json.dumps(stripped, default=json_default)), sort_keys=True)


def verify_report(
    config_path: Path,
    report_path: Path,
    options: Optional[Dict[str, dict]] = None,
    threads: Optional[int] = None,
) -> Dict[str, Any]:
    """Re-run a config with the report's seed and compare the reports, timestamp excluded.

    Returns:
        Dictionary with status, whether the reports match and the differing sections
    """
    try:
        stored = ReportFileManager.for_report(report_path).load_json()
        ReportBundle.from_dict(stored)
        config = load_config(config_path).with_seed(int(stored.get("seed", 0)))
        fresh = run_experiment(config, options, threads).to_dict()
    except KakeyaLabError as e:
        return e.to_dict()
    matches = canonical_report(fresh) == canonical_report(stored)
    differing: List[str] = []
    if not matches:
        old = {s["name"]: canonical_report(s) for s in stored.get("sections", [])}
        new = {s["name"]: canonical_report(s) for s in fresh["sections"]}
        differing = sorted(name for name in set(old) | set(new) if old.get(name) != new.get(name))
        if not differing:
            differing = ["<header>"]
        logger.warning(f"Report differs in: {differing}")
    return {"status": "success", "matches": matches, "differing": differing, "seed": config.seed}


def query_report(report_path: Path, where: Optional[str] = None) -> Dict[str, Any]:
    """Report rows, optionally filtered with a SQL condition."""
    try:
        manager = ReportFileManager.for_report(report_path)
        header = manager.load_json()
        rows = manager.query_rows(where)
    except KakeyaLabError as e:
        return e.to_dict()
    return {
        "status": "success",
        "name": header.get("name"),
        "seed": header.get("seed"),
        "exit_code": header.get("exit_code"),
        "sections": [{"name": s["name"], "status": s["status"]} for s in header.get("sections", [])],
        "rows": rows,
    }


def sweep_config(
    config_path: Path,
    analysis: str,
    deltas: Sequence[float],
    options: Optional[Dict[str, dict]] = None,
    threads: Optional[int] = None,
    output_dir: Optional[Path] = None,
) -> Dict[str, Any]:
    """Run one analysis over several δ and write `<stem>.<analysis>.sweep.csv` and a .dat series."""
    try:
        config = load_config(config_path)
        result = sweep(config, analysis, deltas, options, threads)
        manager = ReportFileManager(Path(output_dir or config.output.directory), config.output.stem or config.name)
        csv_path = manager.save_rows(result.rows, manager.directory / f"{manager.stem}.{analysis}.sweep.csv")
        dat_path = manager.save_series(
            analysis,
            result.series(),
            header=f"{analysis} ratio against delta\nmonotone={result.monotone}",
        )
    except KakeyaLabError as e:
        return e.to_dict()
    return {
        "status": "success",
        "rows": result.rows,
        "monotone": result.monotone,
        "paths": [str(csv_path), str(dat_path)],
    }
