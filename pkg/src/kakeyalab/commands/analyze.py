"""Analyze command implementation."""

from pathlib import Path
from typing import Optional

import click

from ..config import get_analysis_options
from ..core.pipeline import analyze_config
from ..utils.formatters import print_check, print_error, print_success
from ..utils.logger import logger, timed


def _summary(section) -> Optional[str]:
    if section.error is not None:
        return section.error["message"]
    if not section.rows:
        return None
    worst = min(section.rows, key=lambda row: row["ratio"])
    return f"{worst['name']}: lhs={worst['lhs']:.4g} rhs={worst['rhs']:.4g}"


@click.command()
@click.option("--config", "-C", "config_file", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True, help="Experiment config JSON")
@click.option("--seed", type=int, help="Override every seed in the config")
@click.option("--output-dir", "-o", type=click.Path(file_okay=False, path_type=Path), help="Report directory")
@click.pass_context
def analyze(ctx, config_file: Path, seed: Optional[int], output_dir: Optional[Path]):
    """Run an experiment config and write its report."""
    threads = (ctx.obj or {}).get("threads")
    with timed(f"Experiment {config_file.name}"):
        result = analyze_config(config_file, get_analysis_options(), seed, threads, output_dir)

    if result["status"] != "success":
        print_error(result["message"], result.get("suggestion"))
        ctx.exit(result.get("exit_code", 1))

    bundle = result["bundle"]
    for section in bundle.sections:
        print_check(section.name, section.status, _summary(section))
    for path in result["paths"]:
        logger.debug(f"Wrote {path}")

    if result["exit_code"] == 0:
        print_success(f"All gated analyses passed ({len(bundle.sections)} sections)")
    else:
        print_error(f"Failed: {', '.join(result['failures'])}", "See the report for details")
    ctx.exit(result["exit_code"])
