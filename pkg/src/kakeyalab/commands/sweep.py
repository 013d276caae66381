"""Sweep command implementation."""

from pathlib import Path
from typing import Optional

import click

from ..config import get_analysis_options
from ..core.pipeline import sweep_config
from ..utils.formatters import print_error, print_success
from ..utils.logger import timed
from ..utils.validators import parse_deltas


@click.command()
@click.option("--config", "-C", "config_file", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True, help="Experiment config JSON")
@click.option("--analysis", "-a", required=True, help="Analysis of the config to sweep")
@click.option("--deltas", "-d", default="2^-4,2^-5,2^-6,2^-7,2^-8,2^-9", show_default=True, help="Comma-separated δ values; 2^-k accepted")
@click.option("--output-dir", "-o", type=click.Path(file_okay=False, path_type=Path), help="Output directory")
@click.option("--require-monotone", is_flag=True, help="Exit 2 unless the ratio increases as delta shrinks")
@click.pass_context
def sweep(ctx, config_file: Path, analysis: str, deltas: str, output_dir: Optional[Path], require_monotone: bool):
    """Run one analysis over several δ and write the ratio series."""
    values = parse_deltas(deltas)
    if values is None:
        print_error(f"Invalid delta list: {deltas}", "Use values in [2^-12, 2^-3], e.g. 2^-4,2^-5")
        ctx.exit(3)

    threads = (ctx.obj or {}).get("threads")
    with timed(f"Sweep {analysis}"):
        result = sweep_config(config_file, analysis, values, get_analysis_options(), threads, output_dir)

    if result["status"] != "success":
        print_error(result["message"], result.get("suggestion"))
        ctx.exit(result.get("exit_code", 1))

    for row in result["rows"]:
        click.echo(f"delta={row['delta']:.6g}  ratio={row['ratio']:.6g}")
    if require_monotone and not result["monotone"]:
        print_error("Ratio is not increasing along the sweep", "Inspect the .dat series")
        ctx.exit(2)
    print_success(f"Sweep written ({len(result['rows'])} rows, monotone={result['monotone']})")
    ctx.exit(0)
