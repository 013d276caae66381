"""Verify command implementation."""

from pathlib import Path

import click

from ..config import get_analysis_options
from ..core.pipeline import verify_report
from ..utils.formatters import print_error, print_success


@click.command()
@click.option("--config", "-C", "config_file", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True, help="Experiment config JSON")
@click.option("--report", "-r", "report_file", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True, help="Existing .report.json")
@click.pass_context
def verify(ctx, config_file: Path, report_file: Path):
    """Re-run a config and check the report is reproduced exactly."""
    threads = (ctx.obj or {}).get("threads")
    result = verify_report(config_file, report_file, get_analysis_options(), threads)

    if result["status"] != "success":
        print_error(result["message"], result.get("suggestion"))
        ctx.exit(result.get("exit_code", 1))

    if result["matches"]:
        print_success(f"Report reproduced (seed {result['seed']})")
        ctx.exit(0)
    print_error(f"Report differs in: {', '.join(result['differing'])}", "Check for nondeterminism or changed settings")
    ctx.exit(2)
