"""Factor command implementation."""

from pathlib import Path
from typing import Optional

import click

from ..config import get_analysis_options
from ..core.pipeline import factor_file
from ..utils.formatters import format_output, print_error, print_success


@click.command()
@click.option("--family", "-F", "family_file", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True, help="Family JSON from 'generate'")
@click.option("--mode", "-m", type=click.Choice(["convex", "slab"]), default="convex", show_default=True, help="Factoring kind")
@click.option("--output", "-o", type=click.Path(dir_okay=False, path_type=Path), help="Write the full factoring as JSON")
@click.option("--format", "-f", "fmt", type=click.Choice(["json", "yaml", "plain"]), default="plain", help="Summary format")
@click.pass_context
def factor(ctx, family_file: Path, mode: str, output: Optional[Path], fmt: str):
    """Factor a saved family by convex sets or by slabs."""
    result = factor_file(family_file, mode, get_analysis_options(), output)

    if result["status"] != "success":
        print_error(result["message"], result.get("suggestion"))
        ctx.exit(result.get("exit_code", 1))

    print_success(f"Factored {family_file.name} ({mode})")
    click.echo(format_output(result["summary"], fmt))
    ctx.exit(0)
