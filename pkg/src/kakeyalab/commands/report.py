"""Report command implementation."""

from pathlib import Path
from typing import Optional

import click

from ..core.pipeline import query_report
from ..utils.formatters import format_output, print_check, print_error


@click.command()
@click.option("--report", "-r", "report_file", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True, help="A .report.json file")
@click.option("--where", "-w", help="SQL condition over the rows, e.g. \"ratio < 1\"")
@click.option("--format", "-f", "fmt", type=click.Choice(["table", "json", "yaml", "csv"]), default="table", help="Output format")
@click.pass_context
def report(ctx, report_file: Path, where: Optional[str], fmt: str):
    """Show a report's sections and inequality rows."""
    result = query_report(report_file, where)

    if result["status"] != "success":
        print_error(result["message"], result.get("suggestion"))
        ctx.exit(result.get("exit_code", 1))

    rows = result["rows"]
    if fmt == "csv":
        click.echo(rows.to_csv(index=False), nl=False)
    elif fmt in ("json", "yaml"):
        data = {k: v for k, v in result.items() if k not in ("status", "rows")}
        data["rows"] = rows.to_dict(orient="records")
        click.echo(format_output(data, fmt))
    else:
        click.echo(f"{result['name']} (seed {result['seed']}, exit code {result['exit_code']})")
        for section in result["sections"]:
            print_check(section["name"], section["status"])
        if not rows.empty:
            click.echo(rows.to_string(index=False))
    ctx.exit(0)
