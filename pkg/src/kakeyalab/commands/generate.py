"""Generate command implementation."""

import json
from pathlib import Path
from typing import Optional

import click

from ..core.generators import SHADING_MODES, SLAB_KINDS, TUBE_KINDS
from ..core.pipeline import generate_to_file
from ..utils.formatters import format_output, print_error, print_success
from ..utils.logger import logger


@click.command()
@click.option("--spec", "-s", "spec_file", type=click.Path(exists=True, dir_okay=False, path_type=Path), help="FamilySpec JSON file")
@click.option("--kind", "-k", type=click.Choice(TUBE_KINDS + SLAB_KINDS), help="Family kind (when no spec file is given)")
@click.option("--delta", "-d", type=float, help="Tube width")
@click.option("--seed", type=int, default=0, show_default=True, help="Random seed")
@click.option("--shade", type=click.Choice(SHADING_MODES), help="Also shade every body")
@click.option("--lam", type=float, default=1.0, show_default=True, help="Shading density for --shade")
@click.option("--output", "-o", type=click.Path(dir_okay=False, path_type=Path), required=True, help="Output family JSON")
@click.option("--format", "-f", "fmt", type=click.Choice(["json", "yaml", "plain"]), default="plain", help="Summary format")
@click.pass_context
def generate(
    ctx,
    spec_file: Optional[Path],
    kind: Optional[str],
    delta: Optional[float],
    seed: int,
    shade: Optional[str],
    lam: float,
    output: Path,
    fmt: str,
):
    """Generate a tube or slab family and save it as JSON."""
    if spec_file:
        try:
            spec = json.loads(spec_file.read_text())
        except json.JSONDecodeError as e:
            print_error(f"Spec is not valid JSON: {e}", str(spec_file))
            ctx.exit(3)
    elif kind and delta:
        spec = {"kind": kind, "delta": delta, "seed": seed}
    else:
        print_error("No family given", "Pass --spec, or both --kind and --delta")
        ctx.exit(3)

    shading = {"mode": shade, "lam": lam} if shade else None
    logger.info(f"Generating {spec.get('kind')} family...")
    result = generate_to_file(spec, output, shading)

    if result["status"] != "success":
        print_error(result["message"], result.get("suggestion"))
        ctx.exit(result.get("exit_code", 1))

    print_success(result["message"])
    click.echo(format_output({k: v for k, v in result.items() if k not in ("status", "message")}, fmt))
    ctx.exit(0)
