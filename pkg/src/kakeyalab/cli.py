"""Main CLI entry point for kakeyalab."""

import os
import sys
from pathlib import Path
from typing import Optional

import click
from colorama import Fore, Style

from . import __version__
from .analyses import list_analyses
from .commands.analyze import analyze
from .commands.factor import factor
from .commands.generate import generate
from .commands.report import report
from .commands.sweep import sweep
from .commands.verify import verify

DEFAULT_SETTINGS = """[default]
log_level = "INFO"
log_file = "logs/kakeyalab.log"
output_format = "plain"

[default.geometry]
slack = 0.01
cells_per_delta = 4.0

[default.factoring]
k_cap = 1e4
k3 = 10.0

[default.broadness]
beta = 0.05
K = 100.0
certificate_floor = 1.0

[default.volumes]
kappa = 0.01
doubling_epsilon = 0.5

[default.rigid]
k_cal = 100.0
rounds = 8

[development]
log_level = "DEBUG"

[production]
log_level = "WARNING"
"""


@click.group()
@click.version_option(version=__version__, prog_name="kakeyalab")
@click.option(
    "--config",
    "-c",
    envvar="KAKEYALAB_CONFIG",
    help="Path to settings file",
)
@click.option(
    "--env",
    "-e",
    envvar="KAKEYALAB_ENV",
    help="Environment to use (e.g., development, production)",
)
@click.option(
    "--threads",
    "-t",
    type=click.IntRange(min=1),
    envvar="KAKEYALAB_THREADS",
    help="Worker threads for analyses and neighbour queries",
)
@click.option(
    "--verbose",
    "-v",
    is_flag=True,
    help="Enable verbose output",
)
@click.pass_context
def cli(ctx, config: Optional[str], env: Optional[str], threads: Optional[int], verbose: bool):
    """kakeyalab - finite-scale experiments on tube arrangements and Wolff axioms."""
    ctx.ensure_object(dict)
    ctx.obj["threads"] = threads

    if config:
        os.environ["KAKEYALAB_SETTINGS_FILE"] = config
        from .config import settings

        settings.load_file(path=config)

    if env:
        os.environ["ENV_FOR_DYNACONF"] = env
        from .config import settings

        settings.setenv(env)

    if verbose:
        os.environ["KAKEYALAB_LOG_LEVEL"] = "DEBUG"
        from .utils.logger import setup_logger

        setup_logger(level="DEBUG")


cli.add_command(generate)
cli.add_command(analyze)
cli.add_command(factor)
cli.add_command(verify)
cli.add_command(report)
cli.add_command(sweep)


@cli.command()
def version():
    """Show the version of kakeyalab."""
    print(f"kakeyalab version {__version__}")


@cli.command()
@click.option("--get", "keypath", help="Print one setting, e.g. volumes.kappa")
@click.option("--analyses", "show_analyses", is_flag=True, help="List the registered analyses")
@click.option("--init", "init", is_flag=True, help="Write a default settings.toml if none exists")
@click.pass_context
def config(ctx, keypath: Optional[str], show_analyses: bool, init: bool):
    """Show, query or initialize configuration."""
    from .config import get_config_value
    from .utils.formatters import print_config, print_error, print_success
    from .utils.validators import validate_keypath

    if show_analyses:
        for name in list_analyses():
            print(name)
        ctx.exit(0)

    if keypath:
        if not validate_keypath(keypath):
            print_error(f"Invalid keypath: {keypath}", "Use dot-separated names, e.g. volumes.kappa")
            ctx.exit(3)
        value = get_config_value(keypath)
        if value is None:
            print_error(f"No setting at {keypath}")
            ctx.exit(3)
        print_config(value, keypath)
        ctx.exit(0)

    path = Path("settings.toml")
    if path.exists():
        print_success(f"Found configuration file: {path}")
        print_config(get_config_value())
        ctx.exit(0)

    if not init:
        print_error("No settings.toml found", "Run 'kakeyalab config --init' to create one")
        ctx.exit(1)

    path.write_text(DEFAULT_SETTINGS)
    print_success("Created default settings.toml")
    ctx.exit(0)


def main():
    """Main entry point for the CLI."""
    try:
        sys.exit(cli())
    except KeyboardInterrupt:
        print(f"\n{Fore.YELLOW}Interrupted by user{Style.RESET_ALL}")
        sys.exit(1)
    except Exception as e:
        print(f"{Fore.RED}Unexpected error: {e}{Style.RESET_ALL}")
        sys.exit(1)


if __name__ == "__main__":
    main()
