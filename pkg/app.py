import logging
from pathlib import Path

import click
from rich.console import Console
from rich.logging import RichHandler

from commands.context import AppContext
from commands.game import game
from commands.gen import gen
from commands.online import online
from commands.solve import solve_command
from commands.verify import verify
from config.settings import LOG_LEVEL
from utils.storage import load_experiment_settings

logger = logging.getLogger(__name__)


def configure_logging(level: str):
    """Rich logging to stderr; stdout carries only reports."""
    logging.basicConfig(
        level=level.upper(),
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), rich_tracebacks=True, show_path=False)],
        force=True,
    )


@click.group()
@click.option("--seed", type=int, default=0, show_default=True, help="Master seed; every stream derives from it.")
@click.option("--samples", type=click.IntRange(min=1), default=None, help="Monte Carlo scenarios when enumeration is too large.")
@click.option("--limit", type=click.IntRange(min=1), default=None, help="Scenario enumeration cap.")
@click.option("-o", "--output", type=click.Path(path_type=Path), default=None, help="Also write the report here.")
@click.option("--log-level", type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
              default=LOG_LEVEL, show_default=True)
@click.pass_context
def cli(ctx: click.Context, seed, samples, limit, output, log_level):
    """Budgeted influence maximization: generate, solve, run online and game experiments, verify."""
    configure_logging(log_level)
    settings = load_experiment_settings()
    ctx.obj = AppContext(seed, samples or settings["samples"], limit, output, settings)
    logger.debug("Seed %d, samples %d, limit %s", seed, ctx.obj.samples, limit)


cli.add_command(gen)
cli.add_command(solve_command)
cli.add_command(online)
cli.add_command(game)
cli.add_command(verify)


def main():
    cli()


if __name__ == "__main__":
    main()
