import logging

import click
from dotenv import load_dotenv

from gtalab.cli import compare, evaluate, finetune, gen_data, pretrain, visualize
from gtalab.core.errors import (
    CorruptCheckpointError,
    DataIngestionError,
    GtaLabError,
    NonFiniteLossError,
)

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")

# exit codes
EXIT_FAILURE = 1
EXIT_DATA = 2
EXIT_NUMERICS = 3


class GtaLabGroup(click.Group):
    """Maps library errors to exit codes: 1 usage/config, 2 data/checkpoint I/O, 3 non-finite loss."""

    def invoke(self, ctx: click.Context):
        try:
            return super().invoke(ctx)
        except click.UsageError as e:
            e.exit_code = EXIT_FAILURE
            raise
        except NonFiniteLossError as e:
            _fail(ctx, e, EXIT_NUMERICS)
        except (DataIngestionError, CorruptCheckpointError, OSError) as e:
            _fail(ctx, e, EXIT_DATA)
        except GtaLabError as e:
            _fail(ctx, e, EXIT_FAILURE)


def _fail(ctx: click.Context, error: Exception, code: int):
    click.echo(f"Error: {error}", err=True)
    ctx.exit(code)


@click.group(cls=GtaLabGroup)
@click.option(
    "--log-level",
    default="INFO",
    envvar="GTALAB_LOG_LEVEL",
    type=click.Choice(LOG_LEVELS, case_sensitive=False),
    help="Logging level (default: INFO).",
)
@click.option(
    "--env-file", default=None, type=click.Path(exists=True, dir_okay=False), help="Path to .env file."
)
def cli(log_level: str, env_file: str | None):
    logging.basicConfig(level=log_level.upper(), format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    if env_file:
        load_dotenv(dotenv_path=env_file)
    else:
        load_dotenv()  # Load default .env if exists


cli.add_command(gen_data.gen_data)
cli.add_command(pretrain.pretrain)
cli.add_command(finetune.finetune)
cli.add_command(evaluate.evaluate, name="eval")
cli.add_command(compare.compare)
cli.add_command(visualize.visualize)


if __name__ == "__main__":
    cli()
