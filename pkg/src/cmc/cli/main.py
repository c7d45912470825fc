from typing import Optional
import logging

import typer
from pydantic import ValidationError

from cmc.term import Console
from cmc.config import Settings

from .base import EXIT_CONFIG, EXIT_USAGE, CLIContext, logger
from .run import run_experiment
from .tools import compress_samples, fuse_reports

app = typer.Typer(
    help="Compressed Monte Carlo: summarize weighted samples and rerun the C-MC experiments.",
)

app.command("run")(run_experiment)
app.command("compress")(compress_samples)
app.command("fuse")(fuse_reports)


@app.callback(invoke_without_command=True)
def init(
    ctx: typer.Context,
    env_file: Optional[str] = typer.Option(
        None, "--env-file", help="Path to .env file to load CMC_* settings from."
    ),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Log debug messages."),
):
    """Compressed Monte Carlo CLI."""
    console = Console()
    console.add_logger(logging.getLogger("cmc"), logging.DEBUG if verbose else None)
    if ctx.invoked_subcommand is None:
        console.print(ctx.get_help())
        raise typer.Exit(EXIT_USAGE)

    try:
        settings = Settings(env_file=env_file)
    except ValidationError as e:
        logger.error(
            "Environment not configured correctly. Please check the CMC_* variables:\n"
            + "\n".join(f"- {err['loc'][0]}: {err['msg']}" for err in e.errors()),
        )
        raise typer.Exit(EXIT_CONFIG)

    if not verbose:
        logging.getLogger("cmc").setLevel(settings.log_level)
    ctx.obj = CLIContext(console=console, settings=settings)
