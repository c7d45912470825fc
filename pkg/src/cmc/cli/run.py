from typing import Optional, cast
from pathlib import Path

import typer
from pydantic import ValidationError

from cmc.config import ExperimentConfig, Scale
from cmc.errors import ConfigError, NumericalError
from cmc.experiments import EXPERIMENTS, RunPool

from .base import EXIT_CONFIG, EXIT_NUMERICAL, CLIContext, logger


def run_experiment(
    ctx: typer.Context,
    experiment: str = typer.Argument(..., help="Experiment id: exp1 .. exp6."),
    config: Optional[Path] = typer.Option(
        None, "--config", help="JSON file with ExperimentConfig overrides."
    ),
    seed: Optional[int] = typer.Option(
        None, "--seed", min=0, max=2**64 - 1, help="Master seed (overrides the config file)."
    ),
    out: Optional[Path] = typer.Option(
        None, "--out", help="Output directory (default: CMC_OUTPUT_DIR)."
    ),
    scale: Optional[Scale] = typer.Option(
        None, "--scale", help="Desk-scale or paper-scale defaults."
    ),
):
    """Run one experiment and write its result table as CSV."""
    conf = cast(CLIContext, ctx.obj)
    settings = conf.settings
    console = conf.console

    if experiment not in EXPERIMENTS:
        logger.error(f"Unknown experiment '{experiment}'; choose one of {', '.join(EXPERIMENTS)}")
        raise typer.Exit(EXIT_CONFIG)
    spec = EXPERIMENTS[experiment]

    try:
        cfg = ExperimentConfig.load(
            experiment, config, seed=seed, scale=scale, default_scale=settings.scale
        )
        cfg = spec.configure(cfg, settings)
    except ValidationError as e:
        logger.error(
            "Invalid experiment configuration:\n"
            + "\n".join(
                f"- {'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()
            ),
        )
        raise typer.Exit(EXIT_CONFIG)
    except ConfigError as e:
        logger.error(str(e))
        raise typer.Exit(EXIT_CONFIG)

    logger.info(f"{spec.id}: {spec.title} (config hash {cfg.config_hash})")
    progress = console.progress
    pool = RunPool(settings.workers, progress)
    try:
        with console, progress:
            table = spec.run(cfg, pool)
    except ConfigError as e:
        logger.error(str(e))
        raise typer.Exit(EXIT_CONFIG)
    except NumericalError as e:
        logger.error(f"{spec.id} failed: {e}")
        raise typer.Exit(EXIT_NUMERICAL)

    path = table.write_csv((out or settings.output_dir) / f"{spec.id}.csv", cfg)
    console.render_table(table.columns, table.rows, title=spec.title)
    console.print(f"Results written to {path}")
