from typing import Optional, cast
from enum import Enum
from pathlib import Path

import typer
from pydantic import ValidationError

from cmc.compress import CompressedSet, bootstrap_compress, compress, kde_compress
from cmc.core import read_csv
from cmc.errors import CMCError, NumericalError
from cmc.fusion import LocalReport, fuse_parallel, fuse_product_of_mixtures
from cmc.partition import PartitionStrategy, assign, build_partition
from cmc.wire import CompressedSetModel, LocalReportModel, read_json, write_json

from .base import EXIT_CONFIG, EXIT_NUMERICAL, CLIContext, logger


class FileMode(str, Enum):
    """Compression schemes available from a samples file."""

    STOCHASTIC = "stochastic"
    DETERMINISTIC = "deterministic"
    BOOTSTRAP = "bootstrap"


def _compress(
    path: Path,
    m: int,
    strategy: PartitionStrategy,
    mode: FileMode,
    seed: int,
    delta: Optional[float],
) -> tuple[CompressedSet, int]:
    s = read_csv(path)
    if mode == FileMode.BOOTSTRAP:
        return bootstrap_compress(s, m, seed), s.size
    a = assign(build_partition(s, m, strategy, seed), s)
    if delta is not None:
        return kde_compress(s, a, "full", delta), s.size
    return compress(s, a, mode.value, seed=seed), s.size


def compress_samples(
    ctx: typer.Context,
    samples: Path = typer.Argument(..., help="CSV with columns x_1..x_d and optional w."),
    m: int = typer.Option(..., "--m", min=1, help="Number of regions M."),
    strategy: PartitionStrategy = typer.Option(
        PartitionStrategy.UNIFORM_GRID, "--strategy", help="Partition construction."
    ),
    mode: FileMode = typer.Option(FileMode.DETERMINISTIC, "--mode", help="Summary particles."),
    out: Path = typer.Option(..., "--out", help="JSON file receiving the compressed set."),
    seed: int = typer.Option(0, "--seed", min=0, help="Seed for random partitions and draws."),
    kde_delta: Optional[float] = typer.Option(
        None, "--kde-delta", min=0.0, help="Emit Gaussian kernels regularized by delta * I."
    ),
    node_id: Optional[int] = typer.Option(
        None, "--node-id", min=0, help="Wrap the set into a node report for `cmc fuse`."
    ),
):
    """Compress a sample file into M weighted summary particles."""
    conf = cast(CLIContext, ctx.obj)
    console = conf.console

    if kde_delta is not None and mode != FileMode.DETERMINISTIC:
        logger.error("--kde-delta only applies to deterministic compression")
        raise typer.Exit(EXIT_CONFIG)
    try:
        c, n = _compress(samples, m, strategy, mode, seed, kde_delta)
    except NumericalError as e:
        logger.error(f"Compression failed: {e}")
        raise typer.Exit(EXIT_NUMERICAL)
    except (CMCError, ValueError, OSError) as e:
        logger.error(f"Cannot compress {samples}: {e}")
        raise typer.Exit(EXIT_CONFIG)

    if node_id is None:
        write_json(CompressedSetModel.from_domain(c), out)
    else:
        report = LocalReport.from_compressed(c, n, node_id)
        write_json(LocalReportModel.from_report(report), out)
    console.print(
        f"Compressed {n} samples into {c.size} particles "
        f"({c.payload_scalars()} scalars) -> {out}"
    )


def fuse_reports(
    ctx: typer.Context,
    reports: list[Path] = typer.Argument(..., help="Node report JSON files."),
    out: Path = typer.Option(..., "--out", help="JSON file receiving the fused set."),
    product: bool = typer.Option(
        False, "--product", help="Multiply Gaussian mixtures instead of pooling particles."
    ),
):
    """Fuse node reports at the central node."""
    conf = cast(CLIContext, ctx.obj)
    settings = conf.settings
    console = conf.console

    try:
        local = [read_json(LocalReportModel, path).to_report() for path in reports]
    except (ValidationError, ValueError, OSError) as e:
        logger.error(f"Cannot read node reports: {e}")
        raise typer.Exit(EXIT_CONFIG)

    try:
        if product:
            fused = fuse_product_of_mixtures(local, settings.enumeration_cap)
            result = fused.mixture
            if fused.rejected:
                logger.warning(f"{fused.rejected} singular product component(s) dropped")
        else:
            result = fuse_parallel(local)
    except NumericalError as e:
        logger.error(f"Fusion failed: {e}")
        raise typer.Exit(EXIT_NUMERICAL)
    except ValueError as e:
        logger.error(f"Reports cannot be fused: {e}")
        raise typer.Exit(EXIT_CONFIG)

    write_json(CompressedSetModel.from_domain(result), out)
    console.print(f"Fused {len(local)} reports into {result.size} particles -> {out}")
