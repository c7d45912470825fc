from typing import Any, Callable, Sequence
import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike

from cmc import __version__
from cmc.config import ExperimentConfig, Scale, Settings

from .pool import RunPool

logger = logging.getLogger("cmc.experiments")


def _format(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


@dataclass
class ResultTable:
    """Long-format result rows, written as a seed-stamped CSV."""

    columns: tuple[str, ...]
    rows: list[tuple[Any, ...]] = field(default_factory=list)

    def add(self, *row: Any) -> None:
        if len(row) != len(self.columns):
            raise ValueError(f"row has {len(row)} cells, table has {len(self.columns)} columns")
        self.rows.append(row)

    def column(self, name: str) -> list[Any]:
        k = self.columns.index(name)
        return [row[k] for row in self.rows]

    def write_csv(self, path: str | Path, cfg: ExperimentConfig) -> Path:
        """Header line, column names, then rows; floats are written with repr."""
        out = Path(path)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", newline="") as fh:
            fh.write(
                f"# cmc {__version__} experiment={cfg.experiment} "
                f"config_hash={cfg.config_hash} seed={cfg.seed} scale={cfg.scale.value}\n"
            )
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.columns)
            for row in self.rows:
                writer.writerow([_format(cell) for cell in row])
        logger.info(f"Wrote {len(self.rows)} rows to {out}")
        return out


def mean_and_error(values: ArrayLike) -> tuple[float, float]:
    """Sample mean and its standard error (0 for a single run)."""
    arr = np.asarray(values, dtype=float)
    if arr.size < 2:
        return float(arr.mean()), 0.0
    return float(arr.mean()), float(arr.std(ddof=1) / np.sqrt(arr.size))


@dataclass(frozen=True)
class Experiment:
    id: str
    title: str
    defaults: Callable[[Scale, Settings], dict[str, Any]]
    run: Callable[[ExperimentConfig, RunPool], ResultTable]

    def configure(self, cfg: ExperimentConfig, settings: Settings) -> ExperimentConfig:
        return cfg.resolved(self.defaults(cfg.scale, settings))


def stacked(results: Sequence[Sequence[float]]) -> np.ndarray:
    """Per-run metric vectors as a (runs, metrics) array."""
    return np.asarray(results, dtype=float).reshape(len(results), -1)
