from . import exp1, exp2, exp3, exp4, exp5, exp6
from .base import Experiment, ResultTable, mean_and_error
from .pool import RunPool, derive_seed

EXPERIMENTS: dict[str, Experiment] = {
    e.id: e
    for e in (
        exp1.EXPERIMENT,
        exp2.EXPERIMENT,
        exp3.EXPERIMENT,
        exp4.EXPERIMENT,
        exp5.EXPERIMENT,
        exp6.EXPERIMENT,
    )
}

__all__ = [
    "EXPERIMENTS",
    "Experiment",
    "ResultTable",
    "RunPool",
    "derive_seed",
    "mean_and_error",
]
