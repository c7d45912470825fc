from typing import Callable, Optional, TypeVar
import asyncio
import logging

import numpy as np
from rich.progress import Progress

logger = logging.getLogger("cmc.experiments")

R = TypeVar("R")


def derive_seed(seed: int, *key: int) -> int:
    """Seed of an independent stream: a Monte Carlo run, or a node or target inside one."""
    return int(np.random.SeedSequence(seed, spawn_key=key).generate_state(1)[0])


class RunPool:
    """Independent Monte Carlo runs on a bounded number of worker threads.

    Results come back in run order whatever the completion order.
    """

    workers: int
    progress: Optional[Progress]

    def __init__(self, workers: int = 1, progress: Optional[Progress] = None) -> None:
        if workers < 1:
            raise ValueError("at least one worker required")
        self.workers = workers
        self.progress = progress

    def map(
        self, func: Callable[[int], R], runs: int, seed: int, description: str = "Runs"
    ) -> list[R]:
        """Call ``func(derive_seed(seed, r))`` for r = 0..runs-1."""
        return asyncio.run(self._gather(func, runs, seed, description))

    async def _gather(
        self, func: Callable[[int], R], runs: int, seed: int, description: str
    ) -> list[R]:
        semaphore = asyncio.Semaphore(self.workers)
        progress = self.progress
        task = None
        if progress is not None:
            task = progress.add_task(description=description, total=runs)

        async def one(run: int) -> R:
            async with semaphore:
                result = await asyncio.to_thread(func, derive_seed(seed, run))
            if progress is not None and task is not None:
                progress.update(task, advance=1)
            return result

        results = await asyncio.gather(*(one(run) for run in range(runs)))
        logger.debug(f"{description}: {runs} runs on {self.workers} worker(s)")
        return list(results)
