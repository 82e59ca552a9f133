"""Bounded worker pool for independent computations"""

from __future__ import annotations

import asyncio
from collections.abc import Callable, Sequence
from logging import Logger, getLogger
from typing import TypeVar

T = TypeVar("T")


class JobRunner:
    """Runs independent callables on worker threads, at most `jobs` at a time"""

    def __init__(self, jobs: int = 1, logger: Logger | None = None) -> None:
        """Initialize runner"""
        self.jobs = max(1, jobs)
        self.logger = logger if logger is not None else getLogger(__name__)

    async def _run_one(
        self, semaphore: asyncio.Semaphore, index: int, task: Callable[[], T]
    ) -> T:
        async with semaphore:
            self.logger.debug("Starting job %d", index)

            return await asyncio.to_thread(task)

    async def gather(self, tasks: Sequence[Callable[[], T]]) -> list[T]:
        """Run every task; results come back in submission order"""
        semaphore = asyncio.Semaphore(self.jobs)

        try:
            return list(
                await asyncio.gather(
                    *(
                        self._run_one(semaphore, index, task)
                        for index, task in enumerate(tasks)
                    )
                )
            )
        except Exception as exc:  # pylint: disable=broad-except
            self.logger.error("Job failed: %s", str(exc))
            raise

    def run(self, tasks: Sequence[Callable[[], T]]) -> list[T]:
        """Synchronous entry point; a single job runs inline"""
        if self.jobs <= 1 or len(tasks) <= 1:
            return [task() for task in tasks]

        return asyncio.run(self.gather(tasks))


async def gather_jobs(
    tasks: Sequence[Callable[[], T]], jobs: int = 1, logger: Logger | None = None
) -> list[T]:
    return await JobRunner(jobs, logger).gather(tasks)


def run_jobs(
    tasks: Sequence[Callable[[], T]], jobs: int = 1, logger: Logger | None = None
) -> list[T]:
    return JobRunner(jobs, logger).run(tasks)
