import threading
import time
from unittest.mock import Mock

import pytest

from treechain.jobs import JobRunner, gather_jobs, run_jobs


def _sleeper(value: int, delay: float):
    def task():
        time.sleep(delay)
        return value

    return task


async def test_gather_keeps_submission_order():
    tasks = [_sleeper(index, 0.05 * (4 - index)) for index in range(4)]

    assert await gather_jobs(tasks, jobs=4) == [0, 1, 2, 3]


async def test_gather_respects_job_limit():
    active = 0
    peak = 0
    lock = threading.Lock()

    def task():
        nonlocal active, peak

        with lock:
            active += 1
            peak = max(peak, active)

        time.sleep(0.02)

        with lock:
            active -= 1

    await JobRunner(2).gather([task] * 6)

    assert peak <= 2


async def test_gather_logs_failures():
    logger = Mock()

    def broken():
        raise ValueError("bad task")

    with pytest.raises(ValueError):
        await gather_jobs([broken], jobs=2, logger=logger)

    logger.error.assert_called_once_with("Job failed: %s", "bad task")


def test_run_inline_for_single_job():
    calls = []

    def task():
        calls.append(threading.current_thread())
        return len(calls)

    assert run_jobs([task, task], jobs=1) == [1, 2]
    assert calls == [threading.current_thread()] * 2


def test_run_with_workers():
    assert run_jobs([_sleeper(index, 0.01) for index in range(5)], jobs=3) == list(range(5))


def test_runner_clamps_jobs():
    assert JobRunner(0).jobs == 1
    assert JobRunner(-3).jobs == 1
