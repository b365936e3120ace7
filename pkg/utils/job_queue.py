from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, List, Sequence, Tuple

from utils.logging_setup import get_logger

logger = get_logger("job_queue")


class JobQueue:
    """
    Ordered batch of independent jobs run on a bounded thread pool.

    Results come back in submission order whatever the thread count, so callers
    that reduce them sequentially get the same answer with 1 or N workers.
    """

    def __init__(self, name="JobQueue", threads=1, max_size=100000):
        self.name = name
        self.threads = max(1, int(threads))
        self.max_size = max_size
        self.pending_jobs: List[Tuple[Callable, tuple]] = []

    def add(self, job: Callable, *args):
        if len(self.pending_jobs) >= self.max_size:
            raise Exception(f"Reached limit of pending jobs: {self.max_size} - run the queue before adding more.")
        self.pending_jobs.append((job, args))

    def run(self) -> List[Any]:
        jobs = self.pending_jobs
        self.pending_jobs = []
        if len(jobs) == 0:
            return []
        if self.threads == 1 or len(jobs) == 1:
            return [job(*args) for job, args in jobs]
        logger.debug(f"JobQueue {self.name} - running {len(jobs)} jobs on {self.threads} threads")
        with ThreadPoolExecutor(max_workers=self.threads, thread_name_prefix=self.name) as executor:
            futures = [executor.submit(job, *args) for job, args in jobs]
            return [future.result() for future in futures]

    @staticmethod
    def map(job: Callable, items: Sequence, threads=1, name="JobQueue") -> List[Any]:
        queue = JobQueue(name=name, threads=threads, max_size=max(1, len(items)))
        for item in items:
            queue.add(job, item)
        return queue.run()


def block_ranges(n: int, block_size: int) -> List[Tuple[int, int]]:
    """Fixed [start, stop) blocks over n items; block layout never depends on the thread count."""
    if n <= 0:
        return []
    block_size = max(1, int(block_size))
    return [(start, min(n, start + block_size)) for start in range(0, n, block_size)]
