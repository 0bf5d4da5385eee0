"""
Replica execution in fixed-size chunks.

Chunk c of a computation always draws from ``stream.child(c)`` and results come back
in chunk order, so the output does not depend on how many worker processes run.
"""
from concurrent.futures import ProcessPoolExecutor
import time
from typing import Any, Callable, List, Optional

from app.core.config import settings
from app.core.errors import InvalidArgumentError
from app.core.rng import RngStream
import logging

logger = logging.getLogger(__name__)


def chunk_sizes(replicas: int, chunk_size: Optional[int] = None) -> List[int]:
    size = chunk_size or settings.CHUNK_SIZE
    if replicas < 1:
        raise InvalidArgumentError(f"replicas must be positive, got {replicas}")
    full, rest = divmod(replicas, size)
    return [size] * full + ([rest] if rest else [])


class ReplicaPool:
    def __init__(self, threads: int = 1, chunk_size: Optional[int] = None):
        if threads < 1:
            raise InvalidArgumentError(f"threads must be positive, got {threads}")
        self.threads = threads
        self.chunk_size = chunk_size or settings.CHUNK_SIZE

    def run(self, worker: Callable[..., Any], stream: RngStream, replicas: int, *args: Any) -> List[Any]:
        """
        Call ``worker(stream.child(c), first, size, *args)`` for every chunk c, where
        ``first`` is the index of the chunk's first replica, and return the results in chunk
        order. ``worker`` must be a module-level function.
        """
        sizes = chunk_sizes(replicas, self.chunk_size)
        starts = [c * self.chunk_size for c in range(len(sizes))]
        started = time.perf_counter()
        name = getattr(worker, "__name__", "worker")
        if self.threads == 1 or len(sizes) == 1:
            results = []
            for c, size in enumerate(sizes):
                results.append(worker(stream.child(c), starts[c], size, *args))
                logger.debug(f"{name}: chunk {c + 1}/{len(sizes)} done")
        else:
            try:
                with ProcessPoolExecutor(max_workers=min(self.threads, len(sizes))) as executor:
                    futures = [
                        executor.submit(worker, stream.child(c), starts[c], size, *args)
                        for c, size in enumerate(sizes)
                    ]
                    results = []
                    for c, future in enumerate(futures):
                        results.append(future.result())
                        logger.debug(f"{name}: chunk {c + 1}/{len(sizes)} done")
            except Exception as e:
                logger.error(f"Error running {name} on {self.threads} workers: {e}")
                raise
        logger.info(f"{name}: {replicas} replicas in {len(sizes)} chunks, {time.perf_counter() - started:.1f}s")
        return results
