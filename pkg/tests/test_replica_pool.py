import numpy as np
import pytest

from app.core.errors import InvalidArgumentError
from app.core.rng import RngStream
from app.services.replica_pool import ReplicaPool, chunk_sizes


def _draw(stream: RngStream, first: int, size: int, scale: float) -> np.ndarray:
    return scale * stream.child(0).generator().random(size) + first


def test_chunk_sizes() -> None:
    assert chunk_sizes(5000, 2000) == [2000, 2000, 1000]
    assert chunk_sizes(4000, 2000) == [2000, 2000]
    assert chunk_sizes(3, 2000) == [3]
    with pytest.raises(InvalidArgumentError):
        chunk_sizes(0, 10)


def test_results_do_not_depend_on_worker_count() -> None:
    stream = RngStream(seed=7, stream_id=1)
    inline = np.concatenate(ReplicaPool(threads=1, chunk_size=7).run(_draw, stream, 30, 2.0))
    parallel = np.concatenate(ReplicaPool(threads=3, chunk_size=7).run(_draw, stream, 30, 2.0))

    assert inline.shape == (30,)
    assert np.array_equal(inline, parallel)


def test_workers_receive_replica_offsets() -> None:
    results = ReplicaPool(threads=1, chunk_size=4).run(_draw, RngStream(seed=1), 10, 0.0)

    assert [chunk.tolist() for chunk in results] == [[0.0] * 4, [4.0] * 4, [8.0] * 2]


def test_pool_rejects_bad_thread_counts() -> None:
    with pytest.raises(InvalidArgumentError):
        ReplicaPool(threads=0)
