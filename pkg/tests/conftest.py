import pytest

from app.core.rng import RngStream
from app.services.initial_data_service import initial_data_service

# two blue particles at -2, 0 and three red particles at 1, 2, 4
EXAMPLE_BITS = [[1, 1], [1, 0], [0, 1], [1, 0], [0, 0]]


@pytest.fixture
def stream() -> RngStream:
    return RngStream(seed=12345, stream_id=0)


@pytest.fixture
def step_phi():
    return initial_data_service.make_step_initial(64)


@pytest.fixture
def example_phi():
    return initial_data_service.explicit_initial(EXAMPLE_BITS)
