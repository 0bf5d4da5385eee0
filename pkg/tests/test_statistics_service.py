import numpy as np
import pytest

from app.core.errors import InvalidArgumentError
from app.core.rng import RngStream
from app.services.statistics_service import statistics_service


def test_ks_distance_extremes() -> None:
    assert statistics_service.ks_distance([1, 2, 3], [3, 2, 1]) == 0.0
    assert statistics_service.ks_distance([0, 0], [5, 6]) == 1.0
    with pytest.raises(InvalidArgumentError):
        statistics_service.ks_distance([], [1])


def test_geometric_samples_pass_two_sample_ks(stream: RngStream) -> None:
    a = stream.child(0).generator().geometric(0.5, size=100_000)
    b = stream.child(1).generator().geometric(0.5, size=100_000)

    assert statistics_service.ks_distance(a, b) <= statistics_service.ks_radius(100_000, 100_000, 0.001)


def test_ks_radius_at_large_samples() -> None:
    radius = statistics_service.ks_radius(100_000, 100_000, 0.01)

    assert 0.007 < radius < 0.0075


def test_binomial_radii() -> None:
    assert statistics_service.binomial_radius(0.5, 100) == pytest.approx(0.15)
    assert statistics_service.binomial_radius(0.0, 100) == 0.0
    assert statistics_service.difference_radius(0.5, 100, 0.5, 100) == pytest.approx(3 * np.sqrt(0.005))


def test_tail_bound_values() -> None:
    assert statistics_service.tail_bound(2, 1.0, 1.0) == pytest.approx(0.5)
    assert statistics_service.tail_bound(-3, 2.0, 1.0) == pytest.approx(8 / 6)
    assert statistics_service.tail_bound(0, 1.0, 0.0) == 1.0
    assert statistics_service.tail_bound(3, 1.0, 0.0) == 0.0


def test_empirical_pmf_and_law_difference() -> None:
    assert statistics_service.empirical_pmf([1, 1, 2, 3]) == {1: 0.5, 2: 0.25, 3: 0.25}
    assert statistics_service.max_law_difference({"a": 0.5, "b": 0.5}, {"a": 0.4, "c": 0.6}) == pytest.approx(0.6)
    assert statistics_service.poisson_pmf(0, 1.4) == pytest.approx(np.exp(-1.4))
