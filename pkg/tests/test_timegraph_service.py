import math

import numpy as np
import pytest

from app.core.errors import InvalidArgumentError
from app.core.rng import RngStream
from app.models.graph_models import ContinuousTimeGraph, DiscreteTimeGraph, TimeEvent
from app.services.timegraph_service import timegraph_service


def test_continuous_graph_is_ordered_nearest_neighbor(stream: RngStream) -> None:
    graph = timegraph_service.sample_continuous_graph(0.4, 1.0, (-10, 10), 2.0, stream)

    assert list(graph.events) == sorted(graph.events)
    for event in graph.events:
        assert -10 <= event.i <= 10
        assert abs(event.j - event.i) == 1
        assert 0 < event.t <= 2.0


def test_continuous_graph_event_counts_are_poisson(stream: RngStream) -> None:
    gen = stream.generator()
    samples = 20_000
    counts = np.array([
        len(timegraph_service.sample_continuous_graph(0.4, 1.0, (0, 0), 1.0, gen).events)
        for _ in range(samples)
    ])

    sigma = math.sqrt(1.4 / samples)
    assert abs(counts.mean() - 1.4) <= 4 * sigma
    void = math.exp(-1.4)
    assert abs((counts == 0).mean() - void) <= 4 * math.sqrt(void * (1 - void) / samples)


def test_discrete_graph_right_event_law(stream: RngStream) -> None:
    sites = 20_000
    graph = timegraph_service.sample_discrete_graph(0.0, 0.5, (0, sites - 1), 1, stream)
    offsets = np.zeros(sites, dtype=int)
    for event in graph.events:
        offsets[event.i] = event.j - event.i

    radius = 4 * math.sqrt(0.25 / sites)
    assert abs((offsets == 0).mean() - 0.5) <= radius
    assert abs((offsets == 1).mean() - 0.25) <= radius


def test_discrete_graph_rejects_delta_one(stream: RngStream) -> None:
    with pytest.raises(InvalidArgumentError):
        timegraph_service.sample_discrete_graph(1.0, 0.5, (0, 3), 2, stream)


def test_restrict_graph_drops_outside_sources() -> None:
    graph = DiscreteTimeGraph(
        events=(TimeEvent(1, -3, -2), TimeEvent(1, 0, 2), TimeEvent(2, 3, 2)),
        window=(-3, 3), horizon=2, delta1=0.1, delta2=0.1,
    )
    bounded = timegraph_service.restrict_graph(graph, 1, 2)

    assert bounded.events == (TimeEvent(1, 0, 2),)
    with pytest.raises(InvalidArgumentError):
        timegraph_service.restrict_graph(graph, 4, 2)


def test_alter_graph_shortens_long_jumps() -> None:
    graph = DiscreteTimeGraph(
        events=(TimeEvent(1, 0, 3), TimeEvent(1, 2, 1)),
        window=(-3, 3), horizon=1, delta1=0.1, delta2=0.1,
    )
    altered = timegraph_service.alter_graph(graph)

    assert altered.events == (TimeEvent(1, 0, 1), TimeEvent(1, 2, 1))


def test_rescale_graph_multiplies_times() -> None:
    graph = DiscreteTimeGraph(events=(TimeEvent(2, 0, 1),), window=(0, 1), horizon=3, delta1=0.1, delta2=0.1)
    (event,) = timegraph_service.rescale_graph(graph, 0.1)

    assert event.t == pytest.approx(0.2)
    assert (event.i, event.j) == (0, 1)


def test_find_inactive_sites_skips_neighbors_of_active_sites() -> None:
    graph = ContinuousTimeGraph(
        events=(TimeEvent(0.5, 0, 1),), window=(-3, 3), horizon=1.0, rate_left=0.0, rate_right=1.0,
    )

    assert timegraph_service.find_inactive_sites(graph, 1.0) == [-2, 2]
    assert timegraph_service.find_inactive_sites(graph, 0.4) == [-2, -1, 0, 1, 2]


def test_find_jump_free_sites() -> None:
    graph = DiscreteTimeGraph(events=(TimeEvent(1, -1, 1),), window=(-3, 3), horizon=1, delta1=0.1, delta2=0.1)

    assert timegraph_service.find_jump_free_sites(graph, 1) == [-3, -2, 2, 3]
