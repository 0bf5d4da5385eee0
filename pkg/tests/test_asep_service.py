import math

import numpy as np
import pytest

from app.core.errors import InvalidArgumentError
from app.core.rng import RngStream
from app.models.graph_models import ContinuousTimeGraph, TimeEvent
from app.models.lattice_models import ParticleConfig
from app.services.asep_service import asep_service
from app.services.initial_data_service import initial_data_service
from app.services.timegraph_service import timegraph_service


def _graph(*events: TimeEvent, window=(-2, 2)) -> ContinuousTimeGraph:
    return ContinuousTimeGraph(events=events, window=window, horizon=1.0, rate_left=0.0, rate_right=1.0)


def test_single_particle_follows_its_jumps() -> None:
    config = ParticleConfig.from_tagged_sites({0: -1}, (-2, 2))
    graph = _graph(TimeEvent(0.2, 0, 1), TimeEvent(0.5, 1, 2), TimeEvent(0.7, 2, 3))

    trajectory = asep_service.evolve_asep(config, graph, 1.0, [0.3, 1.0])

    assert asep_service.tagged_position(trajectory, -1, 0.3) == 1
    # site 3 is outside the window
    assert asep_service.tagged_position(trajectory, -1, 1.0) == 2


def test_exclusion_and_current() -> None:
    config = ParticleConfig.from_tagged_sites({0: -1, 1: 0}, (-2, 2))
    graph = _graph(TimeEvent(0.5, 0, 1), TimeEvent(0.6, 1, 2), TimeEvent(0.8, 0, 1))

    trajectory = asep_service.evolve_asep(config, graph, 1.0)

    assert trajectory.at(1.0).site_tags() == {1: -1, 2: 0}
    assert asep_service.asep_current(trajectory, 0, 0.0) == 0
    assert asep_service.asep_current(trajectory, 0, 1.0) == 1
    assert asep_service.occupancy_vector(trajectory, 1.0).tolist() == [0, 0, 0, 1, 1]


def test_evolve_rejects_times_beyond_the_graph() -> None:
    config = ParticleConfig.from_tagged_sites({0: -1}, (-2, 2))
    with pytest.raises(InvalidArgumentError):
        asep_service.evolve_asep(config, _graph(), 2.0)
    with pytest.raises(InvalidArgumentError):
        asep_service.evolve_asep(config, _graph(window=(-1, 1)), 1.0)


def test_partitioned_evolution_matches_full_evolution(stream: RngStream, example_phi) -> None:
    config = initial_data_service.asep_config_from_initial(example_phi, (-10, 10))
    for k in range(50):
        graph = timegraph_service.sample_continuous_graph(0.4, 1.0, (-10, 10), 1.0, stream.child(k))
        times = [0.25, 0.5, 1.0]
        full = asep_service.evolve_asep(config, graph, 1.0, times)
        pieces = asep_service.evolve_asep_partitioned(config, graph, 1.0, times)
        for t in times:
            assert pieces.at(t) == full.at(t)


def test_naive_free_particle_moves_poisson(stream: RngStream) -> None:
    gen = stream.generator()
    config = ParticleConfig.from_tagged_sites({0: -1}, (-1, 200))
    replicas = 5_000
    positions = np.array([
        asep_service.tagged_position(asep_service.evolve_asep_naive(config, 0.0, 1.0, 1.0, gen), -1, 1.0)
        for _ in range(replicas)
    ])

    assert abs(positions.mean() - 1.0) <= 4 * math.sqrt(1.0 / replicas)


def test_naive_respects_window_boundary(stream: RngStream) -> None:
    config = ParticleConfig.from_tagged_sites({2: -1}, (-2, 2))
    trajectory = asep_service.evolve_asep_naive(config, 0.0, 5.0, 1.0, stream)

    assert asep_service.tagged_position(trajectory, -1, 1.0) == 2


def test_graphical_and_naive_tagged_laws_agree(stream: RngStream) -> None:
    from app.services.statistics_service import statistics_service

    config = ParticleConfig.from_tagged_sites({-2: -3, -1: -2, 0: -1}, (-10, 10))
    gen = stream.child(1).generator()
    replicas = 1_500
    graphical = [
        asep_service.tagged_position(
            asep_service.evolve_asep(
                config, timegraph_service.sample_continuous_graph(0.4, 1.0, (-10, 10), 1.0, stream.child(0, k)), 1.0
            ),
            -2,
            1.0,
        )
        for k in range(replicas)
    ]
    naive = [
        asep_service.tagged_position(asep_service.evolve_asep_naive(config, 0.4, 1.0, 1.0, gen), -2, 1.0)
        for _ in range(replicas)
    ]

    assert abs(np.mean(graphical) - np.mean(naive)) <= 4 * np.std(naive) * math.sqrt(2 / replicas)
    assert statistics_service.ks_distance(graphical, naive) <= statistics_service.ks_radius(replicas, replicas, 0.001)
