import json
from pathlib import Path

import numpy as np
import pytest

from app.core.errors import InvalidArgumentError
from app.core.rng import RngStream, geometric_offset, geometric_offsets
from app.models.experiment_models import PhiSpec
from app.models.lattice_models import InitialData, InitialDataKind
from app.services.initial_data_service import initial_data_service


def test_equal_stream_descriptors_reproduce_draws(stream: RngStream) -> None:
    a = stream.child(3, 1).generator().random(5)
    b = RngStream(seed=12345, stream_id=0, path=(3, 1)).generator().random(5)
    c = stream.child(3, 2).generator().random(5)

    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_geometric_offset_inverse_cdf() -> None:
    assert geometric_offset(0.0, 0.5) == 0
    assert geometric_offset(0.1, 0.5) == 0
    assert geometric_offset(0.6, 0.5) == 1
    assert geometric_offset(0.8, 0.5) == 2
    assert geometric_offset(0.99, 0.0) == 0
    assert geometric_offsets(np.array([0.1, 0.6, 0.8]), 0.5).tolist() == [0, 1, 2]


def test_step_initial_data_extends_with_blue_entries() -> None:
    phi = initial_data_service.make_step_initial(3)

    assert phi.pair(1) == (0, 1)
    assert phi.pair(50) == (0, 1)
    assert phi.blue_count(5) == 5


def test_bernoulli_extension_matches_longer_realization(stream: RngStream) -> None:
    short = initial_data_service.sample_bernoulli_initial(0.3, 0.6, 10, stream.child(2, 0))
    long = initial_data_service.sample_bernoulli_initial(0.3, 0.6, 2000, stream.child(2, 0))

    assert [short.pair(k) for k in range(1, 2001)] == [long.pair(k) for k in range(1, 2001)]


def test_bernoulli_replicas_draw_different_bits(stream: RngStream) -> None:
    first = initial_data_service.sample_bernoulli_initial(0.5, 0.5, 200, stream.child(2, 0))
    second = initial_data_service.sample_bernoulli_initial(0.5, 0.5, 200, stream.child(2, 1))

    assert first.bits != second.bits


def test_bernoulli_bit_means(stream: RngStream) -> None:
    phi = initial_data_service.sample_bernoulli_initial(0.5, 0.5, 100_000, stream)
    bits = np.asarray(phi.bits)

    assert abs(bits[:, 0].mean() - 0.5) <= 0.01
    assert abs(bits[:, 1].mean() - 0.5) <= 0.01


def test_bernoulli_json_keeps_lazy_extension(stream: RngStream) -> None:
    phi = initial_data_service.sample_bernoulli_initial(0.4, 0.7, 8, stream.child(2, 5))
    restored = InitialData.from_json_dict(json.loads(json.dumps(phi.to_json_dict())))

    assert restored.pair(3000) == phi.pair(3000)


def test_asep_config_from_explicit_bits(example_phi) -> None:
    config = initial_data_service.asep_config_from_initial(example_phi, (-5, 5))

    assert config.positions == (-2, 0, 1, 2, 4)
    assert config.tags == (-2, -1, 0, 1, 2)
    assert config.blue_count == 2


def test_asep_config_window_must_cover_explicit_particles(example_phi) -> None:
    with pytest.raises(InvalidArgumentError):
        initial_data_service.asep_config_from_initial(example_phi, (-1, 1))


def test_offset_config_holds_red_particles_only(example_phi) -> None:
    config = initial_data_service.offset_config_from_initial(example_phi, 4)

    assert config.positions == (1, 2, 4)
    assert config.tags == (0, 1, 2)
    assert config.window == (0, 4)


def test_initial_position_of_tags(example_phi) -> None:
    assert initial_data_service.initial_position(example_phi, -1) == 0
    assert initial_data_service.initial_position(example_phi, -2) == -2
    assert initial_data_service.initial_position(example_phi, 0) == 1
    assert initial_data_service.initial_position(example_phi, 2) == 4
    with pytest.raises(InvalidArgumentError):
        initial_data_service.initial_position(example_phi, -3, limit=20)


def test_phi_spec_parsing(tmp_path: Path, example_phi) -> None:
    assert PhiSpec.parse("step").kind == InitialDataKind.STEP
    bernoulli = PhiSpec.parse("bernoulli:0.3,0.6")
    assert (bernoulli.b1, bernoulli.b2) == (0.3, 0.6)

    path = tmp_path / "phi.json"
    path.write_text(json.dumps(example_phi.to_json_dict()))
    explicit = PhiSpec.parse(f"file:{path}")
    assert explicit.kind == InitialDataKind.EXPLICIT
    assert explicit.bits == example_phi.bits

    with pytest.raises(ValueError):
        PhiSpec.parse("bernoulli:0.3")
    with pytest.raises(ValueError):
        PhiSpec.parse("flat")
