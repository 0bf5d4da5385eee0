import numpy as np
import pytest

from app.core.errors import InvalidArgumentError
from app.core.rng import RngStream
from app.models.experiment_models import ExperimentConfig
from app.models.graph_models import AlteredTimeGraph, DiscreteTimeGraph, TimeEvent
from app.models.report_models import AgreementRow
from app.services.convergence_service import ABSENT, _present_ks, convergence_service
from app.services.initial_data_service import initial_data_service


def _criterion(report, prefix: str):
    matches = [criterion for criterion in report.criteria if criterion.name.startswith(prefix)]
    assert matches, f"no criterion named {prefix}"
    return matches


def _altered(*events: TimeEvent, window=(-1, 2), horizon=3) -> AlteredTimeGraph:
    return AlteredTimeGraph(events=events, window=window, horizon=horizon, delta1=0.1, delta2=0.1)


def test_tilde_q_freezes_then_moves_isolated_events() -> None:
    phi = initial_data_service.explicit_initial([[1, 1], [0, 0], [0, 0]])
    graph = _altered(TimeEvent(1, 0, 1), TimeEvent(2, 1, 2), TimeEvent(3, 0, 1), TimeEvent(3, 2, 3))

    states = convergence_service.evolve_tilde_q(graph, phi, 1, 2, 3)

    assert [state.time for state in states] == [0, 1, 2, 3]
    assert states[1].config.site_tags() == {0: -1, 1: 0}
    assert states[2].config.site_tags() == {0: -1, 2: 0}
    assert states[3].config.site_tags() == {1: -1, 3: 0}


def test_tilde_q_blocks_events_sharing_a_site() -> None:
    phi = initial_data_service.explicit_initial([[0, 1], [0, 0], [0, 0]])
    graph = _altered(TimeEvent(2, 0, 1), TimeEvent(2, 1, 2))

    states = convergence_service.evolve_tilde_q(graph, phi, 1, 2, 2, record_times=[2])

    assert states[-1].config.site_tags() == {0: -1}


def test_tilde_q_needs_a_bounded_graph(step_phi) -> None:
    graph = _altered(TimeEvent(2, 4, 5), window=(-1, 5))

    with pytest.raises(InvalidArgumentError):
        convergence_service.evolve_tilde_q(graph, step_phi, 1, 2, 3)


def test_tilde_q_window_covers_entry_sites() -> None:
    assert convergence_service.tilde_q_window(2, 3, 10) == (-10, 4)
    assert convergence_service.tilde_q_window(5, 3, 2) == (-6, 4)


def _discrete(*events: TimeEvent) -> DiscreteTimeGraph:
    return DiscreteTimeGraph(events=events, window=(-2, 2), horizon=5, delta1=0.1, delta2=0.1)


def test_detect_bad_events(step_phi) -> None:
    detect = convergence_service.detect_bad_events

    assert not detect(_discrete(), step_phi, 2, 2, 5, [-1]).triggered
    assert detect(_discrete(TimeEvent(1, 0, 1)), step_phi, 2, 2, 5, [-1]).early_window_event

    long_jump = detect(_discrete(TimeEvent(3, 0, 2)), step_phi, 2, 2, 5, [-1])
    assert long_jump.long_jump and not long_jump.early_window_event

    pair = detect(_discrete(TimeEvent(4, -1, 0), TimeEvent(4, 1, 2)), step_phi, 2, 2, 5, [-1])
    assert pair.simultaneous_pair and not pair.long_jump

    late_blue = initial_data_service.explicit_initial([[0, 0], [0, 0], [0, 0], [0, 1]])
    assert detect(_discrete(), late_blue, 2, 2, 2, [-1]).initial_escape
    assert not detect(_discrete(), late_blue, 2, 2, 5, [-1]).initial_escape


def test_tail_bound_check_flags_excess_mass() -> None:
    calm = convergence_service.tail_bound_check([10] * 100, 1.0, 1.0, 1, 10)
    at_zero = [row for row in calm if row.k == 0][0]
    assert at_zero.empirical == 1.0 and not at_zero.violated
    assert all(not row.violated for row in calm)

    far = convergence_service.tail_bound_check([13] * 100, 0.1, 1.0, 1, 10)
    assert [row for row in far if row.k == 3][0].violated


def test_height_function_matches_tagged_current(stream: RngStream) -> None:
    config = ExperimentConfig(command="sample-ensemble", phi="bernoulli:0.6,0.4")
    checked, mismatches = convergence_service.current_identity_check(
        0.3, 0.5, config.phi, 2, 1, 4, 30, stream
    )

    assert checked == 30
    assert mismatches == 0


def test_small_convergence_experiment_is_reproducible() -> None:
    config = ExperimentConfig(
        epsilons=[0.5, 0.25], M=3, N=3, replicas=200, identity_replicas=20, times=[1.0], tags=[-1, -2],
        set=(-3, 3),
    )
    first = convergence_service.run_convergence_experiment(config)
    second = convergence_service.run_convergence_experiment(config)

    assert len(first.convergence_rows) == 4
    assert first.convergence_rows == second.convergence_rows
    assert all(0.0 <= row.ks <= 1.0 for row in first.convergence_rows)
    assert first.convergence_rows[0].joint_reference is not None
    assert all(c.passed for c in _criterion(first, "tagged_current_identity"))
    assert all(c.passed for c in _criterion(first, "height_current_identity"))


def test_convergence_rejects_epsilon_with_delta_two_above_one() -> None:
    config = ExperimentConfig(epsilons=[2.0], R=1.0, L=0.3, replicas=10)

    with pytest.raises(InvalidArgumentError, match="δ2 must lie in"):
        convergence_service.run_convergence_experiment(config)


def test_bad_event_census_coupling_is_exact() -> None:
    config = ExperimentConfig(
        command="bad-events", epsilons=[0.02], M=2, N=2, replicas=100, identity_replicas=100, times=[1.0],
    )
    report = convergence_service.run_bad_event_census(config)

    assert len(report.bad_event_rows) == 4
    identity = _criterion(report, "coupling_identity")[0]
    assert identity.passed
    assert "not exercised" not in identity.detail


def test_coupling_identity_fails_when_no_replica_is_checked() -> None:
    config = ExperimentConfig(
        command="bad-events", epsilons=[0.02], M=2, N=2, replicas=20, identity_replicas=0, times=[1.0],
    )
    identity = _criterion(convergence_service.run_bad_event_census(config), "coupling_identity")[0]

    assert not identity.passed
    assert identity.detail.startswith("not exercised")


def test_vertex_calibration_frequencies() -> None:
    config = ExperimentConfig(
        command="sample-ensemble", delta1=0.3, delta2=0.5, n=12, replicas=300, identity_replicas=20, steps=4,
    )
    report = convergence_service.run_vertex_calibration(config)
    rows = {row.key.split(";")[0]: row for row in report.stat_rows}

    assert rows["both_exit"].value == 1.0
    for key in ("vertical_up", "vertical_right", "horizontal_straight", "horizontal_up"):
        assert abs(rows[key].value - rows[key].expected) <= rows[key].radius * 5 / 3
    assert all(c.passed for c in _criterion(report, "height_current_identity"))


def test_asep_oracle_partition_property(example_phi) -> None:
    config = ExperimentConfig(
        command="sim-asep", L=0.4, R=1.0, M=5, N=5, t=1.0, replicas=300, identity_replicas=50,
        phi={"kind": "explicit", "bits": [list(pair) for pair in example_phi.bits]},
    )
    report = convergence_service.run_asep_oracle(config)

    assert all(c.passed for c in _criterion(report, "partition_property"))
    assert [row for row in report.stat_rows if row.name == "site_activity"]


def test_offset_equivalence_exact_laws() -> None:
    config = ExperimentConfig(
        command="sim-offset", delta1=0.25, delta2=0.5, steps=3, n=12, replicas=300, tags=[-1, -2],
    )
    report = convergence_service.run_offset_equivalence(config)

    assert all(c.passed for c in _criterion(report, "exact_direct_vs_graph"))
    for row in report.stat_rows:
        if row.name.endswith("_ks"):
            assert row.value < 0.2


def test_bounded_agreement_rows_are_reproducible() -> None:
    config = ExperimentConfig(command="bound-check", epsilons=[0.1], sizes=[4, 8], replicas=30, t=0.5)

    rows = convergence_service.bounded_agreement_check(config)

    assert [(row.model, row.M) for row in rows] == [("asep", 4), ("asep", 8), ("sixvertex", 4), ("sixvertex", 8)]
    assert all(0.0 <= row.disagreement <= 1.0 and 0.0 <= row.separation <= 1.0 for row in rows)
    assert rows == convergence_service.bounded_agreement_check(config)


def test_bound_check_reports_tail_and_decay() -> None:
    config = ExperimentConfig(
        command="bound-check", epsilons=[0.1], M=6, N=6, sizes=[4, 8], replicas=40, agreement_replicas=20,
    )
    report = convergence_service.run_bound_check(config)

    assert {c.name for c in report.criteria} == {
        "tail_bound", "bounded_decay[asep]", "bounded_decay[sixvertex]", "disagreement_within_unseparated[asep]",
        "disagreement_within_unseparated[sixvertex]", "separated_replicas_agree[asep]",
    }
    assert _criterion(report, "separated_replicas_agree")[0].passed
    assert report.tail_rows and all(row.tag == -1 and row.epsilon == 0.1 for row in report.tail_rows)
    assert all(row.replicas == 20 for row in report.agreement_rows)


def test_tilde_q_experiment_starts_from_bounded_asep() -> None:
    config = ExperimentConfig(
        command="bad-events", epsilons=[0.1, 0.05], M=3, N=3, replicas=40, times=[0.5],
    )
    report = convergence_service.run_tilde_q_experiment(config)

    assert _criterion(report, "tilde_q_initial_match")[0].passed
    assert [row.key for row in report.stat_rows] == ["epsilon=0.1;tag=-1;t=0.5", "epsilon=0.05;tag=-1;t=0.5"]
    assert len(_criterion(report, "tilde_q_ks_non_increasing")) == 1


def test_tilde_q_needs_two_epsilons_to_pass() -> None:
    config = ExperimentConfig(command="bad-events", epsilons=[0.1], M=3, N=3, replicas=20, times=[0.5])
    monotone = _criterion(convergence_service.run_tilde_q_experiment(config), "tilde_q_ks_non_increasing")[0]

    assert not monotone.passed
    assert monotone.detail.startswith("not exercised")


def _agreement(model: str, bound: int, disagreement: float, separation: float, leaks: int = 0) -> AgreementRow:
    return AgreementRow(
        model=model, M=bound, N=bound, replicas=1000, disagreement=disagreement, radius=0.0,
        separation=separation, separated_disagreements=leaks,
    )


def test_bounded_decay_uses_unseparated_frequency() -> None:
    rows = [_agreement("asep", 16, 0.0, 0.43), _agreement("asep", 32, 0.0, 0.72), _agreement("asep", 64, 0.0, 0.95)]
    criteria = {c.name: c for c in convergence_service._agreement_criteria(rows)}

    assert criteria["bounded_decay[asep]"].passed
    assert criteria["disagreement_within_unseparated[asep]"].passed
    assert criteria["separated_replicas_agree[asep]"].passed


def test_bounded_decay_fails_when_nothing_is_left_to_decay() -> None:
    rows = [_agreement("sixvertex", 16, 0.0, 1.0), _agreement("sixvertex", 32, 0.0, 1.0)]
    decay = {c.name: c for c in convergence_service._agreement_criteria(rows)}["bounded_decay[sixvertex]"]

    assert not decay.passed
    assert decay.detail.startswith("not exercised")


def test_separated_asep_replicas_must_agree() -> None:
    rows = [_agreement("asep", 16, 0.01, 0.5, leaks=1), _agreement("asep", 32, 0.0, 0.8)]
    criteria = {c.name: c for c in convergence_service._agreement_criteria(rows)}

    assert not criteria["separated_replicas_agree[asep]"].passed
    assert criteria["disagreement_within_unseparated[asep]"].passed


def test_rescaled_graph_counts_approach_poisson() -> None:
    row = convergence_service.rescaled_poisson_check(0.3, 1.0, 0.01, 1.0, 4000, RngStream(seed=3, stream_id=10))
    mean = float(row.key.split("mean=")[1])

    assert row.value <= row.radius
    assert abs(mean - 1.3) < 4 * (1.3 / 4000) ** 0.5


def test_absent_tags_are_dropped_from_ks_samples() -> None:
    present = np.array([0, 1, 2, 3] * 25)
    with_absent = np.concatenate([present, np.full(60, ABSENT)])

    ks, radius, samples = _present_ks(with_absent, present, 0)

    assert ks == 0.0
    assert samples == 100
    assert radius == pytest.approx(_present_ks(present, present, 0)[1])
    with pytest.raises(InvalidArgumentError):
        _present_ks(np.full(10, ABSENT), present, 0)
