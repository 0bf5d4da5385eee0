"""
Convergence experiments: bounded models, the altered nearest-neighbor process, the
bad-event census and the Monte Carlo comparison of the offset six-vertex model with the ASEP.

Every random component of an experiment owns a stream id; chunk workers derive
``child(0)`` for the main draws, ``child(1)`` for a second independent model and
``child(2, k)`` for the initial data of replica ``first + k``.
"""
from collections import Counter
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.core.config import settings
from app.core.errors import InvalidArgumentError, InvariantViolationError
from app.core.rng import RngStream
from app.models.experiment_models import ExperimentConfig, PhiSpec, steps_for
from app.models.graph_models import AlteredTimeGraph, DiscreteTimeGraph
from app.models.lattice_models import InitialData, InitialDataKind, ParticleConfig, Window
from app.models.report_models import (
    AgreementRow,
    BadEventFlags,
    BadEventRow,
    ConvergenceReport,
    ConvergenceRow,
    CriterionResult,
    StatRow,
    TailBoundRow,
)
from app.models.trajectory_models import TildeQState
from app.services.asep_service import asep_service
from app.services.initial_data_service import initial_data_service
from app.services.replica_pool import ReplicaPool
from app.services.sixvertex_service import sixvertex_service
from app.services.statistics_service import statistics_service
from app.services.timegraph_service import timegraph_service
import logging

logger = logging.getLogger(__name__)

# position recorded for a tag that is not present
ABSENT = -10 ** 9

OFFSET_STREAM = 1
ASEP_STREAM = 2
ENSEMBLE_STREAM = 3
ORACLE_STREAM = 4
EQUIVALENCE_STREAM = 5
BAD_EVENT_STREAM = 6
AGREEMENT_STREAM = 7
TILDE_Q_STREAM = 8
IDENTITY_STREAM = 9
RESCALED_STREAM = 10


def _merge(chunks: Sequence[Dict[str, Any]]) -> Dict[str, Any]:
    """Concatenate array entries and add up scalar entries of chunk results, in chunk order"""
    merged: Dict[str, Any] = {}
    for key, value in chunks[0].items():
        if isinstance(value, np.ndarray):
            merged[key] = np.concatenate([chunk[key] for chunk in chunks])
        else:
            merged[key] = sum(chunk[key] for chunk in chunks)
    return merged


def _phi(phi_spec: PhiSpec, n: int, stream: RngStream, index: int) -> InitialData:
    return initial_data_service.realize(phi_spec, n, stream.child(2, index))


def _position(config: ParticleConfig, tag: int) -> int:
    return config.position_of(tag) if config.has_tag(tag) else ABSENT


def _current(config: ParticleConfig, x: int) -> int:
    """Blue particles right of x minus red particles at or left of x"""
    current = 0
    for site, tag in zip(config.positions, config.tags):
        if tag < 0 and site > x:
            current += 1
        elif tag >= 0 and site <= x:
            current -= 1
    return current


def _query_tags(cfg: ExperimentConfig) -> List[int]:
    return sorted(set(cfg.tags) | {-cfg.r})


def _check_epsilon(cfg: ExperimentConfig, epsilon: float) -> Tuple[float, float, List[int]]:
    delta1, delta2 = epsilon * cfg.L, epsilon * cfg.R
    for name, value in (("δ1", delta1), ("δ2", delta2)):
        if not 0.0 <= value < 1.0:
            raise InvalidArgumentError(f"ε = {epsilon} gives {name} = {value}; {name} must lie in [0,1)")
    steps = [steps_for(t, epsilon) for t in cfg.times]
    if steps[0] < 1:
        raise InvalidArgumentError(f"ε = {epsilon} is larger than the query time {cfg.times[0]}")
    return delta1, delta2, steps


def _joint_frequency(positions: np.ndarray, columns: List[int], bounds: Tuple[int, int]) -> float:
    """Fraction of replicas whose chosen tags all lie in [lo, hi] at every query time"""
    lo, hi = bounds
    chosen = positions[:, columns]
    return float(np.mean(np.all((chosen >= lo) & (chosen <= hi), axis=(1, 2))))


def _present_ks(a: np.ndarray, b: np.ndarray, tag: int) -> Tuple[float, float, int]:
    """KS distance and critical radius over the replicas in which the tag is present"""
    a = a[a != ABSENT]
    b = b[b != ABSENT]
    if a.size == 0 or b.size == 0:
        raise InvalidArgumentError(f"tag {tag} is absent from every replica of one of the compared models")
    ks = statistics_service.ks_distance(a, b)
    return ks, statistics_service.ks_radius(a.size, b.size, settings.KS_ALPHA), min(a.size, b.size)


def _decays(values: Sequence[float], counts: Sequence[int]) -> bool:
    """
    Each frequency lies below the previous one by more than 3σ of the difference, or both vanish.
    An all-zero series exercises nothing and does not count as decaying.
    """
    if not any(values):
        return False
    for k in range(1, len(values)):
        previous, current = values[k - 1], values[k]
        if previous == 0.0 and current == 0.0:
            continue
        noise = statistics_service.difference_radius(previous, counts[k - 1], current, counts[k])
        if not previous - current > noise:
            return False
    return True


def _offset_chunk(stream: RngStream, first: int, size: int, cfg: ExperimentConfig, epsilon: float) -> Dict[str, Any]:
    """Sampled offset dynamics: tagged positions, currents and origins of tag -r"""
    delta1, delta2, steps = _check_epsilon(cfg, epsilon)
    tags = _query_tags(cfg)
    hi = settings.REFERENCE_WINDOW_FACTOR * cfg.N
    gen = stream.child(0).generator()

    positions = np.full((size, len(tags), len(steps)), ABSENT, dtype=np.int64)
    currents = np.zeros((size, len(steps)), dtype=np.int64)
    origins = np.zeros(size, dtype=np.int64)
    mismatches = 0
    for k in range(size):
        phi = _phi(cfg.phi, max(hi, steps[-1]) + 1, stream, first + k)
        state = sixvertex_service.initial_offset_state(phi, hi)
        trajectory = sixvertex_service.evolve_offset_direct(
            state, delta1, delta2, phi, steps[-1], gen, record_times=steps
        )
        by_time = {s.time: s.config for s in trajectory}
        for a, T in enumerate(steps):
            config = by_time[T]
            for b, tag in enumerate(tags):
                positions[k, b, a] = _position(config, tag)
            currents[k, a] = _current(config, cfg.x)
            # J >= r  <=>  q_{-r} > x, with a missing blue tag on the far left and a missing red on the far right
            tagged = config.position_of(-cfg.r) if config.has_tag(-cfg.r) else (ABSENT if cfg.r > 0 else -ABSENT)
            mismatches += int((currents[k, a] >= cfg.r) != (tagged > cfg.x))
        origins[k] = initial_data_service.initial_position(phi, -cfg.r)
    return {"positions": positions, "currents": currents, "origins": origins, "mismatches": mismatches}


def _asep_chunk(stream: RngStream, first: int, size: int, cfg: ExperimentConfig) -> Dict[str, Any]:
    """ASEP reference on a window REFERENCE_WINDOW_FACTOR times [-M, N]"""
    tags = _query_tags(cfg)
    factor = settings.REFERENCE_WINDOW_FACTOR
    window = (-factor * cfg.M, factor * cfg.N)
    horizon = cfg.times[-1]
    gen = stream.child(0).generator()

    positions = np.full((size, len(tags), len(cfg.times)), ABSENT, dtype=np.int64)
    currents = np.zeros((size, len(cfg.times)), dtype=np.int64)
    for k in range(size):
        phi = _phi(cfg.phi, factor * max(cfg.M, cfg.N) + 1, stream, first + k)
        config = initial_data_service.asep_config_from_initial(phi, window)
        graph = timegraph_service.sample_continuous_graph(cfg.L, cfg.R, window, horizon, gen)
        trajectory = asep_service.evolve_asep(config, graph, horizon, cfg.times)
        for a, t in enumerate(cfg.times):
            snapshot = trajectory.at(t)
            for b, tag in enumerate(tags):
                positions[k, b, a] = _position(snapshot, tag)
            currents[k, a] = asep_service.asep_current(trajectory, cfg.x, t)
    return {"positions": positions, "currents": currents}


def _calibration_chunk(
        stream: RngStream, first: int, size: int, cfg: ExperimentConfig, delta1: float, delta2: float
) -> Dict[str, Any]:
    """Exit counts at interior vertices: (total, hit) for vertical-only, horizontal-only, both, empty"""
    n = cfg.n
    gen = stream.child(0).generator()
    if cfg.phi.kind == InitialDataKind.DOUBLE_BERNOULLI:
        y_bits = np.zeros((size, n + 1), dtype=np.int8)
        x_bits = np.zeros((size, n + 1), dtype=np.int8)
        for k in range(size):
            x_row, y_row = sixvertex_service.boundary_bits(_phi(cfg.phi, n, stream, first + k), n)
            x_bits[k], y_bits[k] = x_row[0], y_row[0]
    else:
        x_row, y_row = sixvertex_service.boundary_bits(initial_data_service.realize(cfg.phi, n, stream), n)
        x_bits = np.repeat(x_row, size, axis=0)
        y_bits = np.repeat(y_row, size, axis=0)
    sweep = sixvertex_service.sample_ensemble_arrays(delta1, delta2, x_bits, y_bits, n, gen)

    xs, ys = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
    interior = (xs >= 2) & (ys >= 2) & (xs + ys <= n)
    a = sweep.in_left.astype(bool) & interior
    b = sweep.in_bottom.astype(bool) & interior
    top = sweep.out_top.astype(bool)
    right = sweep.out_right.astype(bool)
    vertical = b & ~a
    horizontal = a & ~b
    both = a & b
    empty = interior & ~a & ~b
    counts = np.array([
        vertical.sum(), (vertical & top).sum(),
        horizontal.sum(), (horizontal & right).sum(),
        both.sum(), (both & top & right).sum(),
        empty.sum(), (empty & ~top & ~right).sum(),
    ], dtype=np.int64)
    return {"counts": counts}


def _oracle_chunk(stream: RngStream, first: int, size: int, cfg: ExperimentConfig) -> Dict[str, Any]:
    """Graphical vs naive ASEP on [-M, N] with blocked boundaries, site activity and partition equality"""
    window = (-cfg.M, cfg.N)
    graph_gen = stream.child(0).generator()
    naive_gen = stream.child(1).generator()
    site = 0 if -cfg.M < 0 < cfg.N else (cfg.N - cfg.M) // 2

    graphical = np.zeros((size, cfg.M + cfg.N + 1), dtype=np.int8)
    naive = np.zeros((size, cfg.M + cfg.N + 1), dtype=np.int8)
    active = np.zeros(size, dtype=np.int64)
    checked = 0
    mismatches = 0
    for k in range(size):
        phi = _phi(cfg.phi, max(cfg.M, cfg.N) + 1, stream, first + k)
        config = initial_data_service.asep_config_from_initial(phi, window)
        graph = timegraph_service.sample_continuous_graph(cfg.L, cfg.R, window, cfg.t, graph_gen)
        trajectory = asep_service.evolve_asep(config, graph, cfg.t)
        graphical[k] = asep_service.occupancy_vector(trajectory, cfg.t)
        naive_trajectory = asep_service.evolve_asep_naive(config, cfg.L, cfg.R, cfg.t, naive_gen)
        naive[k] = asep_service.occupancy_vector(naive_trajectory, cfg.t)
        active[k] = int(site not in timegraph_service.find_inactive_sites(graph, cfg.t))
        if first + k < cfg.identity_replicas:
            checked += 1
            partitioned = asep_service.evolve_asep_partitioned(config, graph, cfg.t)
            mismatches += int(partitioned.at(cfg.t) != trajectory.at(cfg.t))
    return {"graphical": graphical, "naive": naive, "active": active, "checked": checked, "mismatches": mismatches}


def _equivalence_chunk(
        stream: RngStream, first: int, size: int, cfg: ExperimentConfig, phi: InitialData, delta1: float,
        delta2: float
) -> Dict[str, Any]:
    """q_tag(steps) from path ensembles, the sampled dynamics and the graph-driven dynamics"""
    tags = cfg.tags
    steps = cfg.steps
    n = cfg.n
    direct_gen = stream.child(0).generator()
    graph_gen = stream.child(1).generator()
    ensemble_gen = stream.child(3).generator()

    x_row, y_row = sixvertex_service.boundary_bits(phi, n)
    x_bits = np.repeat(x_row, size, axis=0)
    y_bits = np.repeat(y_row, size, axis=0)
    sweep = sixvertex_service.sample_ensemble_arrays(delta1, delta2, x_bits, y_bits, n, ensemble_gen)
    ensemble = np.full((size, len(tags)), ABSENT, dtype=np.int64)
    for b, tag in enumerate(tags):
        p, present = sixvertex_service.batch_tag_positions(sweep, x_bits, y_bits, steps, tag)
        ensemble[:, b] = np.where(present, p - steps, ABSENT)

    state = sixvertex_service.initial_offset_state(phi, n)
    window = (-steps, 2 * n)
    direct = np.full((size, len(tags)), ABSENT, dtype=np.int64)
    graph_driven = np.full((size, len(tags)), ABSENT, dtype=np.int64)
    for k in range(size):
        final = sixvertex_service.evolve_offset_direct(
            state, delta1, delta2, phi, steps, direct_gen, record_times=[steps]
        )[-1]
        D = timegraph_service.sample_discrete_graph(delta1, delta2, window, steps, graph_gen)
        resampled = sixvertex_service.evolve_offset_graph(state, D, phi, steps, record_times=[steps])[-1]
        for b, tag in enumerate(tags):
            direct[k, b] = _position(final.config, tag)
            graph_driven[k, b] = _position(resampled.config, tag)
    return {"ensemble": ensemble, "direct": direct, "graph": graph_driven}


def _agreement_chunk(
        stream: RngStream, first: int, size: int, cfg: ExperimentConfig, model: str, bound: int
) -> Dict[str, Any]:
    """Coupled bounded and reference models on one graph; disagreement on the central window"""
    factor = settings.REFERENCE_WINDOW_FACTOR
    window = (-factor * bound, factor * bound)
    checkpoints = settings.ASEP_CHECKPOINTS
    gen = stream.child(0).generator()
    disagreements = 0
    separations = 0
    separated_disagreements = 0
    for k in range(size):
        phi = _phi(cfg.phi, factor * bound + steps_for(cfg.t, cfg.epsilons[0]) + 1, stream, first + k)
        if model == "asep":
            times = [cfg.t * (c + 1) / checkpoints for c in range(checkpoints)]
            central = (-(bound // 32), bound // 32)
            config = initial_data_service.asep_config_from_initial(phi, window)
            graph = timegraph_service.sample_continuous_graph(cfg.L, cfg.R, window, cfg.t, gen)
            bounded = timegraph_service.restrict_graph(graph, bound, bound)
            reference = asep_service.evolve_asep(config, graph, cfg.t, times)
            truncated = asep_service.evolve_asep(config, bounded, cfg.t, times)
            differs = any(
                reference.at(t).restricted_to(*central) != truncated.at(t).restricted_to(*central) for t in times
            )
            free = timegraph_service.find_jump_free_sites(graph, cfg.t)
        else:
            delta1, delta2 = cfg.vertex_params(cfg.epsilons[0])
            T = steps_for(cfg.t, cfg.epsilons[0])
            times = sorted({max(1, (T * (c + 1)) // checkpoints) for c in range(checkpoints)})
            central = (-(bound // 2), bound // 2)
            graph = timegraph_service.sample_discrete_graph(delta1, delta2, window, T, gen)
            bounded = timegraph_service.restrict_graph(graph, bound, bound)
            state = sixvertex_service.initial_offset_state(phi, factor * bound)
            reference = sixvertex_service.evolve_offset_graph(state, graph, phi, T, record_times=times)
            truncated = sixvertex_service.evolve_offset_graph(state, bounded, phi, T, record_times=times)
            differs = any(
                a.config.restricted_to(*central) != b.config.restricted_to(*central)
                for a, b in zip(reference, truncated)
            )
            free = timegraph_service.find_jump_free_sites(graph, T)
        left = any(-bound <= m <= -(bound // 16) for m in free)
        right = any(bound // 16 <= m <= bound for m in free)
        disagreements += int(differs)
        separations += int(left and right)
        separated_disagreements += int(differs and left and right)
    return {
        "disagreements": disagreements,
        "separations": separations,
        "separated_disagreements": separated_disagreements,
    }


def _bad_event_chunk(
        stream: RngStream, first: int, size: int, cfg: ExperimentConfig, epsilon: float
) -> Dict[str, Any]:
    """Bad-event flags per replica; on flag-free replicas the altered and bounded offset models are compared"""
    delta1, delta2, steps = _check_epsilon(cfg, epsilon)
    T = steps[-1]
    M, N = cfg.M, cfg.N
    gen = stream.child(0).generator()
    flags = np.zeros((size, 4), dtype=np.int8)
    checked = 0
    mismatches = 0
    for k in range(size):
        phi = _phi(cfg.phi, T + M + N + 2, stream, first + k)
        graph = timegraph_service.sample_discrete_graph(delta1, delta2, (-M - 1, N + 1), T, gen)
        bounded = timegraph_service.restrict_graph(graph, M, N)
        found = ConvergenceService.detect_bad_events(bounded, phi, M, N, T, cfg.tags, escape_steps=steps[0])
        flags[k] = (found.initial_escape, found.early_window_event, found.long_jump, found.simultaneous_pair)
        if found.triggered or first + k >= cfg.identity_replicas:
            continue
        checked += 1
        altered = ConvergenceService.evolve_tilde_q(
            timegraph_service.alter_graph(bounded), phi, M, N, T, record_times=steps
        )
        offset = sixvertex_service.evolve_offset_graph(
            sixvertex_service.initial_offset_state(phi, N + 1), bounded, phi, T, record_times=steps
        )
        for a, b in zip(altered, offset):
            for tag in cfg.tags:
                mismatches += int(_position(a.config, tag) != _position(b.config, tag))
    return {"flags": flags, "checked": checked, "mismatches": mismatches}


def _rescaled_count_chunk(
        stream: RngStream, first: int, size: int, delta1: float, delta2: float, epsilon: float, t: float
) -> Dict[str, Any]:
    """Rescaled events with source i and time at most t, one site per replica"""
    window = (first, first + size - 1)
    graph = timegraph_service.sample_discrete_graph(
        delta1, delta2, window, steps_for(t, epsilon), stream.child(0).generator()
    )
    sources = [event.i - first for event in timegraph_service.rescale_graph(graph, epsilon) if event.t <= t + 1e-9]
    return {"counts": np.bincount(np.asarray(sources, dtype=np.int64), minlength=size)}


def _tilde_q_chunk(
        stream: RngStream, first: int, size: int, cfg: ExperimentConfig, epsilon: float, window: Window
) -> Dict[str, Any]:
    """Tagged positions of the altered process at floor(t / epsilon)"""
    delta1, delta2, steps = _check_epsilon(cfg, epsilon)
    M, N = cfg.M, cfg.N
    gen = stream.child(0).generator()
    positions = np.full((size, len(cfg.tags), len(steps)), ABSENT, dtype=np.int64)
    for k in range(size):
        phi = _phi(cfg.phi, window[1] - window[0] + 2, stream, first + k)
        graph = timegraph_service.sample_discrete_graph(delta1, delta2, (-M, N), steps[-1], gen)
        trajectory = ConvergenceService.evolve_tilde_q(
            timegraph_service.alter_graph(graph), phi, M, N, steps[-1], record_times=steps, window=window
        )
        for a, state in enumerate(trajectory):
            for b, tag in enumerate(cfg.tags):
                positions[k, b, a] = _position(state.config, tag)
    return {"positions": positions}


def _bounded_asep_chunk(
        stream: RngStream, first: int, size: int, cfg: ExperimentConfig, window: Window
) -> Dict[str, Any]:
    """X^{[-M, N]} on the window of the altered process"""
    gen = stream.child(0).generator()
    horizon = cfg.times[-1]
    positions = np.full((size, len(cfg.tags), len(cfg.times)), ABSENT, dtype=np.int64)
    for k in range(size):
        phi = _phi(cfg.phi, window[1] - window[0] + 2, stream, first + k)
        config = initial_data_service.asep_config_from_initial(phi, window)
        graph = timegraph_service.restrict_graph(
            timegraph_service.sample_continuous_graph(cfg.L, cfg.R, window, horizon, gen), cfg.M, cfg.N
        )
        trajectory = asep_service.evolve_asep(config, graph, horizon, cfg.times)
        for a, t in enumerate(cfg.times):
            for b, tag in enumerate(cfg.tags):
                positions[k, b, a] = _position(trajectory.at(t), tag)
    return {"positions": positions}


class ConvergenceService:
    @staticmethod
    def tilde_q_window(M: int, N: int, steps: int, graph_window: Optional[Window] = None) -> Window:
        """Sites represented by the altered process: [-M, N], the entry sites down to -steps, one site of margin"""
        lo, hi = graph_window or (-M, N)
        return min(lo, -M, 1 - steps) - 1, max(hi, N) + 1

    @staticmethod
    def evolve_tilde_q(
            graph: AlteredTimeGraph,
            phi: InitialData,
            M: int,
            N: int,
            steps: int,
            record_times: Optional[Sequence[int]] = None,
            window: Optional[Window] = None
    ) -> List[TildeQState]:
        """
        Nearest-neighbor simultaneous-update process: frozen through time M; afterwards an
        event moves its particle iff the destination was empty at t-1 and no other event
        at time t touches either of its two sites.

        ``window`` defaults to :meth:`tilde_q_window` and may only be widened.
        """
        for event in graph.events:
            if not -M <= event.i <= N:
                raise InvalidArgumentError(f"graph is not [{-M}, {N}]-bounded: {event}")
        if steps > graph.horizon:
            raise InvalidArgumentError(f"steps {steps} exceed graph horizon {graph.horizon}")
        minimal = ConvergenceService.tilde_q_window(M, N, steps, graph.window)
        if window is None:
            window = minimal
        elif not (window[0] <= minimal[0] and minimal[1] <= window[1]):
            raise InvalidArgumentError(f"window {window} does not contain {minimal}")
        config = initial_data_service.asep_config_from_initial(phi, window)
        by_time: Dict[int, list] = {}
        for event in graph.events:
            by_time.setdefault(event.t, []).append(event)

        wanted = None if record_times is None else set(record_times)
        trajectory = [TildeQState(config=config, time=0, M=M, N=N)] if wanted is None or 0 in wanted else []
        site_tags = config.site_tags()
        lo, hi = window
        for t in range(1, steps + 1):
            events = by_time.get(t, []) if t > M else []
            if events:
                touches = Counter(site for event in events for site in (event.i, event.j))
                moves = [
                    event for event in events
                    if event.i in site_tags and event.j not in site_tags and lo <= event.j <= hi
                    and touches[event.i] == 1 and touches[event.j] == 1
                ]
                for event in moves:
                    site_tags[event.j] = site_tags.pop(event.i)
            if wanted is None or t in wanted:
                trajectory.append(TildeQState(
                    config=ParticleConfig.from_tagged_sites(site_tags, window), time=t, M=M, N=N
                ))
        return trajectory

    @staticmethod
    def detect_bad_events(
            D: DiscreteTimeGraph,
            phi: InitialData,
            M: int,
            N: int,
            T: int,
            tags: Sequence[int],
            escape_steps: Optional[int] = None
    ) -> BadEventFlags:
        """
        Flags: (1) a queried tag starts at or left of -T (``escape_steps`` replaces T here when given);
        (2) an event at t in [1, M] with source in [-M, N]; (3) a long jump j >= i + 2 at t in [1, T];
        (4) two distinct events at one time t in [1, T] with sources in [-M, N].
        """
        threshold = escape_steps or T
        initial_escape = False
        for tag in tags:
            if tag >= 0:
                continue
            try:
                initial_data_service.initial_position(phi, tag, limit=threshold)
            except InvalidArgumentError:
                initial_escape = True

        early = long_jump = False
        per_time: Counter = Counter()
        for event in D.events:
            if not -M <= event.i <= N:
                continue
            if event.t <= M:
                early = True
            if event.t <= T:
                if event.j >= event.i + 2:
                    long_jump = True
                per_time[event.t] += 1
        return BadEventFlags(
            initial_escape=initial_escape,
            early_window_event=early,
            long_jump=long_jump,
            simultaneous_pair=any(count >= 2 for count in per_time.values()),
        )

    @staticmethod
    def ks_distance(a: Sequence[int], b: Sequence[int]) -> float:
        return statistics_service.ks_distance(a, b)

    @staticmethod
    def tail_bound_check(
            samples: Sequence[int],
            t: float,
            R: float,
            r: int,
            T: int,
            L: float = 0.0,
            origin: Any = 0,
            k_range: Sequence[int] = tuple(range(-4, 9)),
            epsilon: Optional[float] = None
    ) -> List[TailBoundRow]:
        """
        Empirical P[p_{-r}(T) = k + T + origin] against (tR)^k / k! for k >= 0 and
        (tL)^|k| / |k|! for k < 0, flagged when exceeded by more than 3σ.
        """
        samples = np.asarray(samples, dtype=np.int64)
        if samples.size == 0:
            raise InvalidArgumentError("tail_bound_check needs samples")
        displacement = samples - T - np.asarray(origin, dtype=np.int64)
        rows = []
        for k in k_range:
            empirical = float(np.mean(displacement == k))
            bound = statistics_service.tail_bound(k, t, R if k >= 0 else L)
            radius = statistics_service.binomial_radius(min(bound, 1.0), samples.size)
            rows.append(TailBoundRow(
                epsilon=epsilon, tag=-r, k=k, empirical=empirical, bound=bound, radius=radius,
                violated=empirical > bound + radius,
            ))
        return rows

    @staticmethod
    def rescaled_poisson_check(
            L: float, R: float, epsilon: float, t: float, replicas: int, stream: RngStream, threads: int = 1
    ) -> StatRow:
        """
        Events with a given source in the ε-rescaled discrete graph up to time t, against
        Poisson((L + R) t). The tolerance adds the Le Cam distance ε(L² + R²), the
        floor(t/ε) rounding ε(L + R) and 4σ of sampling noise.
        """
        delta1, delta2 = epsilon * L, epsilon * R
        if steps_for(t, epsilon) < 1:
            raise InvalidArgumentError(f"ε = {epsilon} leaves no step before t = {t}")
        counts = _merge(ReplicaPool(threads).run(
            _rescaled_count_chunk, stream, replicas, delta1, delta2, epsilon, t
        ))["counts"]
        mean = (L + R) * t
        observed = statistics_service.empirical_pmf(counts)
        support = range(max(max(observed) + 1, 9))
        expected = {k: statistics_service.poisson_pmf(k, mean) for k in support}
        gap = max(abs(observed.get(k, 0.0) - expected[k]) for k in support)
        noise = max(statistics_service.binomial_radius(p, replicas, sigmas=4.0) for p in expected.values())
        tolerance = epsilon * (L ** 2 + R ** 2) + epsilon * (L + R) + noise
        return StatRow(
            name="rescaled_poisson", key=f"epsilon={epsilon};t={t};mean={float(np.mean(counts)):.4f}",
            value=gap, expected=0.0, radius=tolerance,
        )

    @staticmethod
    def current_identity_check(
            delta1: float,
            delta2: float,
            phi_spec: PhiSpec,
            x: int,
            r: int,
            T: int,
            replicas: int,
            stream: RngStream
    ) -> Tuple[int, int]:
        """
        Per sampled ensemble: H(x + T, T) >= r  <=>  p_{-r}(T) > x + T.
        Returns (ensembles checked, mismatches).
        """
        if x + T < 0:
            raise InvalidArgumentError(f"x + T must be non-negative, got {x + T}")
        n = x + 3 * T + 40
        gen = stream.child(0).generator()
        mismatches = 0
        for k in range(replicas):
            phi = _phi(phi_spec, n, stream, k)
            ensemble = sixvertex_service.sample_path_ensemble(delta1, delta2, phi, n, gen)
            height = sixvertex_service.height_function(ensemble, x + T, T)
            config = sixvertex_service.extract_particles(ensemble, T)
            if config.has_tag(-r):
                beyond = config.position_of(-r) > x + T
            else:
                beyond = r <= phi.blue_count(T)
            mismatches += int((height >= r) != beyond)
        return replicas, mismatches

    @staticmethod
    def run_convergence_experiment(cfg: ExperimentConfig) -> ConvergenceReport:
        """Offset model at each ε against one ASEP reference: tagged-position KS and current gaps"""
        for epsilon in cfg.epsilons:
            _check_epsilon(cfg, epsilon)
        logger.info(f"Convergence experiment: ε in {cfg.epsilons}, {cfg.replicas} replicas, {cfg.threads} threads")
        pool = ReplicaPool(cfg.threads)
        tags = _query_tags(cfg)
        reference = _merge(pool.run(_asep_chunk, RngStream(seed=cfg.seed, stream_id=ASEP_STREAM), cfg.replicas, cfg))
        ref_p = (reference["currents"] >= cfg.r).mean(axis=0)

        rows: List[ConvergenceRow] = []
        mismatches = 0
        for e, epsilon in enumerate(cfg.epsilons):
            delta1, delta2, steps = _check_epsilon(cfg, epsilon)
            stream = RngStream(seed=cfg.seed, stream_id=OFFSET_STREAM).child(e)
            offset = _merge(pool.run(_offset_chunk, stream, cfg.replicas, cfg, epsilon))
            mismatches += offset["mismatches"]
            off_p = (offset["currents"] >= cfg.r).mean(axis=0)
            joint_offset = joint_reference = None
            if cfg.set is not None:
                chosen = [tags.index(tag) for tag in cfg.tags]
                joint_offset = _joint_frequency(offset["positions"], chosen, cfg.set)
                joint_reference = _joint_frequency(reference["positions"], chosen, cfg.set)
            for tag in cfg.tags:
                b = tags.index(tag)
                for a, t in enumerate(cfg.times):
                    ks, radius, samples = _present_ks(
                        offset["positions"][:, b, a], reference["positions"][:, b, a], tag
                    )
                    rows.append(ConvergenceRow(
                        epsilon=epsilon,
                        delta1=delta1,
                        delta2=delta2,
                        steps=steps[a],
                        samples=samples,
                        tag=tag,
                        time=t,
                        ks=ks,
                        ks_radius=radius,
                        current_offset=float(off_p[a]),
                        current_reference=float(ref_p[a]),
                        current_gap=float(abs(off_p[a] - ref_p[a])),
                        current_radius=statistics_service.difference_radius(
                            float(off_p[a]), cfg.replicas, float(ref_p[a]), cfg.replicas
                        ),
                        joint_offset=joint_offset,
                        joint_reference=joint_reference,
                    ))
            logger.info(f"ε = {epsilon}: offset model run to time {steps[-1]}")

        report = ConvergenceReport(config=cfg.provenance(), convergence_rows=rows)
        report.criteria.extend(ConvergenceService._convergence_criteria(cfg, rows, mismatches))

        for e, epsilon in enumerate(cfg.epsilons):
            row = ConvergenceService.rescaled_poisson_check(
                cfg.L, cfg.R, epsilon, cfg.times[0], cfg.replicas,
                RngStream(seed=cfg.seed, stream_id=RESCALED_STREAM).child(e), cfg.threads,
            )
            report.stat_rows.append(row)
            report.criteria.append(CriterionResult(
                name=f"rescaled_poisson[ε={epsilon}]", passed=row.value <= row.radius,
                detail=f"max pmf gap {row.value:.4f} (tolerance {row.radius:.4f}), {row.key}",
            ))

        checked, wrong = ConvergenceService.current_identity_check(
            *cfg.vertex_params(cfg.epsilons[-1]), cfg.phi, cfg.x, cfg.r,
            steps_for(cfg.times[0], cfg.epsilons[-1]), cfg.identity_replicas,
            RngStream(seed=cfg.seed, stream_id=IDENTITY_STREAM),
        )
        report.stat_rows.append(StatRow(name="height_identity_mismatches", key=f"checked={checked}", value=wrong))
        report.criteria.append(CriterionResult(
            name="height_current_identity", passed=wrong == 0, detail=f"{wrong} mismatches in {checked} ensembles",
        ))
        return report

    @staticmethod
    def _convergence_criteria(
            cfg: ExperimentConfig, rows: List[ConvergenceRow], mismatches: int
    ) -> List[CriterionResult]:
        criteria = []
        smallest = cfg.epsilons[-1]
        for tag in cfg.tags:
            for t in cfg.times:
                series = [row for row in rows if row.tag == tag and row.time == t]
                monotone = all(
                    later.ks <= earlier.ks + 2 * later.ks_radius for earlier, later in zip(series, series[1:])
                )
                final = series[-1]
                criteria.append(CriterionResult(
                    name=f"ks_non_increasing[tag={tag},t={t}]", passed=monotone,
                    detail=", ".join(f"ε={row.epsilon}: {row.ks:.4f}" for row in series),
                ))
                criteria.append(CriterionResult(
                    name=f"ks_final[tag={tag},t={t}]", passed=final.ks <= settings.KS_TOLERANCE,
                    detail=f"KS = {final.ks:.4f} at ε = {smallest} (tolerance {settings.KS_TOLERANCE})",
                ))
        for t in cfg.times:
            final = [row for row in rows if row.time == t and row.epsilon == smallest][0]
            criteria.append(CriterionResult(
                name=f"current_gap[x={cfg.x},r={cfg.r},t={t}]",
                passed=final.current_gap <= settings.CURRENT_TOLERANCE,
                detail=f"|p_ε - p| = {final.current_gap:.4f} at ε = {smallest} (tolerance {settings.CURRENT_TOLERANCE})",
            ))
        criteria.append(CriterionResult(
            name="tagged_current_identity", passed=mismatches == 0, detail=f"{mismatches} mismatches",
        ))
        return criteria

    @staticmethod
    def bounded_agreement_check(cfg: ExperimentConfig, sizes: Optional[Sequence[int]] = None) -> List[AgreementRow]:
        """Disagreement frequency of bounded and reference models on the central window, per M = N"""
        pool = ReplicaPool(cfg.threads)
        replicas = cfg.agreement_replicas or cfg.replicas
        rows = []
        for index, model in enumerate(("asep", "sixvertex")):
            for bound in sizes or cfg.sizes:
                stream = RngStream(seed=cfg.seed, stream_id=AGREEMENT_STREAM).child(index, bound)
                result = _merge(pool.run(_agreement_chunk, stream, replicas, cfg, model, bound))
                frequency = result["disagreements"] / replicas
                rows.append(AgreementRow(
                    model=model,
                    M=bound,
                    N=bound,
                    replicas=replicas,
                    disagreement=frequency,
                    radius=statistics_service.binomial_radius(frequency, replicas),
                    separation=result["separations"] / replicas,
                    separated_disagreements=result["separated_disagreements"],
                ))
                logger.info(f"{model} M=N={bound}: disagreement {frequency:.4f}")
        return rows

    @staticmethod
    def run_bound_check(cfg: ExperimentConfig) -> ConvergenceReport:
        """Tail bound of tag -r at every ε, then bounded-model decay for both models"""
        pool = ReplicaPool(cfg.threads)
        tags = _query_tags(cfg)
        b = tags.index(-cfg.r)
        t = cfg.times[-1]
        report = ConvergenceReport(config=cfg.provenance())
        for e, epsilon in enumerate(cfg.epsilons):
            _, _, steps = _check_epsilon(cfg, epsilon)
            stream = RngStream(seed=cfg.seed, stream_id=OFFSET_STREAM).child(e)
            offset = _merge(pool.run(_offset_chunk, stream, cfg.replicas, cfg, epsilon))
            q = offset["positions"][:, b, -1]
            present = q != ABSENT
            report.tail_rows.extend(ConvergenceService.tail_bound_check(
                q[present] + steps[-1], t, cfg.R, cfg.r, steps[-1], L=cfg.L, origin=offset["origins"][present],
                epsilon=epsilon,
            ))
        violations = [row for row in report.tail_rows if row.violated]
        report.criteria.append(CriterionResult(
            name="tail_bound", passed=not violations,
            detail=f"{len(violations)} of {len(report.tail_rows)} rows exceed the bound beyond 3σ",
        ))

        report.agreement_rows.extend(ConvergenceService.bounded_agreement_check(cfg))
        report.criteria.extend(ConvergenceService._agreement_criteria(report.agreement_rows))
        return report

    @staticmethod
    def _agreement_criteria(rows: List[AgreementRow]) -> List[CriterionResult]:
        """
        The probability that no jump-free site separates the central window from the boundary
        must decay as M = N grows. It bounds the disagreement frequency, which is usually zero.
        For the ASEP a separated replica cannot disagree at all.
        """
        criteria = []
        for model in ("asep", "sixvertex"):
            series = [row for row in rows if row.model == model]
            if not series:
                continue
            unseparated = [row.no_separation for row in series]
            decays = _decays(unseparated, [row.replicas for row in series])
            criteria.append(CriterionResult(
                name=f"bounded_decay[{model}]",
                passed=decays,
                detail=("" if any(unseparated) else "not exercised: every replica separated; ") + ", ".join(
                    f"M=N={row.M}: unseparated {row.no_separation:.4f}, disagreement {row.disagreement:.4f}"
                    for row in series
                ),
            ))
            bounded = [row.disagreement <= row.no_separation + row.radius for row in series]
            criteria.append(CriterionResult(
                name=f"disagreement_within_unseparated[{model}]",
                passed=all(bounded),
                detail=f"{bounded.count(False)} of {len(series)} sizes exceed the unseparated frequency",
            ))
        asep = [row for row in rows if row.model == "asep"]
        if asep:
            leaks = sum(row.separated_disagreements for row in asep)
            criteria.append(CriterionResult(
                name="separated_replicas_agree[asep]",
                passed=leaks == 0,
                detail=f"{leaks} separated replicas disagree on the central window",
            ))
        return criteria

    @staticmethod
    def run_bad_event_census(cfg: ExperimentConfig) -> ConvergenceReport:
        """Frequencies of the four bad events against their bounds, and the coupling identity off them"""
        pool = ReplicaPool(cfg.threads)
        report = ConvergenceReport(config=cfg.provenance())
        M, N = cfg.M, cfg.N
        t_max = cfg.times[-1]
        names = ("initial_escape", "early_window_event", "long_jump", "simultaneous_pair")
        checks: List[Tuple[float, int, int]] = []
        for e, epsilon in enumerate(cfg.epsilons):
            _check_epsilon(cfg, epsilon)
            stream = RngStream(seed=cfg.seed, stream_id=BAD_EVENT_STREAM).child(e)
            result = _merge(pool.run(_bad_event_chunk, stream, cfg.replicas, cfg, epsilon))
            frequencies = result["flags"].mean(axis=0)
            bounds = (
                1.0,
                M * (M + N + 1) * (cfg.R + cfg.L) * epsilon,
                (M + N + 1) * cfg.R ** 2 * epsilon * t_max,
                (M + N + 1) ** 2 * (cfg.R + cfg.L) ** 2 * epsilon * t_max,
            )
            for name, frequency, bound in zip(names, frequencies, bounds):
                radius = statistics_service.binomial_radius(min(bound, 1.0), cfg.replicas)
                report.bad_event_rows.append(BadEventRow(
                    event=f"{name}@ε={epsilon}", frequency=float(frequency), bound=bound, radius=radius,
                    exceeded=float(frequency) > bound + radius,
                ))
            checks.append((epsilon, result["checked"], result["mismatches"]))
        checked = sum(count for _, count, _ in checks)
        mismatches = sum(wrong for _, _, wrong in checks)
        report.criteria.append(CriterionResult(
            name="coupling_identity",
            passed=checked > 0 and mismatches == 0,
            detail=("not exercised: no flag-free replica; " if checked == 0 else "") + ", ".join(
                f"ε={eps}: {wrong} mismatches on {count} flag-free replicas" for eps, count, wrong in checks
            ),
        ))
        exceeded = [row.event for row in report.bad_event_rows if row.exceeded]
        report.criteria.insert(0, CriterionResult(
            name="bad_event_bounds", passed=not exceeded, detail=", ".join(exceeded) or "all within bounds",
        ))
        return report

    @staticmethod
    def run_tilde_q_experiment(cfg: ExperimentConfig) -> ConvergenceReport:
        """Altered process at floor(t / ε) against the [-M, N]-bounded ASEP at t"""
        pool = ReplicaPool(cfg.threads)
        report = ConvergenceReport(config=cfg.provenance())
        largest = max(steps_for(cfg.times[-1], epsilon) for epsilon in cfg.epsilons)
        window = ConvergenceService.tilde_q_window(cfg.M, cfg.N, largest)

        # the altered process starts from the bounded ASEP's initial configuration
        initial = _phi(cfg.phi, window[1] - window[0] + 2, RngStream(seed=cfg.seed, stream_id=TILDE_Q_STREAM), 0)
        start = ConvergenceService.evolve_tilde_q(
            AlteredTimeGraph(window=(-cfg.M, cfg.N), horizon=largest, delta1=0.0, delta2=0.0),
            initial, cfg.M, cfg.N, largest, record_times=[0], window=window,
        )[0]
        matches = start.config == initial_data_service.asep_config_from_initial(initial, window)
        if not matches:
            raise InvariantViolationError("altered process and bounded ASEP start from different configurations")
        report.criteria.append(CriterionResult(name="tilde_q_initial_match", passed=matches, detail=f"window {window}"))

        bounded = _merge(pool.run(
            _bounded_asep_chunk, RngStream(seed=cfg.seed, stream_id=ASEP_STREAM).child(1), cfg.replicas, cfg, window
        ))
        series: Dict[Tuple[int, float], List[Tuple[float, float, float]]] = {}
        for e, epsilon in enumerate(cfg.epsilons):
            stream = RngStream(seed=cfg.seed, stream_id=TILDE_Q_STREAM).child(e)
            altered = _merge(pool.run(_tilde_q_chunk, stream, cfg.replicas, cfg, epsilon, window))
            for b, tag in enumerate(cfg.tags):
                for a, t in enumerate(cfg.times):
                    ks, radius, _ = _present_ks(altered["positions"][:, b, a], bounded["positions"][:, b, a], tag)
                    series.setdefault((tag, t), []).append((epsilon, ks, radius))
                    report.stat_rows.append(StatRow(
                        name="tilde_q_ks", key=f"epsilon={epsilon};tag={tag};t={t}", value=ks, radius=radius,
                    ))
        for (tag, t), values in series.items():
            monotone = all(
                later <= earlier + 2 * radius for (_, earlier, _), (_, later, radius) in zip(values, values[1:])
            )
            exercised = len(values) >= 2
            report.criteria.append(CriterionResult(
                name=f"tilde_q_ks_non_increasing[tag={tag},t={t}]", passed=exercised and monotone,
                detail=("" if exercised else "not exercised: needs at least two ε values; ") + ", ".join(
                    f"ε={eps}: {ks:.4f}" for eps, ks, _ in values
                ),
            ))
        return report

    @staticmethod
    def run_vertex_calibration(cfg: ExperimentConfig) -> ConvergenceReport:
        """Conditional exit frequencies at interior vertices against the six vertex weights"""
        delta1, delta2 = cfg.vertex_params()
        pool = ReplicaPool(cfg.threads)
        counts = _merge(pool.run(
            _calibration_chunk, RngStream(seed=cfg.seed, stream_id=ENSEMBLE_STREAM), cfg.replicas, cfg, delta1, delta2
        ))["counts"]
        expectations = (
            ("vertical_up", delta1, counts[0], counts[1]),
            ("vertical_right", 1.0 - delta1, counts[0], counts[0] - counts[1]),
            ("horizontal_straight", delta2, counts[2], counts[3]),
            ("horizontal_up", 1.0 - delta2, counts[2], counts[2] - counts[3]),
            ("both_exit", 1.0, counts[4], counts[5]),
            ("empty", 1.0, counts[6], counts[7]),
        )
        report = ConvergenceReport(config=cfg.provenance())
        within = True
        for key, expected, total, hits in expectations:
            if total == 0:
                continue
            frequency = float(hits / total)
            radius = statistics_service.binomial_radius(expected, int(total))
            within = within and abs(frequency - expected) <= radius
            report.stat_rows.append(StatRow(
                name="vertex_exit", key=f"{key};n={int(total)}", value=frequency, expected=expected, radius=radius,
            ))
        report.criteria.append(CriterionResult(
            name="vertex_calibration", passed=within, detail=f"δ1={delta1}, δ2={delta2}, n={cfg.n}",
        ))

        checked, wrong = ConvergenceService.current_identity_check(
            delta1, delta2, cfg.phi, cfg.x, cfg.r, cfg.steps, cfg.identity_replicas,
            RngStream(seed=cfg.seed, stream_id=IDENTITY_STREAM),
        )
        report.criteria.append(CriterionResult(
            name="height_current_identity", passed=wrong == 0, detail=f"{wrong} mismatches in {checked} ensembles",
        ))
        return report

    @staticmethod
    def run_asep_oracle(cfg: ExperimentConfig) -> ConvergenceReport:
        """Graphical vs naive ASEP, site activity probability and partition equality"""
        pool = ReplicaPool(cfg.threads)
        result = _merge(pool.run(_oracle_chunk, RngStream(seed=cfg.seed, stream_id=ORACLE_STREAM), cfg.replicas, cfg))
        report = ConvergenceReport(config=cfg.provenance())
        lo = -cfg.M

        weights = 1 << np.arange(result["graphical"].shape[1], dtype=np.int64)
        codes_graph = result["graphical"].astype(np.int64) @ weights
        codes_naive = result["naive"].astype(np.int64) @ weights
        ks = statistics_service.ks_distance(codes_graph, codes_naive)
        radius = statistics_service.ks_radius(cfg.replicas, cfg.replicas, settings.KS_ALPHA)
        tolerance = max(settings.ORACLE_KS_TOLERANCE, radius)
        report.stat_rows.append(StatRow(name="oracle_occupancy_ks", value=ks, radius=radius))
        for site, (g, v) in enumerate(zip(result["graphical"].mean(axis=0), result["naive"].mean(axis=0))):
            report.stat_rows.append(StatRow(
                name="site_density", key=f"site={lo + site}", value=float(g), expected=float(v),
                radius=statistics_service.difference_radius(float(g), cfg.replicas, float(v), cfg.replicas),
            ))
        report.criteria.append(CriterionResult(
            name="graphical_vs_naive", passed=ks <= tolerance, detail=f"KS = {ks:.4f} (tolerance {tolerance:.4f})",
        ))

        activity = float(result["active"].mean())
        expected = 1.0 - float(np.exp(-3.0 * cfg.t * (cfg.L + cfg.R)))
        activity_radius = statistics_service.binomial_radius(expected, cfg.replicas)
        report.stat_rows.append(StatRow(name="site_activity", value=activity, expected=expected, radius=activity_radius))
        report.criteria.append(CriterionResult(
            name="site_activity", passed=abs(activity - expected) <= activity_radius,
            detail=f"{activity:.4f} vs 1 - exp(-3T(L+R)) = {expected:.4f}",
        ))
        report.criteria.append(CriterionResult(
            name="partition_property", passed=result["mismatches"] == 0,
            detail=f"{result['mismatches']} mismatches on {result['checked']} graphs",
        ))
        return report

    @staticmethod
    def run_offset_equivalence(cfg: ExperimentConfig) -> ConvergenceReport:
        """Exact direct vs graph laws, then Monte Carlo of ensembles and both dynamics"""
        delta1, delta2 = cfg.vertex_params()
        stream = RngStream(seed=cfg.seed, stream_id=EQUIVALENCE_STREAM)
        phi = initial_data_service.realize(cfg.phi, max(cfg.n, cfg.steps) + 1, stream.child(2, 0))
        state = sixvertex_service.initial_offset_state(phi, cfg.n)
        report = ConvergenceReport(config=cfg.provenance())

        direct_law = sixvertex_service.offset_law_direct(state, delta1, delta2, phi, cfg.steps)
        graph_law = sixvertex_service.offset_law_graph(state, delta1, delta2, phi, cfg.steps)
        difference = statistics_service.max_law_difference(direct_law, graph_law)
        report.stat_rows.append(StatRow(name="exact_law_outcomes", value=len(direct_law)))
        report.stat_rows.append(StatRow(name="exact_law_max_difference", value=difference))
        report.criteria.append(CriterionResult(
            name="exact_direct_vs_graph", passed=difference <= settings.EXACT_TOLERANCE,
            detail=f"max |difference| = {difference:.3e} over {len(direct_law)} trajectories",
        ))

        pool = ReplicaPool(cfg.threads)
        result = _merge(pool.run(_equivalence_chunk, stream, cfg.replicas, cfg, phi, delta1, delta2))
        radius = statistics_service.ks_radius(cfg.replicas, cfg.replicas, settings.KS_ALPHA)
        tolerance = max(settings.ORACLE_KS_TOLERANCE, radius)
        worst = 0.0
        for b, tag in enumerate(cfg.tags):
            for other in ("ensemble", "graph"):
                ks = statistics_service.ks_distance(result[other][:, b], result["direct"][:, b])
                worst = max(worst, ks)
                report.stat_rows.append(StatRow(name=f"{other}_vs_direct_ks", key=f"tag={tag}", value=ks, radius=radius))
        report.criteria.append(CriterionResult(
            name="three_way_monte_carlo", passed=worst <= tolerance, detail=f"max KS = {worst:.4f} (tolerance {tolerance:.4f})",
        ))
        return report


convergence_service = ConvergenceService()
