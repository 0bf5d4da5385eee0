"""
Stochastic six-vertex model: path ensembles on the triangle, the offset particle
dynamics and their resampling by a discrete time graph.
"""
from bisect import bisect_right
from itertools import product
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from app.core.config import settings
from app.core.errors import InvalidArgumentError, InvariantViolationError
from app.core.rng import RandomSource, as_generator, geometric_offset
from app.models.graph_models import DiscreteTimeGraph
from app.models.lattice_models import InitialData, ParticleConfig
from app.models.trajectory_models import OffsetState, PathEnsemble, VertexArrows
from app.services.initial_data_service import initial_data_service
import logging

logger = logging.getLogger(__name__)

Trajectory = Tuple[Tuple[int, ...], ...]
Instructions = Dict[Tuple[int, int], Tuple[Optional[int], Optional[int]]]


class SweepArrays(NamedTuple):
    """Arrow bits of a batch of ensembles, indexed [replica, x, y]; entries with x + y > n are zero"""
    in_left: np.ndarray
    in_bottom: np.ndarray
    out_right: np.ndarray
    out_top: np.ndarray


def _check_deltas(delta1: float, delta2: float) -> None:
    for name, value in (("δ1", delta1), ("δ2", delta2)):
        if not 0.0 <= value < 1.0:
            raise InvalidArgumentError(f"{name} must lie in [0,1)")


def _first_blocker(prev: Sequence[int], i: int, j: int) -> int:
    """Minimal m in [i, j] with m + 1 in ``prev`` (sorted), else j"""
    k = bisect_right(prev, i)
    if k < len(prev) and prev[k] <= j + 1:
        return prev[k] - 1
    return j


def _capped_jump(u: float, delta2: float, cap: Optional[int]) -> int:
    jump = geometric_offset(u, delta2)
    return jump if cap is None else min(jump, cap)


def _direct_step(
        prev: Sequence[int],
        t: int,
        entering: bool,
        delta1: float,
        delta2: float,
        uniforms: Sequence[float]
) -> List[int]:
    """One step of the offset dynamics, particles updated left to right"""
    new: List[int] = []
    draws = iter(uniforms)
    if entering:
        site = 1 - t
        if prev and prev[0] <= site:
            raise InvariantViolationError(f"blue particle entering at {site} meets a particle at {prev[0]}")
        cap = prev[0] - site - 1 if prev else None
        new.append(site + _capped_jump(next(draws), delta2, cap))
    last = len(prev) - 1
    for k, q in enumerate(prev):
        cap = prev[k + 1] - q - 1 if k < last else None
        u_left, u_right = next(draws), next(draws)
        if new and new[-1] == q - 1:
            new.append(q + _capped_jump(u_right, delta2, cap))
        elif u_left < delta1:
            new.append(q - 1)
        else:
            new.append(q + _capped_jump(u_right, delta2, cap))
    return new


def _graph_step(prev: Sequence[int], t: int, entering: bool, table: Instructions) -> List[int]:
    """One step of the graph-driven offset dynamics; right jumps are resolved against time t-1"""
    new: List[int] = []
    if entering:
        site = 1 - t
        if prev and prev[0] <= site:
            raise InvariantViolationError(f"blue particle entering at {site} meets a particle at {prev[0]}")
        _, right = table.get((t, site), (None, None))
        new.append(_first_blocker(prev, site, right) if right is not None else site)
    for q in prev:
        left, right = table.get((t, q), (None, None))
        if left is not None and not (new and new[-1] == q - 1):
            new.append(q - 1)
        elif right is not None:
            new.append(_first_blocker(prev, q, right))
        else:
            new.append(q)
    return new


def _next_state(state: OffsetState, positions: List[int], entering: bool) -> OffsetState:
    t = state.time + 1
    blue_count = state.blue_count + int(entering)
    lo, hi = state.config.window
    window = (min(lo, 1 - t), max(hi, positions[-1] if positions else hi))
    config = ParticleConfig.from_sorted_sites(positions, -blue_count, window)
    return OffsetState(config=config, time=t, blue_count=blue_count)


def _right_law(delta2: float, cap: int) -> List[Tuple[int, float]]:
    """Law of min(J, cap) for P[J >= j] = delta2^j"""
    law = [(j, (1.0 - delta2) * delta2 ** j) for j in range(cap)]
    law.append((cap, delta2 ** cap))
    return [(j, p) for j, p in law if p > 0.0]


def _expand(
        start: OffsetState,
        phi: InitialData,
        steps: int,
        transition
) -> Dict[Trajectory, float]:
    """Trajectory law from a per-step transition law (prev positions, t, entering) -> {new positions: prob}"""
    law: Dict[Trajectory, float] = {(): 1.0}
    cache: Dict[Tuple[Tuple[int, ...], int], Dict[Tuple[int, ...], float]] = {}
    for t in range(start.time + 1, start.time + steps + 1):
        entering = phi.y_bit(t) == 1
        grown: Dict[Trajectory, float] = {}
        for path, p in law.items():
            prev = path[-1] if path else start.config.positions
            key = (prev, t)
            if key not in cache:
                cache[key] = transition(prev, t, entering)
            for nxt, q in cache[key].items():
                grown[path + (nxt,)] = grown.get(path + (nxt,), 0.0) + p * q
        law = grown
    return law


class SixVertexService:
    @staticmethod
    def sample_ensemble_arrays(
            delta1: float,
            delta2: float,
            x_bits: np.ndarray,
            y_bits: np.ndarray,
            n: int,
            rng: RandomSource
    ) -> SweepArrays:
        """
        Sample a batch of ensembles on the triangle x, y >= 1, x + y <= n, one diagonal at a time.

        ``x_bits`` and ``y_bits`` have shape (batch, n + 1) with column k holding index k.
        Each vertex consumes one uniform.
        """
        _check_deltas(delta1, delta2)
        if n < 1:
            raise InvalidArgumentError(f"n must be positive, got {n}")
        gen = as_generator(rng)
        batch = x_bits.shape[0]
        shape = (batch, n + 1, n + 1)
        in_left = np.zeros(shape, dtype=np.int8)
        in_bottom = np.zeros(shape, dtype=np.int8)
        out_right = np.zeros(shape, dtype=np.int8)
        out_top = np.zeros(shape, dtype=np.int8)

        # incoming edge of the next vertex in each row / column
        row_edge = np.asarray(y_bits, dtype=bool).copy()
        col_edge = np.asarray(x_bits, dtype=bool).copy()
        for d in range(2, n + 1):
            xs = np.arange(1, d)
            ys = d - xs
            a = row_edge[:, ys]
            b = col_edge[:, xs]
            u = gen.random((batch, d - 1))
            top = (a & b) | (b & ~a & (u < delta1)) | (a & ~b & (u >= delta2))
            right = (a & b) | ((a ^ b) & ~top)
            in_left[:, xs, ys] = a
            in_bottom[:, xs, ys] = b
            out_right[:, xs, ys] = right
            out_top[:, xs, ys] = top
            row_edge[:, ys] = right
            col_edge[:, xs] = top
        return SweepArrays(in_left, in_bottom, out_right, out_top)

    @staticmethod
    def boundary_bits(phi: InitialData, n: int) -> Tuple[np.ndarray, np.ndarray]:
        x_bits = np.zeros((1, n + 1), dtype=np.int8)
        y_bits = np.zeros((1, n + 1), dtype=np.int8)
        for k in range(1, n + 1):
            x_bits[0, k], y_bits[0, k] = phi.pair(k)
        return x_bits, y_bits

    @staticmethod
    def sample_path_ensemble(
            delta1: float,
            delta2: float,
            phi: InitialData,
            n: int,
            rng: RandomSource
    ) -> PathEnsemble:
        """Path ensemble on the triangle of size n with boundary data phi"""
        _check_deltas(delta1, delta2)
        x_bits, y_bits = SixVertexService.boundary_bits(phi, n)
        sweep = SixVertexService.sample_ensemble_arrays(delta1, delta2, x_bits, y_bits, n, rng)
        arrows = {
            (x, y): VertexArrows(
                int(sweep.in_left[0, x, y]),
                int(sweep.in_bottom[0, x, y]),
                int(sweep.out_right[0, x, y]),
                int(sweep.out_top[0, x, y]),
            )
            for x in range(1, n) for y in range(1, n - x + 1)
        }
        return PathEnsemble(n=n, arrows=arrows, boundary=phi)

    @staticmethod
    def extract_particles(e: PathEnsemble, t: int) -> ParticleConfig:
        """
        Particles at time t: sites p in [1, n - t] where a path leaves (p, t) upward
        (for t = 0 the x-axis entries). The leftmost N(t) particles are blue.
        """
        if not 0 <= t <= e.n - 1:
            raise InvalidArgumentError(f"time {t} outside [0, {e.n - 1}]")
        hi = e.n - t
        if t == 0:
            sites = [p for p in range(1, hi + 1) if e.boundary.x_bit(p) == 1]
        else:
            sites = [p for p in range(1, hi + 1) if e.arrows[(p, t)].out_top == 1]
        return ParticleConfig.from_sorted_sites(sites, -e.boundary.blue_count(t), (1, hi))

    @staticmethod
    def height_function(e: PathEnsemble, X: int, Y: int) -> int:
        """Blue paths crossing row Y right of column X minus red paths crossing at or left of X"""
        if not 1 <= Y <= e.n - 1:
            raise InvalidArgumentError(f"row {Y} outside [1, {e.n - 1}]")
        if X < 0:
            raise InvalidArgumentError(f"column {X} is negative")
        config = SixVertexService.extract_particles(e, Y)
        height = 0
        for site, tag in zip(config.positions, config.tags):
            if tag < 0 and site > X:
                height += 1
            elif tag >= 0 and site <= X:
                height -= 1
        return height

    @staticmethod
    def offset_positions(e: PathEnsemble, t: int) -> ParticleConfig:
        """Particles at time t in offset coordinates q = p - t"""
        return SixVertexService.extract_particles(e, t).shifted(-t)

    @staticmethod
    def batch_tag_positions(
            sweep: SweepArrays,
            x_bits: np.ndarray,
            y_bits: np.ndarray,
            t: int,
            tag: int
    ) -> Tuple[np.ndarray, np.ndarray]:
        """
        Un-offset positions p_tag(t) across a batch, with a mask of the replicas where the
        tag is present inside the visible window [1, n - t].
        """
        n = sweep.out_top.shape[1] - 1
        if not 0 <= t <= n - 1:
            raise InvalidArgumentError(f"time {t} outside [0, {n - 1}]")
        occupied = x_bits[:, 1:n - t + 1] if t == 0 else sweep.out_top[:, 1:n - t + 1, t]
        counts = np.cumsum(occupied, axis=1)
        index = y_bits[:, 1:t + 1].sum(axis=1) + tag
        present = (index >= 0) & (counts[:, -1] > index)
        positions = np.argmax(counts > index[:, None], axis=1) + 1
        return np.where(present, positions, 0), present

    @staticmethod
    def try_jump(occupancy_prev: ParticleConfig, i: int, j: int) -> int:
        """Landing site of an attempted jump i -> j against the previous occupation"""
        if j <= i:
            raise InvalidArgumentError(f"try_jump needs j > i, got i={i}, j={j}")
        return _first_blocker(occupancy_prev.positions, i, j)

    @staticmethod
    def initial_offset_state(phi: InitialData, hi: int) -> OffsetState:
        return OffsetState(config=initial_data_service.offset_config_from_initial(phi, hi), time=0, blue_count=0)

    @staticmethod
    def evolve_offset_direct(
            state: OffsetState,
            delta1: float,
            delta2: float,
            phi: InitialData,
            steps: int,
            rng: RandomSource,
            record_times: Optional[Iterable[int]] = None
    ) -> List[OffsetState]:
        """
        Offset dynamics with sampled jumps. Returns the states at ``record_times``
        (every time from ``state.time`` on when omitted).
        """
        _check_deltas(delta1, delta2)
        if steps < 0:
            raise InvalidArgumentError(f"steps must be non-negative, got {steps}")
        gen = as_generator(rng)
        wanted = None if record_times is None else set(record_times)
        trajectory = [state] if wanted is None or state.time in wanted else []
        for _ in range(steps):
            t = state.time + 1
            entering = phi.y_bit(t) == 1
            prev = state.config.positions
            uniforms = gen.random(2 * len(prev) + 1).tolist()
            state = _next_state(state, _direct_step(prev, t, entering, delta1, delta2, uniforms), entering)
            if wanted is None or t in wanted:
                trajectory.append(state)
        return trajectory

    @staticmethod
    def evolve_offset_graph(
            state: OffsetState,
            D: DiscreteTimeGraph,
            phi: InitialData,
            steps: int,
            record_times: Optional[Iterable[int]] = None
    ) -> List[OffsetState]:
        """Offset dynamics read off the instructions of a discrete time graph"""
        if D.horizon < state.time + steps:
            raise InvalidArgumentError(f"graph horizon {D.horizon} shorter than time {state.time + steps}")
        table = D.instructions()
        wanted = None if record_times is None else set(record_times)
        trajectory = [state] if wanted is None or state.time in wanted else []
        for _ in range(steps):
            t = state.time + 1
            entering = phi.y_bit(t) == 1
            state = _next_state(state, _graph_step(state.config.positions, t, entering, table), entering)
            if wanted is None or t in wanted:
                trajectory.append(state)
        return trajectory

    @staticmethod
    def offset_law_direct(
            state: OffsetState,
            delta1: float,
            delta2: float,
            phi: InitialData,
            steps: int,
            jump_cap: Optional[int] = None
    ) -> Dict[Trajectory, float]:
        """
        Exact law of the positions at times 1..steps under the sampled dynamics.
        Right jumps are capped at ``jump_cap`` with the tail mass placed on the cap.
        """
        _check_deltas(delta1, delta2)
        cap = jump_cap or settings.JUMP_CAP

        def transition(prev: Tuple[int, ...], t: int, entering: bool) -> Dict[Tuple[int, ...], float]:
            partial: Dict[Tuple[int, ...], float] = {}
            if entering:
                site = 1 - t
                limit = min(cap, prev[0] - site - 1) if prev else cap
                for j, p in _right_law(delta2, limit):
                    partial[(site + j,)] = p
            else:
                partial[()] = 1.0
            for k, q in enumerate(prev):
                limit = min(cap, prev[k + 1] - q - 1) if k + 1 < len(prev) else cap
                right = _right_law(delta2, limit)
                grown: Dict[Tuple[int, ...], float] = {}
                for done, p in partial.items():
                    if done and done[-1] == q - 1:
                        options = [(q + j, pj) for j, pj in right]
                    else:
                        options = [(q - 1, delta1)] + [(q + j, (1.0 - delta1) * pj) for j, pj in right]
                    for site, pj in options:
                        if pj > 0.0:
                            grown[done + (site,)] = grown.get(done + (site,), 0.0) + p * pj
                partial = grown
            return partial

        return _expand(state, phi, steps, transition)

    @staticmethod
    def offset_law_graph(
            state: OffsetState,
            delta1: float,
            delta2: float,
            phi: InitialData,
            steps: int,
            jump_cap: Optional[int] = None
    ) -> Dict[Trajectory, float]:
        """
        Exact law of the graph-driven dynamics, summing over every outcome of the time
        graph at the occupied sites (and the entry site). Offsets of ``jump_cap`` or more
        are merged into one outcome.
        """
        _check_deltas(delta1, delta2)
        cap = jump_cap or settings.JUMP_CAP
        right_outcomes = [(0, 1.0 - delta2)] + [(k, p) for k, p in _right_law(delta2, cap) if k > 0]
        left_outcomes = [(True, delta1), (False, 1.0 - delta1)]
        left_outcomes = [(flag, p) for flag, p in left_outcomes if p > 0.0]
        right_outcomes = [(k, p) for k, p in right_outcomes if p > 0.0]

        def transition(prev: Tuple[int, ...], t: int, entering: bool) -> Dict[Tuple[int, ...], float]:
            sites = ([1 - t] if entering else []) + list(prev)
            per_site = []
            for index, site in enumerate(sites):
                lefts = [(False, 1.0)] if entering and index == 0 else left_outcomes
                per_site.append([(site, left, k, pl * pr) for left, pl in lefts for k, pr in right_outcomes])
            law: Dict[Tuple[int, ...], float] = {}
            for combo in product(*per_site):
                table: Instructions = {}
                p = 1.0
                for site, left, k, weight in combo:
                    table[(t, site)] = (site - 1 if left else None, site + k if k > 0 else None)
                    p *= weight
                nxt = tuple(_graph_step(prev, t, entering, table))
                law[nxt] = law.get(nxt, 0.0) + p
            return law

        return _expand(state, phi, steps, transition)


sixvertex_service = SixVertexService()
