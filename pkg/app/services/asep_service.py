"""
ASEP evolution: Harris graphical construction, its partitioned form and a per-particle clock oracle.
"""
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from app.core.errors import InvalidArgumentError
from app.core.rng import RandomSource, as_generator
from app.models.graph_models import ContinuousTimeGraph, TimeEvent
from app.models.lattice_models import ParticleConfig, Window
from app.models.trajectory_models import AsepTrajectory
from app.services.timegraph_service import timegraph_service
import logging

logger = logging.getLogger(__name__)


def _query_schedule(query_times: Optional[Iterable[float]], T: float) -> List[float]:
    times = sorted(set(float(t) for t in (query_times if query_times is not None else (T,))))
    for t in times:
        if t < 0 or t > T:
            raise InvalidArgumentError(f"query time {t} outside [0, {T}]")
    return times


def _run_events(
        site_tags: Dict[int, int],
        events: Sequence[TimeEvent],
        window: Window,
        T: float,
        query_times: List[float]
) -> Dict[float, Dict[int, int]]:
    """
    Apply events with t <= T in order to ``site_tags`` (mutated in place).

    A jump is performed iff the source is occupied and the destination is an empty
    site of the window. Returns a copy of the occupation at every query time.
    """
    lo, hi = window
    snapshots: Dict[float, Dict[int, int]] = {}
    pending = list(query_times)
    for event in events:
        if event.t > T:
            break
        while pending and pending[0] < event.t:
            snapshots[pending.pop(0)] = dict(site_tags)
        if event.i in site_tags and lo <= event.j <= hi and event.j not in site_tags:
            site_tags[event.j] = site_tags.pop(event.i)
    for t in pending:
        snapshots[t] = dict(site_tags)
    return snapshots


class AsepService:
    @staticmethod
    def evolve_asep(
            config: ParticleConfig,
            graph: ContinuousTimeGraph,
            T: float,
            query_times: Optional[Iterable[float]] = None
    ) -> AsepTrajectory:
        """Drive the tagged configuration by the graph's jump instructions up to time T"""
        if T > graph.horizon:
            raise InvalidArgumentError(f"T = {T} exceeds graph horizon {graph.horizon}")
        lo, hi = config.window
        g_lo, g_hi = graph.window
        if not (g_lo <= lo and hi <= g_hi):
            raise InvalidArgumentError(f"config window [{lo}, {hi}] not inside graph window [{g_lo}, {g_hi}]")
        times = _query_schedule(query_times, T)

        raw = _run_events(config.site_tags(), graph.events, config.window, T, times)
        snapshots = {t: ParticleConfig.from_tagged_sites(sites, config.window) for t, sites in raw.items()}
        return AsepTrajectory(initial=config, snapshots=snapshots, horizon=T)

    @staticmethod
    def evolve_asep_partitioned(
            config: ParticleConfig,
            graph: ContinuousTimeGraph,
            T: float,
            query_times: Optional[Iterable[float]] = None
    ) -> AsepTrajectory:
        """
        Four-step construction: cut the window at inactive sites, evolve every piece
        with its own events and concatenate. Agrees with :meth:`evolve_asep` path by path.
        """
        if T > graph.horizon:
            raise InvalidArgumentError(f"T = {T} exceeds graph horizon {graph.horizon}")
        lo, hi = config.window
        times = _query_schedule(query_times, T)
        cuts = [n for n in timegraph_service.find_inactive_sites(graph, T) if lo < n <= hi]
        bounds = [lo] + cuts + [hi + 1]
        intervals: List[Tuple[int, int]] = [(bounds[k], bounds[k + 1] - 1) for k in range(len(bounds) - 1)]
        logger.debug(f"Partitioned [{lo}, {hi}] into {len(intervals)} intervals")

        merged: Dict[float, Dict[int, int]] = {t: {} for t in times}
        for a, b in intervals:
            piece = {site: tag for site, tag in config.site_tags().items() if a <= site <= b}
            events = [event for event in graph.events if a <= event.i <= b]
            for t, sites in _run_events(piece, events, (a, b), T, times).items():
                merged[t].update(sites)
        snapshots = {t: ParticleConfig.from_tagged_sites(sites, config.window) for t, sites in merged.items()}
        return AsepTrajectory(initial=config, snapshots=snapshots, horizon=T)

    @staticmethod
    def evolve_asep_naive(
            config: ParticleConfig,
            rate_left: float,
            rate_right: float,
            T: float,
            rng: RandomSource,
            query_times: Optional[Iterable[float]] = None
    ) -> AsepTrajectory:
        """
        Per-particle clocks: each particle rings at total rate L + R, picks right with
        probability R / (L + R) and jumps if the neighbor site is empty and inside the window.
        """
        if rate_left < 0 or rate_right < 0:
            raise InvalidArgumentError(f"rates must be non-negative, got L={rate_left}, R={rate_right}")
        if T <= 0:
            raise InvalidArgumentError(f"T must be positive, got {T}")
        times = _query_schedule(query_times, T)
        lo, hi = config.window
        gen = as_generator(rng)

        positions = list(config.positions)
        occupied = set(positions)
        count = len(positions)
        total_rate = count * (rate_left + rate_right)
        snapshots: Dict[float, Dict[int, int]] = {}
        pending = list(times)

        clock = 0.0
        if total_rate > 0:
            p_right = rate_right / (rate_left + rate_right)
            batch = max(16, int(total_rate * T * 1.2) + 16)
            done = False
            while not done:
                gaps = gen.exponential(1.0 / total_rate, size=batch)
                picks = gen.integers(0, count, size=batch)
                directions = gen.random(batch) < p_right
                for gap, k, right in zip(gaps, picks, directions):
                    clock += gap
                    if clock > T:
                        done = True
                        break
                    while pending and pending[0] < clock:
                        snapshots[pending.pop(0)] = dict(zip(positions, config.tags))
                    source = positions[k]
                    target = source + 1 if right else source - 1
                    if lo <= target <= hi and target not in occupied:
                        occupied.remove(source)
                        occupied.add(target)
                        positions[k] = target
        for t in pending:
            snapshots[t] = dict(zip(positions, config.tags))
        return AsepTrajectory(
            initial=config,
            snapshots={t: ParticleConfig.from_tagged_sites(sites, config.window) for t, sites in snapshots.items()},
            horizon=T,
        )

    @staticmethod
    def asep_current(traj: AsepTrajectory, x: int, t: float) -> int:
        """J_t(x): blue particles (start <= 0) right of x minus red particles (start > 0) at or left of x"""
        now = traj.at(t)
        current = 0
        for start, tag in zip(traj.initial.positions, traj.initial.tags):
            position = now.position_of(tag)
            if start <= 0 and position > x:
                current += 1
            elif start > 0 and position <= x:
                current -= 1
        return current

    @staticmethod
    def tagged_position(traj: AsepTrajectory, tag: int, t: float) -> int:
        return traj.at(t).position_of(tag)

    @staticmethod
    def occupancy_vector(traj: AsepTrajectory, t: float) -> np.ndarray:
        lo, hi = traj.initial.window
        return np.asarray(traj.at(t).occupancy(lo, hi), dtype=np.int8)


asep_service = AsepService()
