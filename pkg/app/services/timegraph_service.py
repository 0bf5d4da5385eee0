"""
Time graphs: jump instructions (t; i, j) driving the ASEP and the offset six-vertex model.
"""
from typing import List, TypeVar, Union

import numpy as np

from app.core.errors import InvalidArgumentError
from app.core.rng import RandomSource, as_generator, geometric_offsets
from app.models.graph_models import AlteredTimeGraph, ContinuousTimeGraph, DiscreteTimeGraph, TimeEvent
from app.models.lattice_models import Window, check_window
import logging

logger = logging.getLogger(__name__)

AnyGraph = TypeVar("AnyGraph", ContinuousTimeGraph, DiscreteTimeGraph, AlteredTimeGraph)


def _poisson_times(gen: np.random.Generator, rate: float, horizon: float) -> List[float]:
    """Arrival times of a rate-`rate` Poisson process on (0, horizon] from exponential gaps"""
    if rate <= 0.0:
        return []
    times: List[float] = []
    clock = 0.0
    batch = max(4, int(rate * horizon * 2) + 4)
    while True:
        for gap in gen.exponential(1.0 / rate, size=batch):
            clock += gap
            if clock > horizon:
                return times
            times.append(clock)


class TimeGraphService:
    @staticmethod
    def sample_continuous_graph(
            rate_left: float,
            rate_right: float,
            window: Window,
            horizon: float,
            rng: RandomSource
    ) -> ContinuousTimeGraph:
        """Independent rate-L left and rate-R right exponential clocks at every site of the window"""
        if horizon <= 0:
            raise InvalidArgumentError(f"horizon must be positive, got {horizon}")
        if rate_right <= 0:
            raise InvalidArgumentError(f"R must be positive, got {rate_right}")
        if rate_left < 0:
            raise InvalidArgumentError(f"L must be non-negative, got {rate_left}")
        lo, hi = check_window(window)
        gen = as_generator(rng)

        events: List[TimeEvent] = []
        for i in range(lo, hi + 1):
            events.extend(TimeEvent(t, i, i + 1) for t in _poisson_times(gen, rate_right, horizon))
            events.extend(TimeEvent(t, i, i - 1) for t in _poisson_times(gen, rate_left, horizon))
        events.sort()
        return ContinuousTimeGraph(
            events=tuple(events),
            window=(lo, hi),
            horizon=horizon,
            rate_left=rate_left,
            rate_right=rate_right,
        )

    @staticmethod
    def sample_discrete_graph(
            delta1: float,
            delta2: float,
            window: Window,
            horizon: int,
            rng: RandomSource
    ) -> DiscreteTimeGraph:
        """
        For every site i and time t: a left event (t; i, i-1) with probability delta1 and,
        independently, a right event (t; i, i+k) with probability (1 - delta2) delta2^k, k >= 1.

        One uniform per (t, i) decides the right event by inverse CDF.
        """
        for name, value in (("delta1", delta1), ("delta2", delta2)):
            if not 0.0 <= value < 1.0:
                raise InvalidArgumentError(f"{name} must lie in [0,1), got {value}")
        if horizon < 1:
            raise InvalidArgumentError(f"horizon must be at least 1, got {horizon}")
        lo, hi = check_window(window)
        gen = as_generator(rng)

        shape = (horizon, hi - lo + 1)
        left = gen.random(shape) < delta1
        offsets = geometric_offsets(gen.random(shape), delta2)

        events: List[TimeEvent] = []
        for row, col in zip(*np.nonzero(left)):
            i = lo + int(col)
            events.append(TimeEvent(int(row) + 1, i, i - 1))
        for row, col in zip(*np.nonzero(offsets)):
            i = lo + int(col)
            events.append(TimeEvent(int(row) + 1, i, i + int(offsets[row, col])))
        events.sort()
        return DiscreteTimeGraph(
            events=tuple(events),
            window=(lo, hi),
            horizon=horizon,
            delta1=delta1,
            delta2=delta2,
        )

    @staticmethod
    def restrict_graph(graph: AnyGraph, M: int, N: int) -> AnyGraph:
        """[-M, N]-bounded graph: drop every event whose source lies outside [-M, N]"""
        lo, hi = graph.window
        if not (lo <= -M and N <= hi):
            raise InvalidArgumentError(f"graph window [{lo}, {hi}] does not contain [{-M}, {N}]")
        kept = tuple(event for event in graph.events if -M <= event.i <= N)
        return graph.model_copy(update={"events": kept})

    @staticmethod
    def alter_graph(graph: DiscreteTimeGraph) -> AlteredTimeGraph:
        """Replace every long right jump (t; i, j), j > i + 1, by (t; i, i + 1)"""
        events = tuple(
            TimeEvent(event.t, event.i, event.i + 1) if event.j > event.i + 1 else event
            for event in graph.events
        )
        return AlteredTimeGraph(
            events=events,
            window=graph.window,
            horizon=graph.horizon,
            delta1=graph.delta1,
            delta2=graph.delta2,
        )

    @staticmethod
    def rescale_graph(graph: DiscreteTimeGraph, epsilon: float) -> List[TimeEvent]:
        """Rescaled time graph: (t'; i, j) -> (epsilon t'; i, j)"""
        if epsilon <= 0:
            raise InvalidArgumentError(f"epsilon must be positive, got {epsilon}")
        return [TimeEvent(epsilon * event.t, event.i, event.j) for event in graph.events]

    @staticmethod
    def find_inactive_sites(graph: ContinuousTimeGraph, horizon: float) -> List[int]:
        """
        Interior sites i whose clocks and both neighbors' clocks stay silent on [0, horizon].
        The two boundary sites of the window are never reported.
        """
        if horizon > graph.horizon:
            raise InvalidArgumentError(f"horizon {horizon} exceeds graph horizon {graph.horizon}")
        lo, hi = graph.window
        active_sources = graph.sources(horizon)
        return [
            i for i in range(lo + 1, hi)
            if not ({i - 1, i, i + 1} & active_sources)
        ]

    @staticmethod
    def find_jump_free_sites(
            graph: Union[ContinuousTimeGraph, DiscreteTimeGraph],
            horizon: Union[float, int]
    ) -> List[int]:
        """Sites m of the window that no jump with time <= horizon passes through (min(i, j) <= m <= max(i, j))"""
        lo, hi = graph.window
        blocked = np.zeros(hi - lo + 3, dtype=bool)
        for event in graph.events:
            if event.t > horizon:
                break
            a = max(min(event.i, event.j), lo - 1)
            b = min(max(event.i, event.j), hi + 1)
            blocked[a - lo + 1:b - lo + 2] = True
        return [m for m in range(lo, hi + 1) if not blocked[m - lo + 1]]


timegraph_service = TimeGraphService()
