from typing import Dict, List, NamedTuple, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.models.lattice_models import Window


class TimeEvent(NamedTuple):
    """Jump instruction (t; i, j): at time t the particle at i tries to jump to j"""
    t: Union[int, float]
    i: int
    j: int


class ContinuousTimeGraph(BaseModel):
    """Harris time graph of the ASEP: Poisson left/right clocks per site"""
    model_config = ConfigDict(frozen=True)

    events: Tuple[TimeEvent, ...] = ()
    window: Window
    horizon: float = Field(gt=0)
    rate_left: float = Field(ge=0)
    rate_right: float = Field(gt=0)

    @model_validator(mode="after")
    def _check_events(self) -> "ContinuousTimeGraph":
        lo, hi = self.window
        previous = None
        for event in self.events:
            if abs(event.i - event.j) != 1:
                raise ValueError(f"continuous events are nearest-neighbor, got {event}")
            if not 0 < event.t <= self.horizon:
                raise ValueError(f"event time {event.t} outside (0, {self.horizon}]")
            if not lo <= event.i <= hi:
                raise ValueError(f"event source {event.i} outside window [{lo}, {hi}]")
            # ties have probability zero; a finite-precision tie is ordered by (i, j)
            if previous is not None and (event.t, event.i, event.j) <= (previous.t, previous.i, previous.j):
                raise ValueError("events must be strictly ordered by (t, i, j)")
            previous = event
        return self

    def sources(self, horizon: Optional[float] = None) -> set:
        limit = self.horizon if horizon is None else horizon
        return {event.i for event in self.events if event.t <= limit}


class DiscreteTimeGraph(BaseModel):
    """Discrete time graph of the offset six-vertex model"""
    model_config = ConfigDict(frozen=True)

    events: Tuple[TimeEvent, ...] = ()
    window: Window
    horizon: int = Field(ge=1)
    delta1: float = Field(ge=0, lt=1)
    delta2: float = Field(ge=0, lt=1)

    @model_validator(mode="after")
    def _check_events(self) -> "DiscreteTimeGraph":
        lo, hi = self.window
        seen_left = set()
        seen_right = set()
        previous = None
        for event in self.events:
            if not 1 <= event.t <= self.horizon:
                raise ValueError(f"event time {event.t} outside [1, {self.horizon}]")
            if not lo <= event.i <= hi:
                raise ValueError(f"event source {event.i} outside window [{lo}, {hi}]")
            key = (event.t, event.i)
            if event.j == event.i - 1:
                if key in seen_left:
                    raise ValueError(f"two left events at {key}")
                seen_left.add(key)
            elif event.j >= event.i + 1:
                if key in seen_right:
                    raise ValueError(f"two right events at {key}")
                seen_right.add(key)
            else:
                raise ValueError(f"invalid destination in {event}")
            if previous is not None and (event.t, event.i, event.j) <= (previous.t, previous.i, previous.j):
                raise ValueError("events must be sorted by (t, i)")
            previous = event
        return self

    def instructions(self) -> Dict[Tuple[int, int], Tuple[Optional[int], Optional[int]]]:
        """(t, i) -> (left destination or None, right destination or None)"""
        table: Dict[Tuple[int, int], List[Optional[int]]] = {}
        for event in self.events:
            slot = table.setdefault((event.t, event.i), [None, None])
            if event.j < event.i:
                slot[0] = event.j
            else:
                slot[1] = event.j
        return {key: (left, right) for key, (left, right) in table.items()}


class AlteredTimeGraph(DiscreteTimeGraph):
    """Discrete time graph whose right events are all nearest-neighbor"""

    @model_validator(mode="after")
    def _check_nearest_neighbor(self) -> "AlteredTimeGraph":
        for event in self.events:
            if abs(event.i - event.j) != 1:
                raise ValueError(f"altered graph events are nearest-neighbor, got {event}")
        return self
