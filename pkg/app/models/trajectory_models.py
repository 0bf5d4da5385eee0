from typing import Dict, List, NamedTuple, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.core.errors import InvalidArgumentError
from app.models.lattice_models import InitialData, ParticleConfig


class AsepTrajectory(BaseModel):
    """ASEP tagged configurations at time 0 and at each query time"""
    model_config = ConfigDict(frozen=True)

    initial: ParticleConfig
    snapshots: Dict[float, ParticleConfig]
    horizon: float = Field(gt=0)

    @model_validator(mode="after")
    def _check_conservation(self) -> "AsepTrajectory":
        for time, snapshot in self.snapshots.items():
            if snapshot.tags != self.initial.tags:
                raise ValueError(f"particles created or lost by time {time}")
            if time > self.horizon:
                raise ValueError(f"snapshot time {time} beyond horizon {self.horizon}")
        return self

    def at(self, t: float) -> ParticleConfig:
        if t == 0:
            return self.initial
        if t not in self.snapshots:
            raise InvalidArgumentError(f"time {t} was not recorded")
        return self.snapshots[t]

    @property
    def times(self) -> List[float]:
        return sorted(self.snapshots)


class VertexArrows(NamedTuple):
    in_left: int
    in_bottom: int
    out_right: int
    out_top: int


class PathEnsemble(BaseModel):
    """Six-vertex arrow configurations on the triangle x, y >= 1, x + y <= n"""
    model_config = ConfigDict(frozen=True)

    n: int = Field(ge=1)
    arrows: Dict[Tuple[int, int], VertexArrows]
    boundary: InitialData

    @model_validator(mode="after")
    def _check_paths(self) -> "PathEnsemble":
        for (x, y), a in self.arrows.items():
            if x < 1 or y < 1 or x + y > self.n:
                raise ValueError(f"vertex {(x, y)} outside the triangle of size {self.n}")
            if a.in_left + a.in_bottom != a.out_right + a.out_top:
                raise ValueError(f"arrow conservation fails at {(x, y)}")
            expected_left = self.boundary.y_bit(y) if x == 1 else self.arrows[(x - 1, y)].out_right
            expected_bottom = self.boundary.x_bit(x) if y == 1 else self.arrows[(x, y - 1)].out_top
            if a.in_left != expected_left or a.in_bottom != expected_bottom:
                raise ValueError(f"inconsistent edges at {(x, y)}")
        return self

    def vertex(self, x: int, y: int) -> VertexArrows:
        if (x, y) not in self.arrows:
            raise InvalidArgumentError(f"vertex {(x, y)} outside the triangle of size {self.n}")
        return self.arrows[(x, y)]


class OffsetState(BaseModel):
    """Offset six-vertex particles q(t) = p(t) - t together with N(t)"""
    model_config = ConfigDict(frozen=True)

    config: ParticleConfig
    time: int = Field(ge=0)
    blue_count: int = Field(ge=0)

    @model_validator(mode="after")
    def _check_blue_count(self) -> "OffsetState":
        if self.config.blue_count != self.blue_count:
            raise ValueError(f"{self.config.blue_count} blue particles present, N(t) = {self.blue_count}")
        return self


class TildeQState(BaseModel):
    """Nearest-neighbor simultaneous-update bridge process on the altered graph"""
    model_config = ConfigDict(frozen=True)

    config: ParticleConfig
    time: int = Field(ge=0)
    M: int = Field(ge=1)
    N: int = Field(ge=1)
