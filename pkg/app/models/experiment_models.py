from enum import Enum
import json
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.core.config import settings
from app.models.lattice_models import InitialData, InitialDataKind


class Command(str, Enum):
    SAMPLE_ENSEMBLE = "sample-ensemble"
    SIM_ASEP = "sim-asep"
    SIM_OFFSET = "sim-offset"
    CONVERGE = "converge"
    BOUND_CHECK = "bound-check"
    BAD_EVENTS = "bad-events"


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


class PhiSpec(BaseModel):
    """How each replica obtains its initial data: step, double-sided Bernoulli or fixed bits"""
    model_config = ConfigDict(frozen=True)

    kind: InitialDataKind = InitialDataKind.STEP
    b1: Optional[float] = None
    b2: Optional[float] = None
    bits: Tuple[Tuple[int, int], ...] = ()

    @model_validator(mode="after")
    def _check_kind(self) -> "PhiSpec":
        if self.kind == InitialDataKind.DOUBLE_BERNOULLI:
            for name, value in (("b1", self.b1), ("b2", self.b2)):
                if value is None or not 0.0 <= value <= 1.0:
                    raise ValueError(f"{name} must lie in [0, 1]")
        if self.kind == InitialDataKind.EXPLICIT and not self.bits:
            raise ValueError("explicit initial data needs bits")
        return self

    @classmethod
    def parse(cls, text: str) -> "PhiSpec":
        """``step``, ``bernoulli:b1,b2`` or ``file:PATH`` (a JSON initial-data object)"""
        text = text.strip()
        if text == "step":
            return cls(kind=InitialDataKind.STEP)
        if text.startswith("bernoulli:"):
            parts = text[len("bernoulli:"):].split(",")
            if len(parts) != 2:
                raise ValueError(f"expected bernoulli:b1,b2, got {text!r}")
            return cls(kind=InitialDataKind.DOUBLE_BERNOULLI, b1=float(parts[0]), b2=float(parts[1]))
        if text.startswith("file:"):
            with open(text[len("file:"):]) as f:
                data = InitialData.from_json_dict(json.load(f))
            return cls(kind=InitialDataKind.EXPLICIT, bits=data.bits)
        raise ValueError(f"unknown initial data {text!r}; use step, bernoulli:b1,b2 or file:PATH")

    def label(self) -> str:
        if self.kind == InitialDataKind.DOUBLE_BERNOULLI:
            return f"bernoulli:{self.b1},{self.b2}"
        if self.kind == InitialDataKind.EXPLICIT:
            return "explicit:" + "".join(f"{x}{y}" for x, y in self.bits)
        return "step"


def steps_for(t: float, epsilon: float) -> int:
    """floor(t / epsilon), robust to binary rounding of t / epsilon"""
    return int(math.floor(t / epsilon + 1e-9))


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    command: Command = Command.CONVERGE
    L: float = 0.3
    R: float = 1.0
    delta1: Optional[float] = None
    delta2: Optional[float] = None
    epsilons: List[float] = Field(default_factory=lambda: [0.2, 0.1, 0.05, 0.025])
    M: int = Field(default=20, ge=1)
    N: int = Field(default=20, ge=1)
    sizes: List[int] = Field(default_factory=lambda: [16, 32, 64])
    replicas: int = Field(default=settings.DEFAULT_REPLICAS, ge=1)
    seed: int = Field(default=settings.DEFAULT_SEED, ge=0)
    phi: PhiSpec = Field(default_factory=PhiSpec)
    tags: List[int] = Field(default_factory=lambda: [-1])
    times: List[float] = Field(default_factory=lambda: [1.0])
    set: Optional[Tuple[int, int]] = None
    x: int = 0
    r: int = 1
    n: int = Field(default=40, ge=2)
    steps: int = Field(default=3, ge=1)
    t: float = Field(default=1.0, gt=0)
    identity_replicas: int = Field(default=1000, ge=0)
    agreement_replicas: Optional[int] = Field(default=None, ge=1)
    out: str = settings.OUTPUT_DIR
    format: OutputFormat = OutputFormat.CSV
    threads: int = Field(default=settings.DEFAULT_THREADS, ge=1)

    @field_validator("phi", mode="before")
    @classmethod
    def _parse_phi(cls, value: Any) -> Any:
        if isinstance(value, str):
            return PhiSpec.parse(value)
        return value

    @field_validator("delta1")
    @classmethod
    def _check_delta1(cls, value: Optional[float]) -> Optional[float]:
        if value is not None and not 0.0 <= value < 1.0:
            raise ValueError("δ1 must lie in [0,1)")
        return value

    @field_validator("delta2")
    @classmethod
    def _check_delta2(cls, value: Optional[float]) -> Optional[float]:
        if value is not None and not 0.0 <= value < 1.0:
            raise ValueError("δ2 must lie in [0,1)")
        return value

    @field_validator("epsilons")
    @classmethod
    def _check_epsilons(cls, value: List[float]) -> List[float]:
        if not value:
            raise ValueError("at least one epsilon is required")
        if any(eps <= 0 for eps in value):
            raise ValueError("epsilons must be positive")
        return sorted(value, reverse=True)

    @field_validator("times")
    @classmethod
    def _check_times(cls, value: List[float]) -> List[float]:
        if not value or any(t <= 0 for t in value):
            raise ValueError("query times must be positive")
        return sorted(value)

    @field_validator("tags", "sizes")
    @classmethod
    def _check_nonempty(cls, value: List[int]) -> List[int]:
        if not value:
            raise ValueError("at least one entry is required")
        return value

    @model_validator(mode="after")
    def _check_rates(self) -> "ExperimentConfig":
        uses_rates = self.command not in (Command.SAMPLE_ENSEMBLE, Command.SIM_OFFSET) or None in (
            self.delta1, self.delta2)
        if uses_rates and not self.R > self.L >= 0:
            raise ValueError(f"rates must satisfy R > L >= 0, got L={self.L}, R={self.R}")
        if self.set is not None and self.set[0] > self.set[1]:
            raise ValueError(f"empty query set [{self.set[0]}, {self.set[1]}]")
        return self

    def vertex_params(self, epsilon: Optional[float] = None) -> Tuple[float, float]:
        """(δ1, δ2): explicit values when given, otherwise (εL, εR) for ε (default the largest)"""
        if epsilon is None and self.delta1 is not None and self.delta2 is not None:
            return self.delta1, self.delta2
        eps = self.epsilons[0] if epsilon is None else epsilon
        return eps * self.L, eps * self.R

    def provenance(self) -> Dict[str, Any]:
        payload = self.model_dump(mode="json", exclude={"out", "threads"})
        payload["derived_deltas"] = [
            {"epsilon": eps, "delta1": eps * self.L, "delta2": eps * self.R} for eps in self.epsilons
        ]
        return payload

    @classmethod
    def from_file(cls, path: str, overrides: Optional[Dict[str, Any]] = None) -> "ExperimentConfig":
        with open(Path(path)) as f:
            payload = json.load(f)
        payload.update(overrides or {})
        return cls(**payload)
