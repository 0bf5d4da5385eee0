from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field


class BadEventFlags(BaseModel):
    """The four events outside of which the altered process matches the bounded offset model"""
    model_config = ConfigDict(frozen=True)

    initial_escape: bool = False
    early_window_event: bool = False
    long_jump: bool = False
    simultaneous_pair: bool = False

    @property
    def triggered(self) -> bool:
        return self.initial_escape or self.early_window_event or self.long_jump or self.simultaneous_pair


class ConvergenceRow(BaseModel):
    epsilon: float
    delta1: float
    delta2: float
    steps: int
    samples: int
    tag: int
    time: float
    ks: float
    ks_radius: float
    current_offset: float
    current_reference: float
    current_gap: float
    current_radius: float
    joint_offset: Optional[float] = None
    joint_reference: Optional[float] = None


class TailBoundRow(BaseModel):
    epsilon: Optional[float] = None
    tag: int
    k: int
    empirical: float
    bound: float
    radius: float
    violated: bool


class BadEventRow(BaseModel):
    event: str
    frequency: float
    bound: float
    radius: float
    exceeded: bool


class AgreementRow(BaseModel):
    model: str
    M: int
    N: int
    replicas: int
    disagreement: float
    radius: float
    separation: Optional[float] = None
    separated_disagreements: int = 0

    @property
    def no_separation(self) -> float:
        return 1.0 - (self.separation or 0.0)


class StatRow(BaseModel):
    """Free-form statistic used by the calibration and equivalence experiments"""
    name: str
    key: str = ""
    value: float
    expected: Optional[float] = None
    radius: Optional[float] = None


class CriterionResult(BaseModel):
    name: str
    passed: bool
    detail: str = ""

    def summary_line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


class ConvergenceReport(BaseModel):
    """Rows and pass/fail criteria of one experiment, with the configuration that reproduces it"""
    config: Dict[str, Any] = Field(default_factory=dict)
    convergence_rows: List[ConvergenceRow] = Field(default_factory=list)
    tail_rows: List[TailBoundRow] = Field(default_factory=list)
    bad_event_rows: List[BadEventRow] = Field(default_factory=list)
    agreement_rows: List[AgreementRow] = Field(default_factory=list)
    stat_rows: List[StatRow] = Field(default_factory=list)
    criteria: List[CriterionResult] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(criterion.passed for criterion in self.criteria)

    def merge(self, other: "ConvergenceReport") -> "ConvergenceReport":
        return ConvergenceReport(
            config={**self.config, **other.config},
            convergence_rows=self.convergence_rows + other.convergence_rows,
            tail_rows=self.tail_rows + other.tail_rows,
            bad_event_rows=self.bad_event_rows + other.bad_event_rows,
            agreement_rows=self.agreement_rows + other.agreement_rows,
            stat_rows=self.stat_rows + other.stat_rows,
            criteria=self.criteria + other.criteria,
        )
