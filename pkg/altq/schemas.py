from __future__ import annotations

from enum import Enum
import sys

if sys.version_info >= (3, 11):
    from typing import Self
else:  # pragma: no cover
    from typing_extensions import Self

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import InvalidStrategy


class SolveMethod(str, Enum):
    QBD = "qbd"
    GENFUNC = "genfunc"
    BOTH = "both"


class EquilibriumCase(str, Enum):
    ALL_BALK = "AllBalk"
    INTERIOR = "Interior"
    ALL_JOIN = "AllJoin"


# ---------- Model ----------
class ModelParams(BaseModel):
    """Operational and economic parameters, as read from a JSON document.

    The wire names are lambda, mu, theta, zeta, R, C, fe, fs, r. Domain
    conditions are checked by altq.model.validate, not here, so that they
    surface as altq errors instead of schema errors.
    """

    model_config = ConfigDict(extra="forbid", frozen=True, allow_inf_nan=False)

    lam: float = Field(alias="lambda")
    mu: float
    theta: float
    zeta: float
    R: float
    C: float
    f_e: float = Field(alias="fe")
    f_s: float = Field(alias="fs")
    r: float

    @classmethod
    def from_fields(cls, **fields: float) -> Self:
        """Build from attribute names (lam, f_e, f_s) instead of wire names."""
        return cls.model_validate(fields, by_alias=False, by_name=True)

    @property
    def gamma(self) -> float:
        """Fraction of time spent in observable mode."""
        return self.theta / (self.theta + self.zeta)

    @property
    def cycle(self) -> float:
        """Mean length of one unobservable plus one observable period."""
        return 1.0 / self.theta + 1.0 / self.zeta

    @property
    def money_scale(self) -> float:
        return abs(self.R) + abs(self.r) + self.C / self.mu

    def replace(self, **changes: float) -> ModelParams:
        return ModelParams.from_fields(**{**self.model_dump(), **changes})


class ValidatedParams(ModelParams):
    """ModelParams that passed altq.model.validate."""


class Strategy(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_e: int
    n_s: int
    q: float

    @model_validator(mode="after")
    def _check_order(self) -> Strategy:
        if not 1 <= self.n_e <= self.n_s:
            raise InvalidStrategy(f"need 1 <= n_e <= n_s, got n_e={self.n_e}, n_s={self.n_s}")
        if not 0.0 <= self.q <= 1.0:
            raise InvalidStrategy(f"q must lie in [0, 1], got {self.q}")
        return self


# ---------- Payoff ----------
class BenefitBreakdown(BaseModel):
    model_config = ConfigDict(frozen=True)

    value: float
    reward: float
    fees: float
    waiting_cost: float
    refund: float


# ---------- Equilibrium / measures ----------
class EquilibriumResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    q_e: float
    case: EquilibriumCase
    residual: float
    iterations: int
    n_e: int
    n_s: int
    method: SolveMethod = SolveMethod.QBD


class Measures(BaseModel):
    model_config = ConfigDict(frozen=True)

    q_e: float
    mu_e: float
    a_e: float
    EN: float
    S_e: float
    join_rate: float


class SolveReport(BaseModel):
    params: ModelParams
    method: SolveMethod
    n_e: int
    n_s: int
    q_e: float
    case: EquilibriumCase
    residual: float
    iterations: int
    rho_minus: float
    gamma: float
    cycle: float
    mu_e: float
    a_e: float
    EN: float
    S_e: float
    genfunc_gap: float | None = None


# ---------- Simulation ----------
class SimConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    seed: int = Field(default=42, ge=0, lt=2**64)
    events: int = Field(default=1_000_000, ge=1)
    warmup_fraction: float = Field(default=0.1, ge=0.0, lt=1.0)
    replications: int = Field(default=20, ge=2)
    extra_levels: int = Field(default=50, ge=0)


class Estimate(BaseModel):
    mean: float
    se: float

    def covers(self, value: float, k: float = 3.0, floor: float = 0.0) -> bool:
        return abs(self.mean - value) <= k * self.se + floor


class EventAccounting(BaseModel):
    joins: int
    completions: int
    reneges: int
    in_system: int


class SimEstimates(BaseModel):
    """Monte Carlo estimates with standard errors over replications.

    p0[n] covers hidden level n for n <= n_s + extra_levels; the final entry
    is the mass of all higher hidden levels. p1 covers observable levels 0..n_s.
    """

    n_e: int
    n_s: int
    q: float
    seed: int
    events: int
    replications: int
    p0: list[Estimate]
    p1: list[Estimate]
    mu_e: Estimate
    a_e: Estimate
    EN: Estimate
    S_e: Estimate
    U: Estimate | None
    unobservable_joins: int
    accounting: EventAccounting


class CoupledPath(BaseModel):
    q_low: float
    q_high: float
    events: int
    max_gap: int
    final_low: int
    final_high: int


class SimulateRequest(BaseModel):
    params: ModelParams
    q: float | None = Field(default=None, ge=0.0, le=1.0)
    seed: int = Field(default=42, ge=0, lt=2**64)
    events: int = Field(default=200_000, ge=1)
    reps: int = Field(default=10, ge=2)
    warmup_fraction: float = Field(default=0.1, ge=0.0, lt=1.0)


# ---------- Sweeps ----------
class SweepFamily(str, Enum):
    GAMMA = "gamma"
    THETA = "theta"
    REFUND = "refund"
    ARRIVAL = "arrival"
    CYCLE = "cycle"
    FEESPLIT = "feesplit"


class SweepSpec(BaseModel):
    """One comparative-statics experiment.

    Family extras: gamma needs cycle (B); theta needs zeta; cycle needs
    gamma; feesplit needs total_fee and refund_ratio. refund and arrival
    take none.
    """

    model_config = ConfigDict(frozen=True)

    family: SweepFamily
    base: ModelParams
    grid: list[float]
    cycle: float | None = None
    zeta: float | None = None
    gamma: float | None = None
    total_fee: float | None = None
    refund_ratio: float | None = None


class SweepRow(BaseModel):
    value: float
    theta: float | None = None
    zeta: float | None = None
    r: float | None = None
    n_e: int | None = None
    n_s: int | None = None
    q_e: float | None = None
    case: EquilibriumCase | None = None
    mu_e: float | None = None
    a_e: float | None = None
    EN: float | None = None
    S_e: float | None = None
    error: str | None = None


class SweepRequest(BaseModel):
    spec: SweepSpec
    method: SolveMethod = SolveMethod.QBD
