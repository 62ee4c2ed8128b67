from pathlib import Path
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, field_validator, model_validator

from qpdl.config import (
    CONTRACT_LIMITS,
    DEFAULT_GAMMA,
    DEFAULT_K_CHECK,
    DEFAULT_RADIUS,
    DEFAULT_TAU,
    GOLDEN_OMEGA,
    N_MIN,
    NONRESONANCE_BAND_SCALE,
)


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class FrequencySpec(_Section):
    omega: List[float] = Field(default_factory=lambda: [GOLDEN_OMEGA], min_length=1)
    gamma: PositiveFloat = DEFAULT_GAMMA
    tau: PositiveFloat = DEFAULT_TAU
    k_check: int = Field(DEFAULT_K_CHECK, ge=0)

    @field_validator("omega", mode="before")
    @classmethod
    def _listify(cls, value):
        return value if isinstance(value, list) else [value]


class PotentialSpec(_Section):
    kind: Literal["zero", "cosine", "random", "table"] = "cosine"
    eps: float = Field(0.01, ge=0)
    radius: PositiveFloat = DEFAULT_RADIUS
    k_max: PositiveInt = 4
    seed: int = 0
    # flattened (k_1 .. k_d, re, im) groups
    table: Optional[List[float]] = None

    @model_validator(mode="after")
    def _table_present(self):
        if self.kind == "table" and not self.table:
            raise ValueError("potential kind 'table' needs a table entry")
        return self


class ScheduleSpec(_Section):
    eps0: Optional[PositiveFloat] = None
    J: int = Field(2, ge=0)
    n_min: PositiveInt = N_MIN
    band_scale: PositiveFloat = NONRESONANCE_BAND_SCALE


class GridSpec(_Section):
    emin: float = -2.5
    emax: float = 2.5
    points: int = Field(101, ge=2)
    N: int = Field(200, ge=2)
    theta: float = 0.0
    theta_samples: PositiveInt = 16
    theta_sweep: PositiveInt = 1
    nmax: int = Field(100_000, ge=1000)
    resolution: PositiveFloat = 1e-3

    @model_validator(mode="after")
    def _ordered(self):
        if not self.emin < self.emax:
            raise ValueError(f"emin must be below emax, got [{self.emin}, {self.emax}]")
        return self


class Tolerances(_Section):
    unitarity_drift: PositiveFloat = CONTRACT_LIMITS["unitarity_drift"]
    conjugacy_residual: PositiveFloat = CONTRACT_LIMITS["conjugacy_residual"]
    l2_drift: PositiveFloat = CONTRACT_LIMITS["l2_drift"]
    frame_deviation: PositiveFloat = CONTRACT_LIMITS["frame_deviation"]
    roundtrip_error: PositiveFloat = CONTRACT_LIMITS["roundtrip_error"]
    bound_violations: PositiveFloat = CONTRACT_LIMITS["bound_violations"]
    bootstrap_margin: PositiveFloat = CONTRACT_LIMITS["bootstrap_margin"]
    lost_mass: PositiveFloat = CONTRACT_LIMITS["lost_mass"]


class RunSpec(_Section):
    out: Path = Path("out")
    seed: int = 0
    E: float = 0.0
    t: float = 20.0
    t_min: PositiveFloat = 10.0
    tmax: PositiveFloat = 500.0
    times: PositiveInt = 12
    datum: Literal["delta", "gaussian"] = "delta"
    width: PositiveFloat = 3.0
    samples: PositiveInt = 10
    trials: int = Field(0, ge=0)
    t_list: List[float] = Field(default_factory=lambda: [0.0, 5.0, 20.0])
    M_list: List[float] = Field(default_factory=lambda: [0.0, 1.0, 5.0])
    p: int = Field(6, ge=2)
    zeta: float = Field(0.3, gt=0, le=1)
    sign: Literal[-1, 1] = 1
    delta0: Optional[PositiveFloat] = None
    dt: Optional[PositiveFloat] = None

    @field_validator("t_list", "M_list", mode="before")
    @classmethod
    def _listify(cls, value):
        return value if isinstance(value, list) else [value]


class RunConfig(_Section):
    frequency: FrequencySpec = Field(default_factory=FrequencySpec)
    potential: PotentialSpec = Field(default_factory=PotentialSpec)
    schedule: ScheduleSpec = Field(default_factory=ScheduleSpec)
    grid: GridSpec = Field(default_factory=GridSpec)
    tolerances: Tolerances = Field(default_factory=Tolerances)
    run: RunSpec = Field(default_factory=RunSpec)
