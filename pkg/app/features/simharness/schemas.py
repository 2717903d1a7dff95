"""Scenario configuration, per-drop metrics and sweep results."""

import math
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.features.baselines.schemas import BaselineConfig
from app.features.channel.schemas import BeamParams, EyeSafetyParams, NoiseModel, OpticalFrontEnd
from app.features.geometry.schemas import ClassificationRule, DetectorGeometry, Room
from app.features.power_alloc.schemas import QoSBounds, SolverConfig

SweepAxis = Literal["num_users", "blockage", "snr", "beam_waist", "tx_power"]


# ==================== Scenario sections ====================


class ApGridConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    rows: int = Field(default=4, ge=1)
    cols: int = Field(default=4, ge=1)
    array_side: int = Field(default=1, ge=1, description="L_v")

    @property
    def num_aps(self) -> int:
        return self.rows * self.cols


class UserPlacementConfig(BaseModel):
    """``uniform`` draws positions over the floor; ``fixed`` takes the first ``count`` of ``positions``."""

    model_config = ConfigDict(extra="forbid")

    count: int = Field(default=20, ge=1, description="K")
    placement: Literal["uniform", "fixed"] = "uniform"
    positions: Optional[List[Tuple[float, float]]] = None
    height: float = Field(default=0.0, ge=0, description="Detector height above the floor (m)")

    @model_validator(mode="after")
    def _fixed_positions(self) -> "UserPlacementConfig":
        if self.placement == "fixed":
            if self.positions is None or len(self.positions) < self.count:
                raise ValueError("fixed placement needs at least `count` positions")
        return self


class DetectorConfig(BaseModel):
    """Uniform detector; ``num_photodiodes`` defaults to the number of APs."""

    model_config = ConfigDict(extra="forbid")

    num_photodiodes: Optional[int] = Field(default=None, ge=1)
    elevation: float = Field(default=math.pi / 4, ge=0, le=math.pi / 2)
    receiver_area: Optional[float] = Field(default=None, gt=0)
    pd_area_physical: float = Field(default=15e-6, gt=0)
    pd_gain: float = Field(default=1.0, gt=0)
    fov: float = Field(default=math.radians(60.0), gt=0, le=math.pi / 2)

    def build(self, num_aps: int) -> DetectorGeometry:
        return DetectorGeometry.uniform(
            self.num_photodiodes or num_aps,
            elevation=self.elevation,
            receiver_area=self.receiver_area,
            pd_area_physical=self.pd_area_physical,
            pd_gain=self.pd_gain,
            fov=self.fov,
        )


class AllocationConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    T: int = Field(default=20, ge=1, description="Budget levels")
    solver: SolverConfig = Field(default_factory=SolverConfig)


class ScenarioConfig(BaseModel):
    """One experiment, loaded from a versioned JSON document.

    Unknown keys are rejected at every level. ``per_beam_power`` overrides
    the eye-safe per-VCSEL power; ``e_rf`` is recorded only.
    """

    model_config = ConfigDict(extra="forbid")

    schema_version: Literal[1] = 1
    room: Room = Field(default_factory=Room)
    ap_grid: ApGridConfig = Field(default_factory=ApGridConfig)
    users: UserPlacementConfig = Field(default_factory=UserPlacementConfig)
    detector: DetectorConfig = Field(default_factory=DetectorConfig)
    beam: BeamParams = Field(default_factory=BeamParams)
    safety: EyeSafetyParams = Field(default_factory=EyeSafetyParams)
    front_end: OpticalFrontEnd = Field(default_factory=OpticalFrontEnd)
    noise: NoiseModel = Field(default_factory=NoiseModel)
    qos: QoSBounds = Field(default_factory=QoSBounds)
    allocation: AllocationConfig = Field(default_factory=AllocationConfig)
    baselines: BaselineConfig = Field(default_factory=BaselineConfig)
    classification: ClassificationRule = Field(default_factory=ClassificationRule)
    blockage_probability: float = Field(default=0.0, ge=0, le=1)
    per_beam_power: Optional[float] = Field(default=None, gt=0, description="P_tr override (W)")
    e_rf: float = Field(default=0.0, ge=0, description="RF uplink energy per bit (J/bit), unused")
    seed: int = Field(default=0, ge=0)
    drops: int = Field(default=50, ge=1)
    workers: int = Field(default=1, description="joblib n_jobs")

    @model_validator(mode="after")
    def _users_fit_room(self) -> "ScenarioConfig":
        if self.users.height > self.room.height:
            raise ValueError("user height exceeds the room height")
        if self.users.positions is not None:
            for x, y in self.users.positions:
                if not (0.0 <= x <= self.room.width and 0.0 <= y <= self.room.depth):
                    raise ValueError(f"user position ({x}, {y}) lies outside the room")
        return self


# ==================== Results ====================


class MetricsRecord(BaseModel):
    """Metrics of one scheme on one drop."""

    model_config = ConfigDict(frozen=True)

    scheme: str
    seed: int
    drop_index: int
    num_users: int
    sum_rate: float = Field(ge=0, description="bits/s/Hz")
    sum_rate_bps: float = Field(ge=0, description="bits/s")
    jain: float = Field(ge=0, le=1)
    energy_eff: float = Field(ge=0, description="bits/J")
    consumed_power: float = Field(ge=0, description="W")
    groups_served: int = Field(ge=0)
    t_star: int = Field(ge=0)
    flags: List[str] = Field(default_factory=list)


class SweepSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    axis: SweepAxis
    values: List[float] = Field(min_length=1)
    drops: int = Field(default=50, ge=1)


class SweepRow(BaseModel):
    """Ensemble statistics of one (axis value, scheme) point."""

    axis: float
    scheme: str
    mean_rate: float
    stderr: float
    jain: float
    ee: float
    groups: float
    t_star: float


class SlopeEstimate(BaseModel):
    """Least-squares slope with a percentile bootstrap interval."""

    slope: float
    low: float
    high: float
    resamples: int

    @property
    def positive(self) -> bool:
        return self.low > 0

    @property
    def negative(self) -> bool:
        return self.high < 0
