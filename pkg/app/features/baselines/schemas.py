"""Scheme identifiers, baseline settings and the per-drop context schemes consume."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.features.channel.schemas import ChannelMatrix, OpticalFrontEnd
from app.features.geometry.schemas import AccessPoint, Classification, UserTerminal
from app.features.grouping.schemas import GroupAssignment
from app.features.power_alloc.schemas import QoSBounds, SolverConfig


class SchemeId(str, Enum):
    DYNAMIC_NOMA = "dynamic_noma"
    BASELINE1 = "baseline1"
    BASELINE2 = "baseline2"
    CONVENTIONAL_NOMA = "conventional_noma"
    PLAIN_BIA = "plain_bia"


class BaselineConfig(BaseModel):
    """Fixed power split of conventional NOMA."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    beta_weak: float = Field(default=0.8, gt=0, lt=1)
    beta_strong: float = Field(default=0.2, gt=0, lt=1)

    @model_validator(mode="after")
    def _split_sums_to_one(self) -> "BaselineConfig":
        if abs(self.beta_weak + self.beta_strong - 1.0) > 1e-12:
            raise ValueError("beta_weak + beta_strong must equal 1")
        return self


@dataclass
class DropContext:
    """Everything a scheme needs from one Monte Carlo drop.

    ``channels`` and ``sigma2`` also hold entries for virtual users.
    ``order_seed`` seeds a fresh generator per scheme, so evaluating
    schemes in any order gives the same group order.
    """

    aps: List[AccessPoint]
    users: List[UserTerminal]
    channels: Dict[int, ChannelMatrix]
    sigma2: Dict[int, float]
    classification: Classification
    assignment: Optional[GroupAssignment]
    ap_powers: np.ndarray
    p_max: float
    front_end: OpticalFrontEnd
    qos: QoSBounds
    T: int
    solver: SolverConfig
    baselines: BaselineConfig
    order_seed: int
    warnings: List[str] = field(default_factory=list)

    @property
    def num_aps(self) -> int:
        return len(self.aps)

    @property
    def real_ids(self) -> List[int]:
        return [u.id for u in self.users]


class SchemeOutcome(BaseModel):
    """Per-user result of a scheme on one drop (real users only)."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    scheme: SchemeId
    user_ids: List[int]
    rates: List[float] = Field(description="bits/s/Hz per user")
    consumed_power: float = Field(ge=0)
    groups_served: int = 0
    t_star: int = 0
    flags: List[str] = Field(default_factory=list)

    @property
    def sum_rate(self) -> float:
        return float(sum(self.rates))
