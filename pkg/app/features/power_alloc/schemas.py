"""Power allocation types: levels, QoS, solver state and solution tables."""

import math
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class PowerLevels(BaseModel):
    """Budget grid {t·p_max/T : t = 1..T}; ``level(t)`` is 1-based."""

    model_config = ConfigDict(frozen=True)

    p_max: float = Field(gt=0)
    T: int = Field(ge=1)
    levels: List[float]

    def level(self, t: int) -> float:
        return self.levels[t - 1]


class QoSBounds(BaseModel):
    """Per-user and network rate bounds (bits/s/Hz) and the strong-user power cap."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    r_min: float = Field(default=0.0, ge=0)
    r_max: float = Field(default=0.5, gt=0)
    p_s_threshold: float = Field(default=0.01, gt=0, description="P_s^T (W)")
    r_min_net: float = Field(default=0.0, ge=0)
    r_max_net: float = Field(default=math.inf, gt=0)

    @model_validator(mode="after")
    def _ordered(self) -> "QoSBounds":
        if self.r_min > self.r_max:
            raise ValueError("need r_min <= r_max")
        if self.r_min_net > self.r_max_net:
            raise ValueError("need r_min_net <= r_max_net")
        return self


class SolverConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    tol: float = Field(default=1e-6, gt=0, description="Dinkelbach residual tolerance")
    step: float = Field(
        default=0.5, gt=0, le=1, description="Initial ε_n, a fraction of the step that puts p_w on its constraint"
    )
    step_decay: float = Field(default=0.99, gt=0, le=1)
    max_outer: int = Field(default=500, ge=1)
    max_inner: int = Field(default=200, ge=1)
    ramp_steps: int = Field(default=10, ge=1, description="S, demand ramp r_max -> r_min")
    delta_rel: float = Field(default=1e-9, gt=0, description="p_w >= P_s^T + delta_rel·p_max")
    cs_tol: float = Field(default=1e-4, gt=0)


class DinkelbachState(BaseModel):
    """Iterate of the parametric solver; multipliers stay in the positive orthant."""

    xi: float = 0.0
    alpha: float = 0.0
    mu: float = 0.0
    lam: float = 0.0
    nu: float = 0.0
    steps: Tuple[float, float, float, float] = (0.5, 0.5, 0.5, 0.5)
    tau: int = 0

    def multipliers(self) -> Dict[str, float]:
        return {"alpha": self.alpha, "mu": self.mu, "lambda_max": self.lam, "nu_min": self.nu}


class GroupSolution(BaseModel):
    """Optimal powers of one pair at one budget, or an infeasible marker."""

    group: int
    budget: float
    p_w: float = 0.0
    p_s: float = 0.0
    rate_weak: float = 0.0
    rate_strong: float = 0.0
    feasible: bool = True
    reason: Optional[str] = None
    demand: Optional[float] = None
    xi: float = 0.0
    residual: float = 0.0
    stationarity: float = 0.0
    multipliers: Dict[str, float] = Field(default_factory=dict)
    cs_residuals: Dict[str, float] = Field(default_factory=dict)
    trace: List[Tuple[float, float, float]] = Field(default_factory=list)

    @property
    def consumed(self) -> float:
        return self.p_w + self.p_s if self.feasible else 0.0

    @property
    def rate(self) -> float:
        """Group sum rate, -inf when infeasible."""
        return self.rate_weak + self.rate_strong if self.feasible else -math.inf


class AllocationTables(BaseModel):
    """DP results for every (served groups G', level t).

    ``R_full[G'-1, t-1]`` is the best total over the first G' groups of
    ``order``. ``Tgt_full``/``Pw_full`` have shape (G, K, T) with user rows
    2g (weak) and 2g+1 (strong) of group g. ``Tgt``/``Pw`` are the G' = G
    slices.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    R_full: np.ndarray
    Tgt_full: np.ndarray
    Pw_full: np.ndarray
    levels: PowerLevels
    order: List[int]
    user_ids: List[int] = Field(default_factory=list)
    backpointers: np.ndarray
    selected: Optional[Tuple[int, int]] = None
    seed: Optional[int] = None

    @property
    def num_groups(self) -> int:
        return int(self.R_full.shape[0])

    @property
    def R(self) -> np.ndarray:
        return self.R_full

    @property
    def Tgt(self) -> np.ndarray:
        return self.Tgt_full[-1]

    @property
    def Pw(self) -> np.ndarray:
        return self.Pw_full[-1]

    def consumed(self, groups: int, t: int) -> float:
        return float(self.Pw_full[groups - 1, :, t - 1].sum())


class NetworkSolution(BaseModel):
    """The selected (G*, t*) cell and its per-user allocation."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    groups_served: int
    t_star: int
    rate: float
    consumed: float
    user_rates: np.ndarray
    user_powers: np.ndarray
    tables: AllocationTables
