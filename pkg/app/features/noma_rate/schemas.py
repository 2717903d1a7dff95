"""Rate-level types for BIA-NOMA groups."""

from fractions import Fraction

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator


class PowerPair(BaseModel):
    """Electrical powers driving the weak and strong user's symbols (W)."""

    model_config = ConfigDict(frozen=True)

    p_w: float = Field(ge=0)
    p_s: float = Field(ge=0)

    @property
    def total(self) -> float:
        return self.p_w + self.p_s


class RateResult(BaseModel):
    """Rates in bits/s/Hz of one weak-strong pair."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    rate_weak: float = Field(ge=0)
    rate_strong: float = Field(ge=0)
    b_ratio: Fraction
    sinr_weak: float = Field(ge=0)
    sinr_strong: float = Field(ge=0)

    @property
    def sum_rate(self) -> float:
        return self.rate_weak + self.rate_strong

    def in_bps(self, bandwidth: float) -> tuple[float, float]:
        return self.rate_weak * bandwidth, self.rate_strong * bandwidth


class NoiseCovariance(BaseModel):
    """Diagonal positive-definite covariance of the post-subtraction noise."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    matrix: np.ndarray

    @field_validator("matrix")
    @classmethod
    def _square(cls, v: np.ndarray) -> np.ndarray:
        v = np.atleast_2d(np.asarray(v, dtype=float))
        if v.shape[0] != v.shape[1]:
            raise ValueError("noise covariance must be square")
        return v

    @property
    def size(self) -> int:
        return int(self.matrix.shape[0])
