"""Channel domain types: beam, eye safety, front end, noise and gain matrices."""

import math
from typing import Any, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class BeamParams(BaseModel):
    """Gaussian VCSEL beam.

    Either ``w0`` is given directly or it is derived from the half-power
    divergence ``theta_fwhm`` as W_0 = λ/(π Θ_D), Θ_D = Θ_F/√(2 ln 2).
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    w0: float = Field(default=8e-6, gt=0, description="Beam waist W_0 (m)")
    wavelength: float = Field(default=1550e-9, gt=0, description="λ (m)")
    refractive_index: float = Field(default=1.0, ge=1.0, description="n")
    theta_fwhm: float = Field(default=math.radians(4.0), gt=0, description="Θ_F (rad)")

    @model_validator(mode="before")
    @classmethod
    def _derive_waist(cls, data: Any) -> Any:
        # An explicit ``w0: null`` asks for the waist implied by Θ_F.
        if isinstance(data, dict) and "w0" in data and data["w0"] is None:
            wavelength = data.get("wavelength", 1550e-9)
            theta_d = data.get("theta_fwhm", math.radians(4.0)) / math.sqrt(2.0 * math.log(2.0))
            data = {**data, "w0": wavelength / (math.pi * theta_d)}
        return data

    @property
    def theta_d(self) -> float:
        """Divergence Θ_D derived from the half-power angle."""
        return self.theta_fwhm / math.sqrt(2.0 * math.log(2.0))


class EyeSafetyParams(BaseModel):
    """Exposure limits and laser drive ranges."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    cornea_diameter: float = Field(default=7e-3, gt=0, description="d_c (m)")
    exposure_limit: float = Field(default=740.4, gt=0, description="E_e,max (W/m^2)")
    hazard_distance: float = Field(default=0.1, gt=0, description="d_h (m)")
    drive_current_low: float = Field(default=1e-3, gt=0, description="I_L (A)")
    drive_current_high: float = Field(default=20e-3, gt=0, description="I_H (A)")
    dc_bias: float = Field(default=10e-3, gt=0, description="I^Dc (A)")
    modulation_amplitude: float = Field(default=5e-3, gt=0, description="η_v, peak (A)")
    power_low: float = Field(default=1e-3, gt=0, description="P_L (W)")
    power_high: float = Field(default=0.1, gt=0, description="P_H (W)")

    @model_validator(mode="after")
    def _check_ranges(self) -> "EyeSafetyParams":
        if not self.drive_current_low < self.dc_bias < self.drive_current_high:
            raise ValueError("need I_L < I^Dc < I_H")
        if self.power_low >= self.power_high:
            raise ValueError("need P_L < P_H")
        if self.modulation_amplitude > self.modulation_headroom:
            raise ValueError("modulation amplitude exceeds the linear drive range")
        return self

    @property
    def modulation_headroom(self) -> float:
        """min(I^Dc - I_L, I_H - I^Dc)."""
        return min(self.dc_bias - self.drive_current_low, self.drive_current_high - self.dc_bias)


class OpticalFrontEnd(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    responsivity: float = Field(default=0.9, gt=0, description="f (A/W)")
    conversion_factor: float = Field(default=1.0, gt=0, description="ρ (W/A)")
    bandwidth: float = Field(default=1.5e9, gt=0, description="B (Hz)")


class NoiseModel(BaseModel):
    """Receiver noise: shot + thermal + laser RIN, or a fixed variance."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    rin_db_per_hz: float = Field(default=-155.0, description="Laser RIN (dB/Hz)")
    thermal_psd: float = Field(default=1e-22, gt=0, description="Thermal current PSD (A^2/Hz)")
    electron_charge: float = Field(default=1.602e-19, gt=0, description="q (C)")
    mode: Literal["composite", "fixed_sigma"] = "composite"
    sigma2: Optional[float] = Field(default=None, gt=0, description="σ_z^2 for fixed_sigma (A^2)")

    @model_validator(mode="after")
    def _fixed_needs_sigma(self) -> "NoiseModel":
        if self.mode == "fixed_sigma" and self.sigma2 is None:
            raise ValueError("fixed_sigma noise mode needs sigma2")
        return self


class ChannelMatrix(BaseModel):
    """Per-user L x L optical gain matrix.

    Row m is the channel state seen through reception mode m across the L
    APs. ``modes`` records which photodiode backs each row.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    user: int
    gains: np.ndarray
    blocked: np.ndarray
    modes: List[int] = Field(default_factory=list)
    rank_deficient: bool = False

    @property
    def num_aps(self) -> int:
        return int(self.gains.shape[1])

    def best_mode(self) -> int:
        """Row index with the largest total gain (lowest index on ties)."""
        return int(np.argmax(self.gains.sum(axis=1)))
