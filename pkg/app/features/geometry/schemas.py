"""Geometry domain types: room, access points, detectors and users."""

import math
from enum import Enum
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class Vec3(BaseModel):
    """A point or direction in the room frame (meters)."""

    model_config = ConfigDict(frozen=True)

    x: float
    y: float
    z: float

    @field_validator("x", "y", "z")
    @classmethod
    def _finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("Vec3 components must be finite")
        return v

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    @classmethod
    def from_array(cls, arr) -> "Vec3":
        return cls(x=float(arr[0]), y=float(arr[1]), z=float(arr[2]))

    def norm(self) -> float:
        return float(np.linalg.norm(self.as_array()))


DOWN = Vec3(x=0.0, y=0.0, z=-1.0)


class Room(BaseModel):
    """Rectangular room with the floor at z = 0."""

    model_config = ConfigDict(frozen=True)

    width: float = Field(default=8.0, gt=0, description="Extent along x (m)")
    depth: float = Field(default=8.0, gt=0, description="Extent along y (m)")
    height: float = Field(default=3.0, gt=0, description="Ceiling height (m)")

    def contains(self, p: Vec3) -> bool:
        return 0.0 <= p.x <= self.width and 0.0 <= p.y <= self.depth and 0.0 <= p.z <= self.height


class AccessPoint(BaseModel):
    """An optical AP: an L_v x L_v VCSEL array treated as a point source."""

    model_config = ConfigDict(frozen=True)

    id: int = Field(ge=0)
    position: Vec3
    array_side: int = Field(default=1, ge=1, description="L_v, VCSELs per array side")
    orientation: Vec3 = Field(default=DOWN, description="Unit normal of the emitting plane")

    @field_validator("orientation")
    @classmethod
    def _unit_normal(cls, v: Vec3) -> Vec3:
        if abs(v.norm() - 1.0) > 1e-12:
            raise ValueError("AP orientation must be a unit vector")
        return v


class DetectorGeometry(BaseModel):
    """Reconfigurable multi-photodiode receiver.

    Each photodiode is one reception mode candidate. Elevation is measured
    from the zenith and azimuth from the +x axis.
    """

    model_config = ConfigDict(frozen=True)

    num_photodiodes: int = Field(ge=1, description="M")
    elevations: List[float] = Field(description="theta_{k,m} per photodiode (rad)")
    azimuths: List[float] = Field(description="alpha_{k,m} per photodiode (rad)")
    area_per_pd: float = Field(gt=0, description="A_m = A_rec / M (m^2)")
    pd_area_physical: float = Field(default=15e-6, gt=0, description="A_pd (m^2)")
    pd_gain: float = Field(default=1.0, gt=0, description="G_m, optical filter/concentrator gain")
    fov: float = Field(default=math.radians(60.0), gt=0, le=math.pi / 2, description="Psi_F (rad)")

    @model_validator(mode="after")
    def _check_shapes(self) -> "DetectorGeometry":
        if len(self.elevations) != self.num_photodiodes or len(self.azimuths) != self.num_photodiodes:
            raise ValueError("elevations and azimuths need one entry per photodiode")
        if self.num_photodiodes > 1:
            wrapped = np.sort(np.mod(np.asarray(self.azimuths, dtype=float), 2 * math.pi))
            gaps = np.diff(np.append(wrapped, wrapped[0] + 2 * math.pi))
            if gaps.min() < 1e-12:
                raise ValueError("photodiode azimuths must be distinct modulo 2*pi")
        return self

    @classmethod
    def uniform(
        cls,
        num_photodiodes: int,
        elevation: float = math.pi / 4,
        receiver_area: Optional[float] = None,
        pd_area_physical: float = 15e-6,
        pd_gain: float = 1.0,
        fov: float = math.radians(60.0),
    ) -> "DetectorGeometry":
        """Photodiodes at one common elevation, azimuths evenly spread over 2*pi."""
        area = receiver_area if receiver_area is not None else pd_area_physical * num_photodiodes
        return cls(
            num_photodiodes=num_photodiodes,
            elevations=[elevation] * num_photodiodes,
            azimuths=[2 * math.pi * m / num_photodiodes for m in range(num_photodiodes)],
            area_per_pd=area / num_photodiodes,
            pd_area_physical=pd_area_physical,
            pd_gain=pd_gain,
            fov=fov,
        )


class UserClass(str, Enum):
    WEAK = "weak"
    STRONG = "strong"
    UNASSIGNED = "unassigned"


class UserTerminal(BaseModel):
    """A user device. Virtual users pad classes to equal size and carry no signal."""

    model_config = ConfigDict(frozen=True)

    id: int = Field(ge=0)
    position: Vec3
    detector: DetectorGeometry
    user_class: UserClass = UserClass.UNASSIGNED
    is_virtual: bool = False


class ClassificationRule(BaseModel):
    """How users are split into weak and strong classes."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["median_split", "distance_threshold"] = "median_split"
    d_th: Optional[float] = Field(default=None, gt=0, description="Threshold distance (m)")

    @model_validator(mode="after")
    def _threshold_given(self) -> "ClassificationRule":
        if self.kind == "distance_threshold" and self.d_th is None:
            raise ValueError("distance_threshold rule needs d_th")
        return self


class Classification(BaseModel):
    """Result of classify_users."""

    weak: List[UserTerminal]
    strong: List[UserTerminal]
    rule: str
    warnings: List[str] = Field(default_factory=list)

    @property
    def num_virtual(self) -> int:
        return sum(u.is_virtual for u in self.weak + self.strong)
