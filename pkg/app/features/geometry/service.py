"""Geometry operations.

Provides the angles and distances consumed by the channel model:
    - place_ap_grid: uniform ceiling grid of down-facing APs
    - photodiode_normal: unit normal of one photodiode of a detector
    - irradiance_angle / incidence_angle: per-link angles
    - link_geometry: the same quantities for every (AP, photodiode) at once
    - classify_users: weak/strong split with virtual-user padding
"""

import logging
from dataclasses import dataclass
from typing import List, Mapping, Optional, Sequence

import numpy as np

from app.common.errors import ConfigurationError, DegenerateGeometryError

from .schemas import (
    AccessPoint,
    Classification,
    ClassificationRule,
    DetectorGeometry,
    Room,
    UserClass,
    UserTerminal,
    Vec3,
)

logger = logging.getLogger(__name__)


# ==================== Placement ====================


def place_ap_grid(room: Room, rows: int, cols: int, array_side: int = 1) -> List[AccessPoint]:
    """Center APs on a uniform ceiling grid, normals pointing down.

    AP (r, c) sits at ((c + 0.5)·w/cols, (r + 0.5)·d/rows, height); ids run
    row-major.

    Raises:
        ConfigurationError: If rows or cols is below 1.
    """
    if rows < 1 or cols < 1:
        raise ConfigurationError(
            f"AP grid needs at least one row and column, got {rows}x{cols}",
            rows=rows,
            cols=cols,
        )
    aps = []
    for r in range(rows):
        for c in range(cols):
            position = Vec3(
                x=(c + 0.5) * room.width / cols,
                y=(r + 0.5) * room.depth / rows,
                z=room.height,
            )
            aps.append(AccessPoint(id=r * cols + c, position=position, array_side=array_side))
    return aps


# ==================== Angles ====================


def photodiode_normal(detector: DetectorGeometry, m: int) -> Vec3:
    """Unit normal [sinθ cosα, sinθ sinα, cosθ] of photodiode *m*.

    Raises:
        IndexError: If m is outside 0..M-1.
    """
    if not 0 <= m < detector.num_photodiodes:
        raise IndexError(f"photodiode {m} out of range for M={detector.num_photodiodes}")
    theta = detector.elevations[m]
    alpha = detector.azimuths[m]
    return Vec3(
        x=float(np.sin(theta) * np.cos(alpha)),
        y=float(np.sin(theta) * np.sin(alpha)),
        z=float(np.cos(theta)),
    )


def photodiode_normals(detector: DetectorGeometry) -> np.ndarray:
    """All photodiode normals as an (M, 3) array."""
    theta = np.asarray(detector.elevations, dtype=float)
    alpha = np.asarray(detector.azimuths, dtype=float)
    return np.column_stack([np.sin(theta) * np.cos(alpha), np.sin(theta) * np.sin(alpha), np.cos(theta)])


def _link_vector(ap: AccessPoint, user: UserTerminal) -> tuple[np.ndarray, float]:
    d = user.position.as_array() - ap.position.as_array()
    dist = float(np.linalg.norm(d))
    if dist == 0.0:
        raise DegenerateGeometryError(
            f"User {user.id} coincides with AP {ap.id}",
            user=user.id,
            ap=ap.id,
        )
    return d, dist


def irradiance_angle(ap: AccessPoint, user: UserTerminal) -> float:
    """Angle between the AP normal and the AP-to-user direction, in [0, π]."""
    d, dist = _link_vector(ap, user)
    cos_phi = np.clip(np.dot(ap.orientation.as_array(), d) / dist, -1.0, 1.0)
    return float(np.arccos(cos_phi))


def incidence_angle(ap: AccessPoint, user: UserTerminal, m: int) -> float:
    """Angle between photodiode *m*'s normal and the user-to-AP direction."""
    normal = photodiode_normal(user.detector, m).as_array()
    d, dist = _link_vector(ap, user)
    cos_psi = np.clip(np.dot(normal, -d) / dist, -1.0, 1.0)
    return float(np.arccos(cos_psi))


@dataclass(frozen=True)
class LinkGeometry:
    """Per-link quantities for one user against every AP.

    distance: (L,), cos_phi: (L,), cos_psi: (M, L).
    """

    distance: np.ndarray
    cos_phi: np.ndarray
    cos_psi: np.ndarray


def link_geometry(aps: Sequence[AccessPoint], user: UserTerminal) -> LinkGeometry:
    """Vectorized irradiance/incidence cosines for one user.

    Raises:
        DegenerateGeometryError: If the user coincides with any AP.
    """
    positions = np.array([ap.position.as_array() for ap in aps])
    normals = np.array([ap.orientation.as_array() for ap in aps])
    d = user.position.as_array()[None, :] - positions
    dist = np.linalg.norm(d, axis=1)
    if np.any(dist == 0.0):
        ap = aps[int(np.argmin(dist))]
        raise DegenerateGeometryError(
            f"User {user.id} coincides with AP {ap.id}",
            user=user.id,
            ap=ap.id,
        )
    unit = d / dist[:, None]
    cos_phi = np.clip(np.einsum("lj,lj->l", normals, unit), -1.0, 1.0)
    cos_psi = np.clip(photodiode_normals(user.detector) @ (-unit).T, -1.0, 1.0)
    return LinkGeometry(distance=dist, cos_phi=cos_phi, cos_psi=cos_psi)


# ==================== Classification ====================


def _proximity_score(user: UserTerminal, aps: Sequence[AccessPoint]) -> float:
    """Stand-in for received power when no channel is available: Σ_l 1/‖d‖²."""
    positions = np.array([ap.position.as_array() for ap in aps])
    sq = np.sum((positions - user.position.as_array()[None, :]) ** 2, axis=1)
    return float(np.sum(1.0 / np.maximum(sq, 1e-18)))


def _virtual_user(template: UserTerminal, new_id: int, user_class: UserClass) -> UserTerminal:
    return UserTerminal(
        id=new_id,
        position=Vec3(x=0.0, y=0.0, z=template.position.z),
        detector=template.detector,
        user_class=user_class,
        is_virtual=True,
    )


def _labelled(users: Sequence[UserTerminal], user_class: UserClass) -> List[UserTerminal]:
    return [u.model_copy(update={"user_class": user_class}) for u in users]


def classify_users(
    users: Sequence[UserTerminal],
    aps: Sequence[AccessPoint],
    rule: Optional[ClassificationRule] = None,
    received_power: Optional[Mapping[int, float]] = None,
) -> Classification:
    """Split users into weak and strong classes.

    median_split ranks by aggregate received power (or a 1/d² proxy when
    *received_power* is not given), ties broken by ascending id so the lowest
    ids fall into the weak half. Odd K gets one virtual weak user.

    distance_threshold marks a user strong iff its distance to every AP is
    at most d_th. Unequal classes are padded with virtual users; an empty
    class is reported through ``warnings`` and left unpadded.

    Raises:
        ConfigurationError: If no users are given.
    """
    rule = rule or ClassificationRule()
    if not users:
        raise ConfigurationError("Cannot classify an empty user set")
    next_id = max(u.id for u in users) + 1
    template = users[0]

    if rule.kind == "median_split":
        if received_power is not None:
            scores = {u.id: float(received_power[u.id]) for u in users}
        else:
            scores = {u.id: _proximity_score(u, aps) for u in users}
        ranked = sorted(users, key=lambda u: (scores[u.id], u.id))
        n_weak = len(ranked) // 2
        weak = _labelled(ranked[:n_weak], UserClass.WEAK)
        strong = _labelled(ranked[n_weak:], UserClass.STRONG)
        if len(weak) < len(strong):
            weak.append(_virtual_user(template, next_id, UserClass.WEAK))
        weak.sort(key=lambda u: u.id)
        strong.sort(key=lambda u: u.id)
        return Classification(weak=weak, strong=strong, rule=rule.kind)

    positions = np.array([ap.position.as_array() for ap in aps])
    weak, strong = [], []
    for u in sorted(users, key=lambda u: u.id):
        dist = np.linalg.norm(positions - u.position.as_array()[None, :], axis=1)
        if np.all(dist <= rule.d_th):
            strong.append(u)
        else:
            weak.append(u)
    weak = _labelled(weak, UserClass.WEAK)
    strong = _labelled(strong, UserClass.STRONG)

    warnings = []
    if not weak or not strong:
        empty = "weak" if not weak else "strong"
        logger.warning(f"distance_threshold d_th={rule.d_th} left the {empty} class empty")
        warnings.append(f"empty_{empty}_class")
    else:
        while len(weak) < len(strong):
            weak.append(_virtual_user(template, next_id, UserClass.WEAK))
            next_id += 1
        while len(strong) < len(weak):
            strong.append(_virtual_user(template, next_id, UserClass.STRONG))
            next_id += 1
    return Classification(weak=weak, strong=strong, rule=rule.kind, warnings=warnings)
