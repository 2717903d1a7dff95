"""Channel model for the laser-based optical links.

Gaussian-beam propagation, per-link optical gains assembled into the L x L
per-user channel matrix, random link blockage, receiver noise and the
eye-safety cap on the transmit power per beam.
"""

import logging
import math
from typing import Optional, Sequence, Union

import numpy as np

from app.common.errors import ConfigurationError, DomainError
from app.features.geometry.schemas import AccessPoint, DetectorGeometry, UserTerminal
from app.features.geometry.service import link_geometry

from .schemas import BeamParams, ChannelMatrix, EyeSafetyParams, NoiseModel, OpticalFrontEnd

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


# ==================== Beam propagation ====================


def beam_waist_from_divergence(theta_fwhm: float, wavelength: float) -> float:
    """W_0 = λ/(π Θ_D) with Θ_D = Θ_F/√(2 ln 2)."""
    if theta_fwhm <= 0 or wavelength <= 0:
        raise DomainError("divergence and wavelength must be positive")
    return wavelength / (math.pi * theta_fwhm / math.sqrt(2.0 * math.log(2.0)))


def rayleigh_range(beam: BeamParams) -> float:
    return math.pi * beam.w0**2 * beam.refractive_index / beam.wavelength


def beam_radius(beam: BeamParams, d0: ArrayLike) -> ArrayLike:
    """Beam radius W(d0) = W_0 √(1 + (d0/d_Ra)²).

    Raises:
        DomainError: If any distance is negative.
    """
    d0_arr = np.asarray(d0, dtype=float)
    if np.any(d0_arr < 0):
        raise DomainError(f"beam distance must be non-negative, got {d0}")
    w = beam.w0 * np.sqrt(1.0 + (d0_arr / rayleigh_range(beam)) ** 2)
    return float(w) if np.ndim(w) == 0 else w


def intensity(beam: BeamParams, p_tr: float, r: ArrayLike, d0: float) -> ArrayLike:
    """Transverse intensity (W/m²) at radial offset *r* and axial distance *d0*."""
    w = beam_radius(beam, d0)
    r_arr = np.asarray(r, dtype=float)
    value = (2.0 * p_tr / (math.pi * w**2)) * np.exp(-2.0 * r_arr**2 / w**2)
    return float(value) if np.ndim(value) == 0 else value


def received_power_aligned(beam: BeamParams, p_tr: float, r_m: float, d0: float) -> float:
    """Power captured by a circular photodiode of radius *r_m* centered on the beam axis."""
    if math.isinf(r_m):
        return p_tr
    w = beam_radius(beam, d0)
    return p_tr * (1.0 - math.exp(-2.0 * r_m**2 / w**2))


# ==================== Channel gains ====================


def _gain_kernel(
    distance: np.ndarray,
    cos_phi: np.ndarray,
    cos_psi: np.ndarray,
    beam: BeamParams,
    detector: DetectorGeometry,
) -> np.ndarray:
    """Small-detector gain for arrays of link geometry (broadcasting)."""
    psi = np.arccos(cos_psi)
    d0 = np.maximum(distance * cos_phi, 0.0)
    w = beam_radius(beam, d0)
    sin2_phi = np.maximum(1.0 - cos_phi**2, 0.0)
    gain = (
        2.0 * cos_psi * detector.pd_area_physical * detector.pd_gain / (math.pi * w**2)
    ) * np.exp(-2.0 * distance**2 * sin2_phi / w**2)
    visible = (psi <= detector.fov) & (cos_phi > 0.0)
    return np.where(visible, gain, 0.0)


def channel_gain(
    ap: AccessPoint,
    user: UserTerminal,
    m: int,
    beam: BeamParams,
    detector: Optional[DetectorGeometry] = None,
) -> float:
    """Optical gain P_m/P_tr from *ap* to photodiode *m* of *user*.

    Zero when the photodiode is outside its field of view or the user lies
    behind the AP's emitting plane.
    """
    detector = detector or user.detector
    if not 0 <= m < detector.num_photodiodes:
        raise IndexError(f"photodiode {m} out of range for M={detector.num_photodiodes}")
    if detector is not user.detector:
        user = user.model_copy(update={"detector": detector})
    geo = link_geometry([ap], user)
    return float(_gain_kernel(geo.distance, geo.cos_phi, geo.cos_psi[m], beam, detector)[0])


def full_gain_matrix(
    user: UserTerminal,
    aps: Sequence[AccessPoint],
    beam: BeamParams,
) -> np.ndarray:
    """(M, L) gains of every photodiode against every AP."""
    geo = link_geometry(aps, user)
    return _gain_kernel(geo.distance[None, :], geo.cos_phi[None, :], geo.cos_psi, beam, user.detector)


def build_channel_matrix(
    user: UserTerminal,
    aps: Sequence[AccessPoint],
    beam: BeamParams,
    detector: Optional[DetectorGeometry] = None,
    blockage_mask: Optional[np.ndarray] = None,
) -> ChannelMatrix:
    """Assemble the L x L channel matrix of one user.

    When M > L the L photodiodes with the largest total gain become the
    reception modes (ties by index). Blocked AP columns are zeroed. A matrix
    with rank below L is flagged, not rejected. Virtual users get a zero
    matrix.

    Raises:
        ConfigurationError: If the detector has fewer photodiodes than APs.
    """
    num_aps = len(aps)
    detector = detector or user.detector
    if detector.num_photodiodes < num_aps:
        raise ConfigurationError(
            f"Detector has {detector.num_photodiodes} photodiodes, needs at least L={num_aps}",
            num_photodiodes=detector.num_photodiodes,
            num_aps=num_aps,
        )
    blocked = (
        np.zeros(num_aps, dtype=bool) if blockage_mask is None else np.asarray(blockage_mask, dtype=bool)
    )

    if user.is_virtual:
        return ChannelMatrix(
            user=user.id,
            gains=np.zeros((num_aps, num_aps)),
            blocked=blocked,
            modes=list(range(num_aps)),
            rank_deficient=True,
        )

    if detector is not user.detector:
        user = user.model_copy(update={"detector": detector})
    full = full_gain_matrix(user, aps, beam)
    full[:, blocked] = 0.0

    # Stable sort on the negated row sums keeps the lowest index on ties.
    order = np.argsort(-full.sum(axis=1), kind="stable")
    modes = sorted(int(m) for m in order[:num_aps])
    gains = full[modes, :]

    rank = int(np.linalg.matrix_rank(gains)) if np.any(gains) else 0
    if rank < num_aps:
        logger.debug(f"User {user.id}: channel rank {rank} < L={num_aps}")
    return ChannelMatrix(
        user=user.id,
        gains=gains,
        blocked=blocked,
        modes=modes,
        rank_deficient=rank < num_aps,
    )


def apply_blockage(rng: np.random.Generator, p_block: float, num_users: int, num_aps: int) -> np.ndarray:
    """Independent Bernoulli(p_block) blockage per (user, AP) link, shape (K, L).

    Raises:
        DomainError: If p_block is outside [0, 1].
    """
    if not 0.0 <= p_block <= 1.0:
        raise DomainError(f"blockage probability must lie in [0, 1], got {p_block}")
    return rng.random((num_users, num_aps)) < p_block


# ==================== Power and noise ====================


def ap_power(per_vcsel: float, array_side: int) -> float:
    """P_l = L_v² · P_tr: every VCSEL of the array emits the same power."""
    return per_vcsel * array_side**2


def aggregate_received_power(channel: Union[ChannelMatrix, np.ndarray], ap_powers: np.ndarray) -> float:
    """Mean over reception modes of Σ_l H[m, l] · P_l (W)."""
    gains = channel.gains if isinstance(channel, ChannelMatrix) else np.asarray(channel)
    return float(np.mean(gains @ np.asarray(ap_powers, dtype=float)))


def noise_variance(front_end: OpticalFrontEnd, noise: NoiseModel, received_optical_power: float) -> float:
    """Receiver noise variance σ_z² (A²).

    Composite mode sums shot, thermal and laser RIN contributions over the
    bandwidth; fixed mode returns the configured value.
    """
    if received_optical_power < 0:
        raise DomainError("received optical power must be non-negative")
    if noise.mode == "fixed_sigma":
        assert noise.sigma2 is not None
        return noise.sigma2
    photocurrent = front_end.responsivity * received_optical_power
    shot = 2.0 * noise.electron_charge * photocurrent
    rin = 10.0 ** (noise.rin_db_per_hz / 10.0) * photocurrent**2
    return (shot + noise.thermal_psd + rin) * front_end.bandwidth


# ==================== Eye safety ====================


def _aperture_fraction(beam: BeamParams, safety: EyeSafetyParams) -> float:
    w_h = beam_radius(beam, safety.hazard_distance)
    if w_h <= 0:
        raise DomainError("beam radius at the hazard distance is zero")
    return 1.0 - math.exp(-(safety.cornea_diameter**2) / (2.0 * w_h**2))


def exposure_level(beam: BeamParams, p_tr: float, safety: EyeSafetyParams) -> float:
    """Mean irradiance over the cornea at the hazard distance (W/m²)."""
    pupil = math.pi * (safety.cornea_diameter / 2.0) ** 2
    return p_tr / pupil * _aperture_fraction(beam, safety)


def max_safe_power(beam: BeamParams, safety: EyeSafetyParams) -> float:
    """Largest per-beam power whose exposure equals the limit (inverse of exposure_level)."""
    pupil = math.pi * (safety.cornea_diameter / 2.0) ** 2
    return safety.exposure_limit * pupil / _aperture_fraction(beam, safety)


def per_vcsel_power(beam: BeamParams, safety: EyeSafetyParams) -> float:
    """Eye-safe power per VCSEL clipped to the drive range [P_L, P_H].

    Raises:
        DomainError: If even P_L would exceed the exposure limit.
    """
    safe = max_safe_power(beam, safety)
    if safe < safety.power_low:
        raise DomainError(
            f"Eye-safe power {safe:.3e} W is below the minimum drive power {safety.power_low:.3e} W",
            safe_power=safe,
            power_low=safety.power_low,
        )
    return min(safe, safety.power_high)


def check_modulation_depth(safety: EyeSafetyParams, amplitude: Optional[float] = None) -> float:
    """Return the drive headroom; raise if *amplitude* would clip.

    Raises:
        DomainError: If the amplitude exceeds min(I^Dc - I_L, I_H - I^Dc).
    """
    headroom = safety.modulation_headroom
    amplitude = safety.modulation_amplitude if amplitude is None else amplitude
    if amplitude > headroom:
        raise DomainError(
            f"Modulation amplitude {amplitude} A exceeds headroom {headroom} A",
            amplitude=amplitude,
            headroom=headroom,
        )
    return headroom
