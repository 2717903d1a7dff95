"""Achievable rates of weak/strong user pairs under a BIA outer precoder.

The weak user decodes its symbol treating the strong user's as noise; the
strong user removes the weak user's symbol first (perfect SIC). Each rate
is a prelog times log2 det(I + γ H Hᵀ Rz⁻¹).
"""

import logging
import math
from fractions import Fraction
from typing import Optional, Tuple, Union

import numpy as np

from app.common.errors import DomainError, NumericError
from app.common.instrumentation import EvaluationCounter
from app.features.bia.service import alignment_ratio
from app.features.channel.schemas import ChannelMatrix, OpticalFrontEnd

from .schemas import NoiseCovariance, PowerPair, RateResult

logger = logging.getLogger(__name__)

# Gaussian-input constant c = 1/(2πe) of the optical intensity channel.
C_FACTOR = 1.0 / (2.0 * math.pi * math.e)

Matrix = Union[ChannelMatrix, np.ndarray]


def _gains(H: Matrix) -> np.ndarray:
    return H.gains if isinstance(H, ChannelMatrix) else np.atleast_2d(np.asarray(H, dtype=float))


def signal_scale(front_end: OpticalFrontEnd) -> float:
    """c·ρ²·f², the factor converting electrical power into SINR numerators."""
    return C_FACTOR * front_end.conversion_factor**2 * front_end.responsivity**2


def sinr(pair: PowerPair, front_end: OpticalFrontEnd, sigma2: float) -> Tuple[float, float]:
    """(γ_weak, γ_strong) of a pair.

    Raises:
        DomainError: If sigma2 is not positive.
    """
    if sigma2 <= 0:
        raise DomainError(f"noise variance must be positive, got {sigma2}")
    k = signal_scale(front_end)
    gamma_w = k * pair.p_w / (k * pair.p_s + sigma2)
    gamma_s = k * pair.p_s / sigma2
    return gamma_w, gamma_s


def noise_covariance(G: int, L: int, sigma2: float) -> NoiseCovariance:
    """diag(G, 1, ..., 1)·σ²: the first slot of each alignment block also
    carries the noise of G-1 subtracted interference measurements."""
    if G < 1:
        raise DomainError(f"noise covariance needs G >= 1, got {G}")
    diag = np.ones(L)
    diag[0] = G
    return NoiseCovariance(matrix=np.diag(diag) * sigma2)


def whitened_eigenvalues(H: Matrix, Rz: NoiseCovariance) -> np.ndarray:
    """Eigenvalues of Rz^(-1/2) H Hᵀ Rz^(-T/2), clipped at zero.

    Raises:
        NumericError: If Rz is not positive definite or shapes disagree.
    """
    gains = _gains(H)
    if gains.shape[0] != Rz.size:
        raise NumericError(
            f"channel has {gains.shape[0]} modes but noise covariance is {Rz.size}x{Rz.size}",
        )
    try:
        chol = np.linalg.cholesky(Rz.matrix)
    except np.linalg.LinAlgError as e:
        raise NumericError(f"noise covariance is not positive definite: {e}") from e
    whitened = np.linalg.solve(chol, gains)
    return np.clip(np.linalg.eigvalsh(whitened @ whitened.T), 0.0, None)


def user_rate(H: Matrix, gamma: float, Rz: NoiseCovariance, b: Union[Fraction, float]) -> float:
    """b·log2 det(I + γ H Hᵀ Rz⁻¹) in bits/s/Hz."""
    if gamma < 0:
        raise DomainError(f"SINR must be non-negative, got {gamma}")
    if gamma == 0:
        return 0.0
    eig = whitened_eigenvalues(H, Rz)
    return float(b) * float(np.sum(np.log2(1.0 + gamma * eig)))


class GroupRateModel:
    """Rate functions of one pair with the channel work done once.

    The strong user's interference power enters only the weak user's SINR.
    Every rate evaluation ticks the optional counter.
    """

    def __init__(
        self,
        H_weak: Matrix,
        H_strong: Matrix,
        sigma2_w: float,
        sigma2_s: float,
        b: Union[Fraction, float],
        Rz: NoiseCovariance,
        front_end: Optional[OpticalFrontEnd] = None,
        counter: Optional[EvaluationCounter] = None,
    ):
        if sigma2_w <= 0 or sigma2_s <= 0:
            raise DomainError("noise variances must be positive")
        self.front_end = front_end or OpticalFrontEnd()
        self.k = signal_scale(self.front_end)
        self.sigma2_w = sigma2_w
        self.sigma2_s = sigma2_s
        self.b = b
        self.prelog = float(b)
        self.Rz = Rz
        self.counter = counter
        self.eig_w = whitened_eigenvalues(H_weak, Rz)
        self.eig_s = whitened_eigenvalues(H_strong, Rz)

    def _tick(self) -> None:
        if self.counter is not None:
            self.counter.tick("rate")

    def gamma_weak(self, p_w: float, p_s: float) -> float:
        return self.k * p_w / (self.k * p_s + self.sigma2_w)

    def gamma_strong(self, p_s: float) -> float:
        return self.k * p_s / self.sigma2_s

    def rate_weak(self, p_w: float, p_s: float) -> float:
        self._tick()
        g = self.gamma_weak(p_w, p_s)
        return self.prelog * float(np.sum(np.log2(1.0 + g * self.eig_w)))

    def rate_strong(self, p_s: float) -> float:
        self._tick()
        g = self.gamma_strong(p_s)
        return self.prelog * float(np.sum(np.log2(1.0 + g * self.eig_s)))

    def d_rate_weak(self, p_w: float, p_s: float) -> float:
        """∂R_w/∂p_w."""
        self._tick()
        g = self.gamma_weak(p_w, p_s)
        dg = self.k / (self.k * p_s + self.sigma2_w)
        return self.prelog * float(np.sum(self.eig_w / (1.0 + g * self.eig_w))) * dg / math.log(2.0)

    @property
    def weak_dark(self) -> bool:
        """True when no eigenmode carries the weak user's signal."""
        return not bool(np.any(self.eig_w > 0))

    def sum_rate(self, p_w: float, p_s: float) -> float:
        return self.rate_weak(p_w, p_s) + self.rate_strong(p_s)

    def result(self, p_w: float, p_s: float) -> RateResult:
        return RateResult(
            rate_weak=self.rate_weak(p_w, p_s),
            rate_strong=self.rate_strong(p_s),
            b_ratio=self.b if isinstance(self.b, Fraction) else Fraction(self.b).limit_denominator(),
            sinr_weak=self.gamma_weak(p_w, p_s),
            sinr_strong=self.gamma_strong(p_s),
        )


def group_sum_rate(
    pair: PowerPair,
    H_weak: Matrix,
    H_strong: Matrix,
    G: int,
    L: int,
    sigma2_w: float,
    sigma2_s: float,
    front_end: Optional[OpticalFrontEnd] = None,
) -> RateResult:
    """Weak plus strong rate of a pair sharing the BIA prelog 1/(L+G-1).

    Both rates use the covariance in units of σ², since γ already divides
    by σ².
    """
    model = GroupRateModel(
        H_weak,
        H_strong,
        sigma2_w,
        sigma2_s,
        b=alignment_ratio(L, G),
        Rz=noise_covariance(G, L, 1.0),
        front_end=front_end,
    )
    return model.result(pair.p_w, pair.p_s)
