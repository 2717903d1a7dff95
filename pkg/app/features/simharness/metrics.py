"""Network metrics and ensemble statistics.

    - jain_fairness: (Σr)² / (K·Σr²)
    - energy_efficiency: bits per joule of consumed power
    - bootstrap_slope: trend of per-point means with a 95% percentile interval
    - bootstrap_ordering: paired mean difference between two schemes
"""

import logging
from typing import Optional, Sequence

import numpy as np

from app.common.errors import DomainError

from .schemas import SlopeEstimate

logger = logging.getLogger(__name__)

DEFAULT_RESAMPLES = 1000


def jain_fairness(rates: Sequence[float]) -> float:
    """Jain's index of per-user rates; all-zero rates give 0.

    Raises:
        DomainError: If *rates* is empty or has a negative or non-finite entry.
    """
    r = np.asarray(rates, dtype=float)
    if r.size == 0:
        raise DomainError("Jain fairness needs at least one rate")
    if not np.all(np.isfinite(r)) or np.any(r < 0):
        raise DomainError("rates must be finite and non-negative", rates=r.tolist())
    total_sq = float(np.sum(r**2))
    if total_sq == 0.0:
        return 0.0
    # Clip float drift above 1 for equal rates.
    return min(1.0, float(np.sum(r)) ** 2 / (r.size * total_sq))


def energy_efficiency(sum_rate_bps: float, consumed_power: float) -> float:
    """Sum rate in bits/s over consumed power in W.

    Raises:
        DomainError: If power is negative, or zero while the rate is not.
    """
    if consumed_power < 0 or sum_rate_bps < 0:
        raise DomainError("rate and power must be non-negative")
    if consumed_power == 0.0:
        if sum_rate_bps == 0.0:
            return 0.0
        raise DomainError("positive rate with zero consumed power", sum_rate_bps=sum_rate_bps)
    return sum_rate_bps / consumed_power


def bootstrap_slope(
    x: Sequence[float],
    samples: Sequence[Sequence[float]],
    resamples: int = DEFAULT_RESAMPLES,
    rng: Optional[np.random.Generator] = None,
) -> SlopeEstimate:
    """Slope of mean(samples[i]) against x[i], with a 95% bootstrap interval.

    Each resample redraws every point's samples with replacement and refits
    the line.
    """
    if len(x) < 2 or len(x) != len(samples):
        raise DomainError("need at least two points and one sample list per point")
    rng = rng or np.random.default_rng(0)
    xs = np.asarray(x, dtype=float)
    groups = [np.asarray(s, dtype=float) for s in samples]
    slope = float(np.polyfit(xs, [g.mean() for g in groups], 1)[0])

    boot = np.empty(resamples)
    for b in range(resamples):
        means = [g[rng.integers(0, g.size, g.size)].mean() for g in groups]
        boot[b] = np.polyfit(xs, means, 1)[0]
    low, high = np.percentile(boot, [2.5, 97.5])
    logger.debug(f"bootstrap slope {slope:.4g} [{low:.4g}, {high:.4g}]")
    return SlopeEstimate(slope=slope, low=float(low), high=float(high), resamples=resamples)


def bootstrap_ordering(
    a: Sequence[float],
    b: Sequence[float],
    resamples: int = DEFAULT_RESAMPLES,
    rng: Optional[np.random.Generator] = None,
) -> SlopeEstimate:
    """Mean of the paired difference a - b over drops with a 95% interval.

    Returned as a SlopeEstimate whose ``slope`` is the mean difference, so
    ``low >= 0`` reads as "a is not worse than b".
    """
    diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    if diff.size == 0:
        raise DomainError("need at least one paired sample")
    rng = rng or np.random.default_rng(0)
    idx = rng.integers(0, diff.size, (resamples, diff.size))
    boot = diff[idx].mean(axis=1)
    low, high = np.percentile(boot, [2.5, 97.5])
    return SlopeEstimate(slope=float(diff.mean()), low=float(low), high=float(high), resamples=resamples)
