"""Comparison schemes.

    - dynamic_noma: distance-based grouping, BIA outer precoder, dynamic power
    - baseline1: same groups and precoder, fixed budget P_max/G per group
    - baseline2: same groups and dynamic power, orthogonal 1/G sharing on the
      best single photodiode instead of BIA
    - conventional_noma: gain-sorted pairing, fixed 0.8/0.2 split, 1/G sharing
    - plain_bia: BIA over all K users, no NOMA, equal power
"""

import logging
from fractions import Fraction
from typing import Dict, List, Optional, Type

import numpy as np

from app.common.errors import InfeasibleNetworkError
from app.common.service import Scheme
from app.features.bia.service import alignment_ratio
from app.features.channel.service import aggregate_received_power
from app.features.noma_rate.schemas import NoiseCovariance
from app.features.noma_rate.service import (
    GroupRateModel,
    noise_covariance,
    signal_scale,
    user_rate,
)
from app.features.power_alloc.service import DynamicPowerAllocator, solve_group

from .schemas import DropContext, SchemeId, SchemeOutcome

logger = logging.getLogger(__name__)

_SCALAR_RZ = NoiseCovariance(matrix=np.eye(1))


def scalar_channel(gains: np.ndarray) -> np.ndarray:
    """1x1 channel of the best photodiode: h = Σ_l H[m*, l], m* = argmax_m Σ_l H[m, l]."""
    row_sums = np.asarray(gains).sum(axis=1)
    return np.array([[row_sums[int(np.argmax(row_sums))]]])


def bia_group_models(drop: DropContext) -> List[GroupRateModel]:
    """One rate model per assigned pair, sharing the BIA prelog 1/(L+G-1)."""
    assert drop.assignment is not None
    G, L = drop.assignment.num_groups, drop.num_aps
    b = alignment_ratio(L, G)
    Rz = noise_covariance(G, L, 1.0)
    return [
        GroupRateModel(
            drop.channels[i], drop.channels[j], drop.sigma2[i], drop.sigma2[j],
            b=b, Rz=Rz, front_end=drop.front_end,
        )
        for i, j in drop.assignment.pairs
    ]


def _scalar_models(drop: DropContext, pairs) -> List[GroupRateModel]:
    b = Fraction(1, len(pairs))
    return [
        GroupRateModel(
            scalar_channel(drop.channels[i].gains), scalar_channel(drop.channels[j].gains),
            drop.sigma2[i], drop.sigma2[j],
            b=b, Rz=_SCALAR_RZ, front_end=drop.front_end,
        )
        for i, j in pairs
    ]


def _pair_user_ids(pairs) -> List[int]:
    ids = []
    for i, j in pairs:
        ids.extend([i, j])
    return ids


def _real_outcome(
    scheme: SchemeId,
    drop: DropContext,
    rates_by_id: Dict[int, float],
    consumed: float,
    groups_served: int = 0,
    t_star: int = 0,
    flags: Optional[List[str]] = None,
) -> SchemeOutcome:
    ids = drop.real_ids
    return SchemeOutcome(
        scheme=scheme,
        user_ids=ids,
        rates=[float(rates_by_id.get(u, 0.0)) for u in ids],
        consumed_power=max(consumed, 0.0),
        groups_served=groups_served,
        t_star=t_star,
        flags=list(flags or []),
    )


class _DynamicAllocationScheme(Scheme):
    """Shared path of the schemes that run the full dynamic allocator."""

    def _models(self, drop: DropContext) -> List[GroupRateModel]:
        raise NotImplementedError

    def evaluate(self, drop: DropContext) -> SchemeOutcome:
        scheme = SchemeId(self.scheme_id)
        assert drop.assignment is not None
        pairs = drop.assignment.pairs
        allocator = DynamicPowerAllocator(drop.qos, T=drop.T, cfg=drop.solver)
        try:
            solution = allocator.allocate(
                self._models(drop),
                drop.p_max,
                rng=np.random.default_rng(drop.order_seed),
                user_ids=_pair_user_ids(pairs),
            )
        except InfeasibleNetworkError as e:
            logger.warning(f"{scheme.value}: {e.message}")
            return _real_outcome(scheme, drop, {}, 0.0, flags=["infeasible_network"])

        rates = dict(zip(_pair_user_ids(pairs), solution.user_rates.tolist()))
        return _real_outcome(
            scheme, drop, rates, solution.consumed,
            groups_served=solution.groups_served, t_star=solution.t_star,
        )


class DynamicNoma(_DynamicAllocationScheme):
    scheme_id = SchemeId.DYNAMIC_NOMA.value

    def _models(self, drop: DropContext) -> List[GroupRateModel]:
        return bia_group_models(drop)


class Baseline2(_DynamicAllocationScheme):
    scheme_id = SchemeId.BASELINE2.value

    def _models(self, drop: DropContext) -> List[GroupRateModel]:
        assert drop.assignment is not None
        return _scalar_models(drop, drop.assignment.pairs)


class Baseline1(Scheme):
    """Each group solved alone with the fixed budget P_max/G."""

    scheme_id = SchemeId.BASELINE1.value

    def evaluate(self, drop: DropContext) -> SchemeOutcome:
        assert drop.assignment is not None
        pairs = drop.assignment.pairs
        budget = drop.p_max / len(pairs)
        rates: Dict[int, float] = {}
        consumed, served, flags = 0.0, 0, []
        for g, (model, (i, j)) in enumerate(zip(bia_group_models(drop), pairs)):
            sol = solve_group(g, model, budget, drop.qos, drop.solver, p_max=drop.p_max)
            if not sol.feasible:
                logger.warning(f"baseline1: group {g} infeasible ({sol.reason})")
                flags.append(f"infeasible_group_{g}")
                continue
            rates[i], rates[j] = sol.rate_weak, sol.rate_strong
            consumed += sol.consumed
            served += 1
        return _real_outcome(SchemeId.BASELINE1, drop, rates, consumed, groups_served=served, flags=flags)


class ConventionalNoma(Scheme):
    """Best-with-worst pairing by aggregate gain and a fixed power split."""

    scheme_id = SchemeId.CONVENTIONAL_NOMA.value

    def pairs(self, drop: DropContext) -> List[tuple]:
        score = {u.id: aggregate_received_power(drop.channels[u.id], drop.ap_powers) for u in drop.users}
        ranked = sorted(drop.real_ids, key=lambda u: (-score[u], u))
        pairs = []
        lo, hi = 0, len(ranked) - 1
        while lo < hi:
            pairs.append((ranked[hi], ranked[lo]))
            lo, hi = lo + 1, hi - 1
        if lo == hi:
            # Odd K: the middle user is served as a strong user with an empty weak slot.
            pairs.append((None, ranked[lo]))
        return pairs

    def evaluate(self, drop: DropContext) -> SchemeOutcome:
        pairs = self.pairs(drop)
        G = len(pairs)
        budget = drop.p_max / G
        p_w = drop.baselines.beta_weak * budget
        p_s = drop.baselines.beta_strong * budget
        b = Fraction(1, G)
        k = signal_scale(drop.front_end)
        rates: Dict[int, float] = {}
        consumed = 0.0
        for i, j in pairs:
            h_s = scalar_channel(drop.channels[j].gains)
            if i is None:
                rates[j] = user_rate(h_s, k * p_s / drop.sigma2[j], _SCALAR_RZ, b)
                consumed += p_s
                continue
            model = GroupRateModel(
                scalar_channel(drop.channels[i].gains), h_s, drop.sigma2[i], drop.sigma2[j],
                b=b, Rz=_SCALAR_RZ, front_end=drop.front_end,
            )
            rates[i] = model.rate_weak(p_w, p_s)
            rates[j] = model.rate_strong(p_s)
            consumed += p_w + p_s
        return _real_outcome(SchemeId.CONVENTIONAL_NOMA, drop, rates, consumed, groups_served=G)


class PlainBia(Scheme):
    """BIA across K individual users with equal power and no superposition."""

    scheme_id = SchemeId.PLAIN_BIA.value

    def evaluate(self, drop: DropContext) -> SchemeOutcome:
        K, L = len(drop.users), drop.num_aps
        b = alignment_ratio(L, K)
        Rz = noise_covariance(K, L, 1.0)
        power = drop.p_max / K
        k = signal_scale(drop.front_end)
        rates = {
            u.id: user_rate(drop.channels[u.id], k * power / drop.sigma2[u.id], Rz, b)
            for u in drop.users
        }
        return _real_outcome(SchemeId.PLAIN_BIA, drop, rates, drop.p_max, groups_served=K)


SCHEMES: Dict[SchemeId, Type[Scheme]] = {
    SchemeId.DYNAMIC_NOMA: DynamicNoma,
    SchemeId.BASELINE1: Baseline1,
    SchemeId.BASELINE2: Baseline2,
    SchemeId.CONVENTIONAL_NOMA: ConventionalNoma,
    SchemeId.PLAIN_BIA: PlainBia,
}


def get_scheme(scheme_id: SchemeId) -> Scheme:
    return SCHEMES[SchemeId(scheme_id)]()


def baseline1(drop: DropContext) -> SchemeOutcome:
    return Baseline1().evaluate(drop)


def baseline2(drop: DropContext) -> SchemeOutcome:
    return Baseline2().evaluate(drop)


def conventional_noma(drop: DropContext) -> SchemeOutcome:
    return ConventionalNoma().evaluate(drop)


def plain_bia(drop: DropContext) -> SchemeOutcome:
    return PlainBia().evaluate(drop)
