"""Brute-force references for the allocator.

These enumerate instead of optimizing and are only meant for small
instances: tests and the ``oracle`` command compare the solver against them.
"""

import itertools
import math
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from app.features.noma_rate.service import GroupRateModel

from .schemas import GroupSolution, PowerLevels, QoSBounds, SolverConfig
from .service import (
    discretize,
    feasible_interval,
    floor_to_level,
    solve_group,
    strong_power,
    weak_demand,
)


def grid_search_group(
    model: GroupRateModel,
    budget: float,
    qos: QoSBounds,
    points: int = 10_000,
    cfg: Optional[SolverConfig] = None,
    p_max: Optional[float] = None,
) -> Optional[Tuple[float, float, float]]:
    """Best (p_w, p_s, sum rate) over an even grid of weak-user powers.

    The strong user's power and the weak user's demand follow the same rules
    as solve_group; the grid spans the powers meeting the demand and r_max
    and the winner has the largest rate per watt. Returns None when no
    power meets the bounds.
    """
    cfg = cfg or SolverConfig()
    if model.weak_dark:
        p_s = strong_power(model, qos, budget, 0.0) if qos.r_min <= 0 else None
        return None if p_s is None else (0.0, p_s, model.rate_strong(p_s))
    lo = qos.p_s_threshold + cfg.delta_rel * (p_max if p_max is not None else budget)
    if budget < lo:
        return None
    p_s = strong_power(model, qos, budget, lo)
    if p_s is None:
        return None
    hi = budget - p_s
    if math.isfinite(qos.r_max) and model.rate_weak(lo, p_s) > qos.r_max + 1e-12:
        return None
    demand = weak_demand(model, qos, p_s, hi, cfg)
    if demand is None:
        return None
    bounds = feasible_interval(model, qos, p_s, lo, hi, demand)

    grid = np.linspace(bounds.lower, bounds.upper, points)
    gamma = model.k * grid / (model.k * p_s + model.sigma2_w)
    r_w = model.prelog * np.log2(1.0 + gamma[:, None] * model.eig_w[None, :]).sum(axis=1)
    r_s = model.prelog * float(np.log2(1.0 + model.k * p_s / model.sigma2_s * model.eig_s).sum())
    best = int(np.argmax((r_w + r_s) / (grid + p_s)))
    return float(grid[best]), p_s, float(r_w[best] + r_s)


def _sequential_total(
    order: Sequence[int],
    choice: Sequence[int],
    t: int,
    levels: PowerLevels,
    solutions: Dict[Tuple[int, int], GroupSolution],
) -> float:
    """Total rate of serving *order* in sequence at the chosen levels, starting from level t."""
    remaining: Optional[int] = t
    total = 0.0
    for n, (g, t_g) in enumerate(zip(order, choice)):
        if remaining is None or t_g > remaining:
            return -math.inf
        sol = solutions[(g, t_g)]
        if not sol.feasible:
            return -math.inf
        total += sol.rate
        remaining = floor_to_level(levels.level(remaining) - sol.consumed, levels)
        if remaining is None and n < len(choice) - 1:
            return -math.inf
    return total


def exhaustive_split(
    order: Sequence[int],
    levels: PowerLevels,
    solutions: Dict[Tuple[int, int], GroupSolution],
) -> np.ndarray:
    """Best total for every (G', t) by enumerating all per-group level choices.

    The recursion peels the last of the first G' groups off the full
    budget, so groups are served here in reverse order to match.
    """
    G, T = len(order), levels.T
    table = np.full((G, T), -np.inf)
    for n in range(1, G + 1):
        served = list(reversed(order[:n]))
        for t in range(1, T + 1):
            for choice in itertools.product(range(1, t + 1), repeat=n):
                table[n - 1, t - 1] = max(
                    table[n - 1, t - 1], _sequential_total(served, choice, t, levels, solutions)
                )
    return table


def exhaustive_network(
    weak_ids: Sequence[int],
    strong_ids: Sequence[int],
    make_model: Callable[[int, int], GroupRateModel],
    p_max: float,
    qos: QoSBounds,
    T: int,
    cfg: Optional[SolverConfig] = None,
) -> Tuple[float, Tuple[Tuple[int, int], ...]]:
    """Joint search over pairings, group orders and level choices, serving every group.

    Returns the best network rate and the pairing achieving it.
    """
    cfg = cfg or SolverConfig()
    levels = discretize(p_max, T)
    G = len(weak_ids)
    best_rate, best_pairs = -math.inf, tuple()
    for perm in itertools.permutations(strong_ids):
        pairs = tuple(zip(weak_ids, perm))
        solutions = {}
        for g, (i, j) in enumerate(pairs):
            model = make_model(i, j)
            for t in range(1, T + 1):
                solutions[(g, t)] = solve_group(g, model, levels.level(t), qos, cfg, p_max=p_max)
        for order in itertools.permutations(range(G)):
            for choice in itertools.product(range(1, T + 1), repeat=G):
                total = _sequential_total(order, choice, T, levels, solutions)
                if total > best_rate:
                    best_rate, best_pairs = total, pairs
    return best_rate, best_pairs
