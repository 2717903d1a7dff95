"""Brute-force equivalence suites run by the ``oracle`` command.

Each suite draws small random instances from a seeded generator and
returns a Report listing every instance where the fast path and the
reference disagree.
"""

import logging
import math
from fractions import Fraction
from typing import List, Optional

import numpy as np

from app.common.reports import Report, Violation, build_report
from app.features.grouping.schemas import WeightMatrix
from app.features.grouping.service import brute_force_matching, optimal_matching
from app.features.noma_rate.service import GroupRateModel, noise_covariance
from app.features.power_alloc.oracles import exhaustive_split, grid_search_group
from app.features.power_alloc.schemas import QoSBounds, SolverConfig
from app.features.power_alloc.service import DynamicPowerAllocator, discretize, dp_combine, solve_group

logger = logging.getLogger(__name__)


# ==================== Instance generators ====================


def random_weight_matrix(rng: np.random.Generator, n: int) -> WeightMatrix:
    xy = rng.uniform(0.0, 8.0, (2 * n, 2))
    weights = np.linalg.norm(xy[:n, None, :] - xy[None, n:, :], axis=2)
    return WeightMatrix(weights=weights, strong_ids=list(range(n)), weak_ids=list(range(n, 2 * n)))


def random_rate_model(
    rng: np.random.Generator,
    L: int = 2,
    G: int = 2,
    sigma2: float = 1e-12,
) -> GroupRateModel:
    """Pair with gains around 1e-4 (strong user about 3x the weak one)."""
    H_w = rng.uniform(0.0, 1e-4, (L, L))
    H_s = rng.uniform(0.0, 3e-4, (L, L))
    return GroupRateModel(
        H_w, H_s, sigma2, sigma2,
        b=Fraction(1, L + G - 1),
        Rz=noise_covariance(G, L, 1.0),
    )


def random_qos(rng: np.random.Generator) -> QoSBounds:
    r_max = math.inf if rng.random() < 0.3 else float(rng.uniform(0.3, 2.0))
    return QoSBounds(r_min=0.0, r_max=r_max, p_s_threshold=float(rng.uniform(0.005, 0.02)))


# ==================== Suites ====================


def check_matching(rng: np.random.Generator, instances: int = 100, max_size: int = 7) -> Report:
    violations = []
    for k in range(instances):
        W = random_weight_matrix(rng, int(rng.integers(1, max_size + 1)))
        fast, slow = optimal_matching(W), brute_force_matching(W)
        if not math.isclose(fast.total_weight, slow.total_weight, rel_tol=1e-12, abs_tol=1e-12):
            violations.append(
                Violation(
                    rule="matching_optimum",
                    message=f"matching {fast.total_weight} != brute force {slow.total_weight}",
                    location={"instance": k},
                )
            )
    return build_report(violations, data={"instances": instances}, subject="matching")


def check_group_solver(
    rng: np.random.Generator,
    instances: int = 50,
    rel_tol: float = 1e-3,
    cfg: Optional[SolverConfig] = None,
) -> Report:
    cfg = cfg or SolverConfig()
    violations = []
    for k in range(instances):
        model = random_rate_model(rng)
        qos = random_qos(rng)
        budget = float(rng.uniform(0.05, 0.5))
        sol = solve_group(0, model, budget, qos, cfg)
        grid = grid_search_group(model, budget, qos, cfg=cfg, p_max=budget)
        location = {"instance": k, "budget": budget}
        if grid is None or not sol.feasible:
            if (grid is None) != (not sol.feasible):
                violations.append(Violation(rule="feasibility", message=f"solver {sol.reason}, grid {grid}", location=location))
            continue
        if abs(sol.rate - grid[2]) > rel_tol * max(1.0, abs(grid[2])):
            violations.append(
                Violation(rule="group_optimum", message=f"solver {sol.rate:.6g} vs grid {grid[2]:.6g}", location=location)
            )
        if abs(sol.residual) > cfg.tol:
            violations.append(Violation(rule="residual", message=f"|L(xi)| = {abs(sol.residual):.3e}", location=location))
        if abs(sol.stationarity) > 1e-4 * (sol.xi + 1e-12):
            violations.append(
                Violation(rule="stationarity", message=f"dL/dp_w = {sol.stationarity:.3e} at xi {sol.xi:.6g}", location=location)
            )
        if any(v < 0 for v in sol.multipliers.values()):
            violations.append(Violation(rule="multipliers", message=f"negative multiplier {sol.multipliers}", location=location))
    return build_report(violations, data={"instances": instances}, subject="group solver")


def check_dp(rng: np.random.Generator, instances: int = 10, rel_tol: float = 1e-6) -> Report:
    violations = []
    for k in range(instances):
        G = int(rng.integers(1, 4))
        T = int(rng.integers(2, 9))
        p_max = float(rng.uniform(0.1, 0.5))
        qos = random_qos(rng)
        models = [random_rate_model(rng, G=G) for _ in range(G)]
        levels = discretize(p_max, T)
        solutions = DynamicPowerAllocator(qos, T=T).solve_all(models, levels)
        order = [int(g) for g in rng.permutation(G)]
        tables = dp_combine(order, levels, solutions)
        reference = exhaustive_split(order, levels, solutions)

        same_support = np.array_equal(np.isfinite(tables.R_full), np.isfinite(reference))
        finite = np.isfinite(reference)
        close = np.allclose(tables.R_full[finite], reference[finite], rtol=rel_tol, atol=1e-12)
        if not (same_support and close):
            violations.append(
                Violation(rule="dp_optimum", message="DP table differs from exhaustive split", location={"instance": k, "G": G, "T": T})
            )
    return build_report(violations, data={"instances": instances}, subject="budget split")


def run_oracles(seed: int = 0, scale: float = 1.0) -> List[Report]:
    """All suites; *scale* shrinks or grows the instance counts."""
    rng = np.random.default_rng(seed)
    counts = [max(1, int(round(n * scale))) for n in (100, 50, 10)]
    reports = [
        check_matching(rng, counts[0]),
        check_group_solver(rng, counts[1]),
        check_dp(rng, counts[2]),
    ]
    for report in reports:
        logger.info(report.details)
    return reports
