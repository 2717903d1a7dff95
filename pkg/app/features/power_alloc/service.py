"""Dynamic power allocation.

Provides:
    - discretize / floor_to_level: the shared budget grid
    - solve_group: one pair at a budget; the weak user's demand sets a rate
      floor and dinkelbach_iterate (parametric outer loop, Lagrangian inner
      loop) picks the best rate per watt above it
    - dp_combine: the recursion over groups and budget levels
    - select_solution: the network cell maximizing the sum rate, preferring
      more groups and then less power on ties
    - DynamicPowerAllocator: the full pipeline for one drop
"""

import logging
import math
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from app.common.errors import InfeasibleNetworkError, SolverDivergenceError
from app.common.instrumentation import EvaluationCounter
from app.features.noma_rate.service import GroupRateModel

from .schemas import (
    AllocationTables,
    DinkelbachState,
    GroupSolution,
    NetworkSolution,
    PowerLevels,
    QoSBounds,
    SolverConfig,
)

logger = logging.getLogger(__name__)

_TIE_REL = 1e-9


# ==================== Power levels ====================


def discretize(p_max: float, T: int) -> PowerLevels:
    """Levels t·p_max/T for t = 1..T, the last one exactly p_max."""
    levels = [t * p_max / T for t in range(1, T + 1)]
    levels[-1] = p_max
    return PowerLevels(p_max=p_max, T=T, levels=levels)


def floor_to_level(p: float, levels: PowerLevels) -> Optional[int]:
    """Index t of the greatest level <= p, or None below the first level.

    A relative slack of 1e-12·p_max absorbs float noise from subtracting
    consumed power from a level.
    """
    slack = 1e-12 * levels.p_max
    t = int(np.searchsorted(np.asarray(levels.levels), p + slack, side="right"))
    return t if t >= 1 else None


# ==================== Per-group solver ====================

_INNER_RTOL = 1e-10


class FeasibleInterval(NamedTuple):
    """Weak-user power bounds of one pair at one budget.

    ``lo``/``hi`` are the power constraints (P_s^T + δ and budget - p_s);
    ``lower``/``upper`` also meet the demand floor and r_max.
    ``p_demand``/``p_cap`` are the powers at which R_w reaches the demand
    and r_max on [0, budget], ``p_cap`` None when r_max is out of reach.
    """

    lo: float
    hi: float
    lower: float
    upper: float
    demand: float
    p_demand: float
    p_cap: Optional[float]

    def clamp(self, p: float) -> float:
        return min(max(p, self.lower), self.upper)


def _invert_rate(fn, target: float, lo: float, hi: float) -> Optional[float]:
    """Smallest p in [lo, hi] with fn(p) >= target for increasing fn."""
    f_lo = fn(lo)
    if f_lo >= target:
        return lo
    f_hi = fn(hi)
    if f_hi < target:
        return None
    return brentq(lambda p: fn(p) - target, lo, hi, xtol=1e-15, rtol=1e-12)


def _check_finite(state: DinkelbachState, p_w: float) -> None:
    values = [state.alpha, state.mu, state.lam, state.nu, p_w]
    if not all(math.isfinite(v) for v in values):
        raise SolverDivergenceError(
            "Lagrange multipliers left the finite range",
            multipliers=state.multipliers(),
            p_w=p_w,
            iteration=state.tau,
        )


def weak_demand(model: GroupRateModel, qos: QoSBounds, p_s: float, hi: float, cfg: SolverConfig) -> Optional[float]:
    """Rate floor for the weak user: r_max ramped towards r_min until affordable.

    With r_max = ∞ the demand is whatever the full remaining budget buys.
    """
    ceiling = model.rate_weak(hi, p_s)
    if not math.isfinite(qos.r_max):
        return ceiling if ceiling >= qos.r_min else None
    for k in range(cfg.ramp_steps + 1):
        demand = qos.r_max - k * (qos.r_max - qos.r_min) / cfg.ramp_steps
        if ceiling >= demand - 1e-12:
            return demand
    return None


def feasible_interval(
    model: GroupRateModel, qos: QoSBounds, p_s: float, lo: float, hi: float, demand: float
) -> FeasibleInterval:
    def r_w(p: float) -> float:
        return model.rate_weak(p, p_s)

    budget = hi + p_s
    p_demand = _invert_rate(r_w, demand, 0.0, budget)
    # None only when the demand sits within float noise of the ceiling
    p_demand = hi if p_demand is None else p_demand
    p_cap = _invert_rate(r_w, qos.r_max, 0.0, budget) if math.isfinite(qos.r_max) else None

    lower = min(max(lo, p_demand), hi)
    upper = hi if p_cap is None else min(hi, max(lo, p_cap))
    return FeasibleInterval(
        lo=lo, hi=hi, lower=lower, upper=max(upper, lower),
        demand=demand, p_demand=p_demand, p_cap=p_cap,
    )


def _slacks(qos: QoSBounds, bounds: FeasibleInterval, p_w: float, r_w: float) -> Dict[str, float]:
    """Constraint slacks keyed by multiplier, nonnegative when satisfied."""
    return {
        "alpha": bounds.hi - p_w,
        "mu": p_w - bounds.lo,
        "lambda_max": qos.r_max - r_w,
        "nu_min": r_w - bounds.demand,
    }


def stationarity_residual(model: GroupRateModel, state: DinkelbachState, p_w: float, p_s: float) -> float:
    """(1 + ν - λ)·R_w'(p_w) - ξ - α + μ, zero at a KKT point."""
    coef = 1.0 + state.nu - state.lam
    return coef * model.d_rate_weak(p_w, p_s) - state.xi - state.alpha + state.mu


def _stationary_point(model: GroupRateModel, state: DinkelbachState, p_s: float, budget: float) -> float:
    """Maximizer over [0, budget] of the inner Lagrangian in p_w."""
    coef = 1.0 + state.nu - state.lam
    shift = state.xi + state.alpha - state.mu
    if coef <= 0:
        # Lagrangian is convex in p_w: the maximum sits at an endpoint.
        def lagr(p: float) -> float:
            return coef * model.rate_weak(p, p_s) - shift * p

        return 0.0 if lagr(0.0) >= lagr(budget) else budget

    def g(p: float) -> float:
        return coef * model.d_rate_weak(p, p_s) - shift

    g_lo, g_hi = g(0.0), g(budget)
    if not (math.isfinite(g_lo) and math.isfinite(g_hi)):
        raise SolverDivergenceError("stationarity residual is not finite", iteration=state.tau)
    if g_lo <= 0:
        return 0.0
    if g_hi >= 0:
        return budget
    return brentq(g, 0.0, budget, xtol=1e-15, rtol=1e-12)


def _boundary_values(state: DinkelbachState, slopes: Dict[str, Optional[float]]) -> Dict[str, Optional[float]]:
    """Value of each multiplier that alone moves the stationary point onto its constraint."""
    coef = 1.0 + state.nu - state.lam
    shift = state.xi + state.alpha - state.mu
    cap = slopes["lambda_max"]
    return {
        "mu": shift + state.mu - coef * slopes["mu"],
        "alpha": coef * slopes["alpha"] - shift + state.alpha,
        "lambda_max": None if cap is None else 1.0 + state.nu - shift / cap,
        "nu_min": shift / slopes["nu_min"] - 1.0 + state.lam,
    }


def _project(m: float, boundary: float, slack: float, frac: float) -> float:
    """[m - ε·slack]⁺ with ε = frac·(m - boundary)/slack, or no move when those disagree in sign."""
    if slack == 0.0:
        return m
    eps = frac * max((m - boundary) / slack, 0.0)
    return max(0.0, m - eps * slack)


def _recover_primal(
    model: GroupRateModel, state: DinkelbachState, p_s: float, bounds: FeasibleInterval, p_w: float
) -> float:
    """Feasible p_w of the final multipliers.

    A positive multiplier pins p_w to its constraint. Where R_w is close to
    linear the stationary point alone cannot tell, so the candidates are
    compared on the inner objective R_w - ξ·p_w.
    """
    candidates = [p_w]
    if state.mu > 0:
        candidates.append(bounds.lo)
    if state.nu > 0:
        candidates.append(bounds.p_demand)
    if state.alpha > 0:
        candidates.append(bounds.hi)
    if state.lam > 0 and bounds.p_cap is not None:
        candidates.append(bounds.p_cap)
    feasible = [bounds.clamp(p) for p in candidates]
    return max(feasible, key=lambda p: model.rate_weak(p, p_s) - state.xi * p)


def _inner_solve(
    model: GroupRateModel,
    state: DinkelbachState,
    qos: QoSBounds,
    budget: float,
    p_s: float,
    bounds: FeasibleInterval,
    cfg: SolverConfig,
) -> float:
    """Gradient projection on the multipliers at fixed ξ.

    Each pass takes p_w from stationarity, then moves every multiplier
    against its slack, m <- [m - ε_n·slack_n]⁺. ε_n is a decaying fraction
    of the step that would alone put p_w on that constraint, which keeps the
    update scale-free across channel strengths.

    Raises:
        SolverDivergenceError: If a multiplier becomes non-finite.
    """
    slopes: Dict[str, Optional[float]] = {
        "mu": model.d_rate_weak(bounds.lo, p_s),
        "alpha": model.d_rate_weak(bounds.hi, p_s),
        "lambda_max": None if bounds.p_cap is None else model.d_rate_weak(bounds.p_cap, p_s),
        "nu_min": model.d_rate_weak(bounds.p_demand, p_s),
    }
    eps = [cfg.step] * 4
    for _ in range(cfg.max_inner):
        state.tau += 1
        p_w = _stationary_point(model, state, p_s, budget)
        slack = _slacks(qos, bounds, p_w, model.rate_weak(p_w, p_s))
        target = _boundary_values(state, slopes)
        prev = (state.alpha, state.mu, state.lam, state.nu)

        state.mu = _project(state.mu, target["mu"], slack["mu"], eps[0])
        state.alpha = _project(state.alpha, target["alpha"], slack["alpha"], eps[1])
        if target["lambda_max"] is not None:
            state.lam = _project(state.lam, target["lambda_max"], slack["lambda_max"], eps[2])
        state.nu = _project(state.nu, target["nu_min"], slack["nu_min"], eps[3])
        _check_finite(state, p_w)

        eps = [e * cfg.step_decay for e in eps]
        current = (state.alpha, state.mu, state.lam, state.nu)
        if max(abs(a - b) for a, b in zip(prev, current)) <= _INNER_RTOL * (1.0 + max(current)):
            break
    state.steps = tuple(eps)  # type: ignore[assignment]
    return _recover_primal(model, state, p_s, bounds, _stationary_point(model, state, p_s, budget))


def dinkelbach_iterate(
    state: DinkelbachState,
    model: GroupRateModel,
    qos: QoSBounds,
    budget: float,
    p_s: float,
    bounds: FeasibleInterval,
    cfg: SolverConfig,
) -> GroupSolution:
    """Parametric root finding on 𝓛(ξ) = R - ξ·(p_w + p_s).

    Each inner solve maximizes R - ξ·(p_w + p_s) at fixed ξ; its stationary
    point, clamped to the feasible interval, gives the next ratio
    ξ = R/(p_w + p_s). ξ starts at the ratio of the largest feasible p_w,
    so 𝓛 stays nonnegative and ξ never decreases.

    Raises:
        SolverDivergenceError: If a multiplier becomes non-finite.
    """
    trace: List[Tuple[float, float, float]] = []
    r_s = model.rate_strong(p_s)
    p_w = bounds.upper
    state.xi = (model.rate_weak(p_w, p_s) + r_s) / (p_w + p_s)
    residual = math.inf
    for _ in range(cfg.max_outer):
        p_w = bounds.clamp(_inner_solve(model, state, qos, budget, p_s, bounds, cfg))
        rate = model.rate_weak(p_w, p_s) + r_s
        residual = rate - state.xi * (p_w + p_s)
        trace.append((state.xi, residual, p_w))
        logger.debug(f"dinkelbach xi={state.xi:.6g} L={residual:.3e} p_w={p_w:.6g}")
        if abs(residual) <= cfg.tol:
            break
        state.xi = rate / (p_w + p_s)

    r_w = model.rate_weak(p_w, p_s)
    multipliers = state.multipliers()
    slack = _slacks(qos, bounds, p_w, r_w)
    cs = {name: m * abs(slack[name]) if m > 0 else 0.0 for name, m in multipliers.items()}
    converged = abs(residual) <= cfg.tol
    return GroupSolution(
        group=-1,
        budget=budget,
        p_w=p_w,
        p_s=p_s,
        rate_weak=r_w,
        rate_strong=r_s,
        feasible=converged,
        reason=None if converged else "not_converged",
        demand=bounds.demand,
        xi=state.xi,
        residual=residual,
        stationarity=stationarity_residual(model, state, p_w, p_s),
        multipliers=multipliers,
        cs_residuals=cs,
        trace=trace,
    )


def strong_power(model: GroupRateModel, qos: QoSBounds, budget: float, lo: float) -> Optional[float]:
    """p_s = min(P_s^T, budget - lo), lowered only when r_max binds; None if r_min is unreachable."""
    if not np.any(model.eig_s > 0):
        return 0.0 if qos.r_min <= 0 else None
    p_s = min(qos.p_s_threshold, budget - lo)
    r_s = model.rate_strong(p_s)
    if r_s < qos.r_min:
        return None
    if math.isfinite(qos.r_max) and r_s > qos.r_max:
        capped = _invert_rate(model.rate_strong, qos.r_max, 0.0, p_s)
        if capped is not None:
            p_s = capped
    return p_s


def _infeasible(g: int, budget: float, reason: str) -> GroupSolution:
    logger.debug(f"group {g} infeasible at budget {budget:.6g}: {reason}")
    return GroupSolution(group=g, budget=budget, feasible=False, reason=reason)


def _strong_only(g: int, model: GroupRateModel, budget: float, qos: QoSBounds) -> GroupSolution:
    """Pair whose weak user has no signal: p_w = 0 and only the strong user spends power."""
    if qos.r_min > 0:
        return _infeasible(g, budget, "weak_r_min")
    p_s = strong_power(model, qos, budget, 0.0)
    if p_s is None:
        return _infeasible(g, budget, "strong_r_min")
    return GroupSolution(
        group=g, budget=budget, p_w=0.0, p_s=p_s,
        rate_weak=0.0, rate_strong=model.rate_strong(p_s), demand=0.0,
    )


def solve_group(
    g: int,
    model: GroupRateModel,
    budget: float,
    qos: QoSBounds,
    cfg: Optional[SolverConfig] = None,
    p_max: Optional[float] = None,
) -> GroupSolution:
    """Optimal powers of pair *g* within *budget*.

    The weak user's rate floor is its demand (see ``weak_demand``); among
    the powers meeting it, dinkelbach_iterate picks the best rate per watt.
    Infeasible outcomes (empty feasible set, unreachable r_min, r_max
    exceeded even at the smallest weak power, divergence, non-convergence)
    come back as ``feasible=False`` with a reason.
    """
    cfg = cfg or SolverConfig()
    if model.weak_dark:
        return _strong_only(g, model, budget, qos)
    delta = cfg.delta_rel * (p_max if p_max is not None else budget)
    lo = qos.p_s_threshold + delta

    if budget < lo:
        return _infeasible(g, budget, "budget_below_threshold")
    p_s = strong_power(model, qos, budget, lo)
    if p_s is None:
        return _infeasible(g, budget, "strong_r_min")
    hi = budget - p_s
    if math.isfinite(qos.r_max) and model.rate_weak(lo, p_s) > qos.r_max + 1e-12:
        return _infeasible(g, budget, "weak_r_max")
    demand = weak_demand(model, qos, p_s, hi, cfg)
    if demand is None:
        return _infeasible(g, budget, "weak_r_min")
    bounds = feasible_interval(model, qos, p_s, lo, hi, demand)

    state = DinkelbachState(steps=(cfg.step,) * 4)
    try:
        solution = dinkelbach_iterate(state, model, qos, budget, p_s, bounds, cfg)
    except SolverDivergenceError as e:
        logger.warning(f"group {g}: {e.message}")
        return _infeasible(g, budget, "solver_divergence")
    if not solution.feasible:
        logger.warning(f"group {g}: Dinkelbach did not converge at budget {budget:.6g}")
    return solution.model_copy(update={"group": g})


# ==================== Network combination ====================


def dp_combine(
    order: Sequence[int],
    levels: PowerLevels,
    solutions: Dict[Tuple[int, int], GroupSolution],
    user_ids: Optional[Sequence[int]] = None,
    seed: Optional[int] = None,
) -> AllocationTables:
    """Forward recursion over groups in *order* and budget levels.

    R[G', t] = max over t_g <= t of R[G'-1, ⌊level(t) - consumed_g(t_g)⌋]
    + rate_g(t_g). Zero groups score 0 at any budget, including none left;
    with groups still to serve, a remainder below the first level is -inf.
    ``solutions[(g, t)]`` is group g solved at budget level(t).
    """
    G = len(order)
    T = levels.T
    R = np.full((G + 1, T + 1), -np.inf)
    R[0, :] = 0.0
    # back[G', t] = (t_g, t_rem); t_rem = 0 means nothing left.
    back = np.zeros((G + 1, T + 1, 2), dtype=int)

    for n in range(1, G + 1):
        g = order[n - 1]
        for t in range(1, T + 1):
            best, choice = -np.inf, (0, 0)
            for t_g in range(1, t + 1):
                sol = solutions[(g, t_g)]
                if not sol.feasible:
                    continue
                rem = floor_to_level(levels.level(t) - sol.consumed, levels)
                rem_idx = 0 if rem is None else min(rem, t)
                prev = R[n - 1, rem_idx]
                if not np.isfinite(prev):
                    continue
                total = prev + sol.rate
                if total > best:
                    best, choice = total, (t_g, rem_idx)
            R[n, t] = best
            back[n, t] = choice

    K = 2 * G
    Tgt = np.zeros((G, K, T))
    Pw = np.zeros((G, K, T))
    for n in range(1, G + 1):
        for t in range(1, T + 1):
            if not np.isfinite(R[n, t]):
                continue
            m, tt = n, t
            while m > 0:
                g = order[m - 1]
                t_g, t_rem = back[m, tt]
                sol = solutions[(g, int(t_g))]
                Tgt[n - 1, 2 * g, t - 1] = sol.rate_weak
                Tgt[n - 1, 2 * g + 1, t - 1] = sol.rate_strong
                Pw[n - 1, 2 * g, t - 1] = sol.p_w
                Pw[n - 1, 2 * g + 1, t - 1] = sol.p_s
                m, tt = m - 1, int(t_rem)

    return AllocationTables(
        R_full=R[1:, 1:],
        Tgt_full=Tgt,
        Pw_full=Pw,
        levels=levels,
        order=list(order),
        user_ids=list(user_ids) if user_ids is not None else list(range(K)),
        backpointers=back,
        seed=seed,
    )


def select_solution(tables: AllocationTables, qos: QoSBounds, p_max: float) -> NetworkSolution:
    """Pick (G*, t*) maximizing the network rate among admissible cells.

    Cells whose powers exceed p_max or whose rate lies outside the network
    bounds are masked (-inf rate, zero targets and powers). Ties go to more
    groups, then to the lower level.

    Raises:
        InfeasibleNetworkError: If every cell is masked.
    """
    R = tables.R_full.copy()
    Tgt = tables.Tgt_full.copy()
    Pw = tables.Pw_full.copy()
    G, T = R.shape
    slack = 1e-12 * p_max

    for n in range(G):
        for t in range(T):
            masked = (
                not np.isfinite(R[n, t])
                or Pw[n, :, t].sum() > p_max + slack
                or R[n, t] < qos.r_min_net
                or R[n, t] > qos.r_max_net
            )
            if masked:
                R[n, t] = -np.inf
                Tgt[n, :, t] = 0.0
                Pw[n, :, t] = 0.0

    if not np.any(np.isfinite(R)):
        raise InfeasibleNetworkError("No (groups, level) cell satisfies the network constraints")

    best_rate = float(np.max(R[np.isfinite(R)]))
    tol = _TIE_REL * max(1.0, abs(best_rate))
    candidates = [
        (n + 1, t + 1)
        for n in range(G)
        for t in range(T)
        if np.isfinite(R[n, t]) and R[n, t] >= best_rate - tol
    ]
    g_star, t_star = min(candidates, key=lambda c: (-c[0], c[1]))

    masked_tables = tables.model_copy(
        update={"R_full": R, "Tgt_full": Tgt, "Pw_full": Pw, "selected": (g_star, t_star)}
    )
    logger.info(f"selected G*={g_star} t*={t_star} rate={R[g_star - 1, t_star - 1]:.6g}")
    return NetworkSolution(
        groups_served=g_star,
        t_star=t_star,
        rate=float(R[g_star - 1, t_star - 1]),
        consumed=float(Pw[g_star - 1, :, t_star - 1].sum()),
        user_rates=Tgt[g_star - 1, :, t_star - 1].copy(),
        user_powers=Pw[g_star - 1, :, t_star - 1].copy(),
        tables=masked_tables,
    )


# ==================== Pipeline ====================


class DynamicPowerAllocator:
    """Solves every (group, level) pair, combines and selects."""

    def __init__(
        self,
        qos: QoSBounds,
        T: int = 20,
        cfg: Optional[SolverConfig] = None,
        counter: Optional[EvaluationCounter] = None,
    ):
        self.qos = qos
        self.T = T
        self.cfg = cfg or SolverConfig()
        self.counter = counter

    def solve_all(
        self, models: Sequence[GroupRateModel], levels: PowerLevels
    ) -> Dict[Tuple[int, int], GroupSolution]:
        solutions = {}
        for g, model in enumerate(models):
            if self.counter is not None:
                model.counter = self.counter
            for t in range(1, levels.T + 1):
                solutions[(g, t)] = solve_group(g, model, levels.level(t), self.qos, self.cfg, p_max=levels.p_max)
        return solutions

    def allocate(
        self,
        models: Sequence[GroupRateModel],
        p_max: float,
        rng: Optional[np.random.Generator] = None,
        user_ids: Optional[Sequence[int]] = None,
        seed: Optional[int] = None,
    ) -> NetworkSolution:
        """Run the full allocation for one drop.

        Group order is a shuffle drawn from *rng* (identity without one).

        Raises:
            InfeasibleNetworkError: If no cell survives selection.
        """
        levels = discretize(p_max, self.T)
        order = list(rng.permutation(len(models))) if rng is not None else list(range(len(models)))
        order = [int(g) for g in order]
        solutions = self.solve_all(models, levels)
        tables = dp_combine(order, levels, solutions, user_ids=user_ids, seed=seed)
        return select_solution(tables, self.qos, p_max)
