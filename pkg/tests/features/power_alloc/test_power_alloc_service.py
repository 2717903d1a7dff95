"""Tests for the budget grid, per-group solver, DP and network selection."""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from app.common.errors import InfeasibleNetworkError
from app.common.instrumentation import EvaluationCounter
from app.features.power_alloc.oracles import exhaustive_network, exhaustive_split, grid_search_group
from app.features.power_alloc import service
from app.features.power_alloc.schemas import QoSBounds, SolverConfig
from app.features.power_alloc.service import (
    DynamicPowerAllocator,
    discretize,
    dp_combine,
    floor_to_level,
    select_solution,
    solve_group,
    strong_power,
)
from tests.utils.factories import fixed_solution, infeasible_solution, rate_model


@pytest.fixture
def unit_model():
    """Unit gains and σ² = 1e-3 keep both rates of order one."""
    return rate_model(weak_gain=1.0, strong_gain=1.0, sigma2=1e-3)


# ========== Power levels ==========


@pytest.mark.unit
class TestDiscretize:
    def test_levels(self):
        levels = discretize(1.0, 4)
        assert levels.levels == [0.25, 0.5, 0.75, 1.0]
        assert levels.level(1) == 0.25

    def test_last_level_is_exact(self):
        assert discretize(0.3, 7).levels[-1] == 0.3

    @pytest.mark.parametrize(
        "p,expected",
        [(0.6, 2), (0.5, 2), (0.1, None), (0.0, None), (5.0, 4), (0.75 - 1e-15, 3)],
    )
    def test_floor_to_level(self, p, expected):
        assert floor_to_level(p, discretize(1.0, 4)) == expected

    def test_solver_config_bounds(self):
        with pytest.raises(ValidationError):
            SolverConfig(step_decay=1.5)

    def test_qos_ordering(self):
        with pytest.raises(ValidationError):
            QoSBounds(r_min=2.0, r_max=1.0)


# ========== Strong user power ==========


@pytest.mark.unit
class TestStrongPower:
    def test_threshold_when_unbounded(self, open_qos):
        assert strong_power(rate_model(), open_qos, 0.1, 0.01) == 0.01

    def test_small_budget_limits_power(self, open_qos):
        assert strong_power(rate_model(), open_qos, 0.015, 0.01) == pytest.approx(0.005)

    def test_r_max_caps_power(self):
        model = rate_model()
        qos = QoSBounds(r_min=0.0, r_max=1.0, p_s_threshold=0.01)

        p_s = strong_power(model, qos, 0.1, 0.01)

        assert p_s < 0.01
        assert model.rate_strong(p_s) == pytest.approx(1.0, rel=1e-9)

    def test_unreachable_r_min(self):
        qos = QoSBounds(r_min=50.0, r_max=math.inf, p_s_threshold=0.01)
        assert strong_power(rate_model(), qos, 0.1, 0.01) is None

    def test_dark_strong_user(self, open_qos):
        assert strong_power(rate_model(strong_gain=0.0), open_qos, 0.1, 0.01) == 0.0


# ========== Per-group solver ==========


@pytest.mark.unit
class TestSolveGroup:
    @pytest.fixture
    def peaked_model(self):
        """Nearly silent strong user: rate per watt peaks strictly inside (P_s^T, budget - p_s)."""
        return rate_model(weak_gain=1.0, strong_gain=1e-3, sigma2=1e-3)

    @pytest.fixture
    def far_qos(self):
        """r_max far out of reach, so the demand ramps all the way down to r_min = 0."""
        return QoSBounds(r_min=0.0, r_max=20.0, p_s_threshold=0.01)

    def test_unbounded_rate_spends_whole_budget(self, unit_model, open_qos):
        sol = solve_group(3, unit_model, 0.1, open_qos)

        assert sol.feasible
        assert sol.group == 3
        assert sol.p_s == 0.01
        assert sol.p_w == pytest.approx(0.09)
        assert sol.consumed == pytest.approx(0.1)
        assert abs(sol.residual) <= SolverConfig().tol

    def test_matches_grid_search(self, unit_model, open_qos):
        sol = solve_group(0, unit_model, 0.1, open_qos)
        grid = grid_search_group(unit_model, 0.1, open_qos, p_max=0.1)

        assert sol.rate == pytest.approx(grid[2], rel=1e-6)

    @pytest.mark.parametrize(
        "r_max",
        [math.inf, 0.3, 20.0],
        ids=["budget-binds", "r-max-binds", "demand-ramped-to-zero"],
    )
    def test_stationarity_holds_at_solution(self, unit_model, r_max):
        cfg = SolverConfig()
        qos = QoSBounds(r_min=0.0, r_max=r_max, p_s_threshold=0.01)

        sol = solve_group(0, unit_model, 0.1, qos, cfg)

        assert sol.feasible
        assert abs(sol.stationarity) <= 1e-5 * max(1.0, sol.xi)
        assert all(v >= 0 for v in sol.multipliers.values())
        assert all(v <= cfg.cs_tol for v in sol.cs_residuals.values())

    def test_ratio_never_decreases(self, peaked_model, far_qos):
        sol = solve_group(0, peaked_model, 0.1, far_qos)

        ratios = [xi for xi, _, _ in sol.trace]
        start = (peaked_model.rate_weak(0.09, 0.01) + peaked_model.rate_strong(0.01)) / 0.1
        assert ratios[0] == pytest.approx(start)
        assert all(b >= a - 1e-12 for a, b in zip(ratios, ratios[1:]))
        assert abs(sol.trace[-1][1]) <= SolverConfig().tol

    def test_interior_optimum_balances_rate_and_power(self, peaked_model, far_qos):
        sol = solve_group(0, peaked_model, 0.1, far_qos)

        assert 0.01 < sol.p_w < 0.09
        assert sol.multipliers == {"alpha": 0.0, "mu": 0.0, "lambda_max": 0.0, "nu_min": 0.0}
        # dR/dp_w · P = R where R/P peaks
        slope = peaked_model.d_rate_weak(sol.p_w, sol.p_s)
        assert slope * sol.consumed == pytest.approx(sol.rate, rel=1e-5)
        assert abs(sol.stationarity) <= 1e-5 * max(1.0, sol.xi)

    def test_interior_optimum_beats_grid(self, peaked_model, far_qos):
        sol = solve_group(0, peaked_model, 0.1, far_qos, p_max=0.1)
        p_w, p_s, rate = grid_search_group(peaked_model, 0.1, far_qos, p_max=0.1)

        assert sol.rate / sol.consumed >= rate / (p_w + p_s) - 1e-6
        assert sol.rate == pytest.approx(rate, rel=1e-3)

    def test_result_comes_from_inner_iterate(self, peaked_model, far_qos, monkeypatch):
        reference = solve_group(0, peaked_model, 0.1, far_qos)
        # An inner solve that ignores the multipliers and always answers the top of the interval.
        monkeypatch.setattr(service, "_inner_solve", lambda *args: args[5].upper)

        forced = solve_group(0, peaked_model, 0.1, far_qos)

        assert forced.p_w == pytest.approx(0.09)
        assert reference.p_w < forced.p_w - 1e-3
        assert reference.rate / reference.consumed > forced.rate / forced.consumed

    def test_weak_r_max_binds(self, unit_model):
        qos = QoSBounds(r_min=0.0, r_max=0.3, p_s_threshold=0.01)

        sol = solve_group(0, unit_model, 0.1, qos)

        assert sol.feasible
        assert sol.rate_weak == pytest.approx(0.3, rel=1e-6)
        assert sol.consumed < 0.1
        assert sol.demand == pytest.approx(0.3)

    def test_unaffordable_demand_is_ramped_down(self, unit_model):
        qos = QoSBounds(r_min=0.0, r_max=5.0, p_s_threshold=0.01)
        ceiling = unit_model.rate_weak(0.09, 0.01)
        expected = max(d for d in (5.0 - 0.5 * k for k in range(11)) if d <= ceiling)

        sol = solve_group(0, unit_model, 0.1, qos)

        assert sol.demand == pytest.approx(expected)
        assert expected - 1e-9 <= sol.rate_weak < ceiling
        assert sol.consumed < 0.1

    def test_dark_weak_user_spends_nothing(self, open_qos):
        sol = solve_group(0, rate_model(weak_gain=0.0), 0.1, open_qos)

        assert sol.feasible
        assert sol.p_w == 0.0
        assert sol.rate_weak == 0.0
        assert sol.consumed == pytest.approx(0.01)

    def test_dark_weak_user_cannot_meet_r_min(self):
        qos = QoSBounds(r_min=0.1, r_max=math.inf, p_s_threshold=0.01)
        assert solve_group(0, rate_model(weak_gain=0.0), 0.1, qos).reason == "weak_r_min"

    def test_budget_below_threshold(self, unit_model, open_qos):
        sol = solve_group(0, unit_model, 0.005, open_qos)
        assert not sol.feasible
        assert sol.reason == "budget_below_threshold"
        assert sol.rate == -math.inf
        assert sol.consumed == 0.0

    def test_strong_r_min_unreachable(self, unit_model):
        qos = QoSBounds(r_min=5.0, r_max=math.inf, p_s_threshold=0.01)
        assert solve_group(0, unit_model, 0.1, qos).reason == "strong_r_min"

    def test_weak_r_max_exceeded_at_smallest_power(self, unit_model):
        qos = QoSBounds(r_min=0.0, r_max=0.1, p_s_threshold=0.01)
        sol = solve_group(0, unit_model, 0.1, qos)
        assert not sol.feasible
        assert sol.reason == "weak_r_max"


# ========== DP combination ==========


@pytest.mark.unit
class TestDpCombine:
    @pytest.fixture
    def levels(self):
        return discretize(1.0, 2)

    @pytest.fixture
    def solutions(self):
        return {
            (0, 1): fixed_solution(0, 0.5, 1.0, 1.0),
            (0, 2): fixed_solution(0, 1.0, 1.5, 1.5),
            (1, 1): fixed_solution(1, 0.5, 1.0, 0.5),
            (1, 2): fixed_solution(1, 1.0, 1.2, 1.2),
        }

    def test_hand_computed_table(self, levels, solutions):
        tables = dp_combine([0, 1], levels, solutions)

        # One group: 2 at level 1, 3 at level 2. Two groups need two half budgets.
        np.testing.assert_array_equal(tables.R_full, [[2.0, 3.0], [-np.inf, 3.5]])
        np.testing.assert_allclose(tables.Tgt[:, 1], [1.0, 1.0, 1.0, 0.5])
        np.testing.assert_allclose(tables.Pw[:, 1], [0.4, 0.1, 0.4, 0.1])
        assert tables.consumed(2, 2) == pytest.approx(1.0)
        assert tables.user_ids == [0, 1, 2, 3]

    def test_matches_exhaustive_split(self, levels, solutions):
        for order in ([0, 1], [1, 0]):
            tables = dp_combine(order, levels, solutions)
            np.testing.assert_array_equal(tables.R_full, exhaustive_split(order, levels, solutions))

    def test_infeasible_group_is_skipped(self, levels, solutions):
        solutions[(1, 1)] = infeasible_solution(1, 0.5)

        tables = dp_combine([0, 1], levels, solutions)

        assert tables.R_full[1, 1] == -np.inf
        assert np.all(tables.Tgt_full[1] == 0.0)

    def test_matches_exhaustive_on_solved_groups(self, unit_model, open_qos):
        levels = discretize(0.2, 5)
        solutions = DynamicPowerAllocator(open_qos, T=5).solve_all([unit_model, rate_model()], levels)

        tables = dp_combine([1, 0], levels, solutions)
        reference = exhaustive_split([1, 0], levels, solutions)

        assert np.array_equal(np.isfinite(tables.R_full), np.isfinite(reference))
        finite = np.isfinite(reference)
        np.testing.assert_allclose(tables.R_full[finite], reference[finite], rtol=1e-9)


# ========== Selection ==========


@pytest.mark.unit
class TestSelectSolution:
    @pytest.fixture
    def tables(self):
        solutions = {
            (0, 1): fixed_solution(0, 0.5, 1.0, 1.0),
            (0, 2): fixed_solution(0, 1.0, 1.5, 1.5),
            (1, 1): fixed_solution(1, 0.5, 1.0, 0.5),
            (1, 2): fixed_solution(1, 1.0, 1.2, 1.2),
        }
        return dp_combine([0, 1], discretize(1.0, 2), solutions, user_ids=[10, 11, 12, 13], seed=4)

    def test_best_cell(self, tables, open_qos):
        solution = select_solution(tables, open_qos, 1.0)

        assert (solution.groups_served, solution.t_star) == (2, 2)
        assert solution.rate == pytest.approx(3.5)
        assert solution.consumed == pytest.approx(1.0)
        np.testing.assert_allclose(solution.user_rates, [1.0, 1.0, 1.0, 0.5])
        assert solution.tables.selected == (2, 2)
        assert solution.tables.seed == 4

    def test_ties_prefer_more_groups(self, open_qos):
        solutions = {
            (0, 1): fixed_solution(0, 0.5, 1.0, 1.0),
            (0, 2): fixed_solution(0, 1.0, 1.75, 1.75),
            (1, 1): fixed_solution(1, 0.5, 1.0, 0.5),
            (1, 2): infeasible_solution(1, 1.0),
        }
        tables = dp_combine([0, 1], discretize(1.0, 2), solutions)

        solution = select_solution(tables, open_qos, 1.0)

        assert solution.groups_served == 2

    def test_ties_prefer_lower_level(self, open_qos):
        solutions = {
            (0, 1): fixed_solution(0, 0.5, 1.0, 1.0),
            (0, 2): fixed_solution(0, 1.0, 1.0, 1.0),
        }
        tables = dp_combine([0], discretize(1.0, 2), solutions)

        assert select_solution(tables, open_qos, 1.0).t_star == 1

    def test_network_rate_cap_masks_cells(self, tables):
        qos = QoSBounds(r_min=0.0, r_max=math.inf, p_s_threshold=0.01, r_max_net=3.0)

        solution = select_solution(tables, qos, 1.0)

        assert (solution.groups_served, solution.t_star) == (1, 2)
        assert solution.tables.R_full[1, 1] == -np.inf
        assert np.all(solution.tables.Pw_full[1, :, 1] == 0.0)
        # The unmasked tables are left alone.
        assert tables.R_full[1, 1] == 3.5

    def test_power_cap_masks_cells(self, tables, open_qos):
        solution = select_solution(tables, open_qos, 0.9)
        assert (solution.groups_served, solution.t_star) == (1, 1)

    def test_everything_masked(self, tables, open_qos):
        with pytest.raises(InfeasibleNetworkError) as exc:
            select_solution(tables, open_qos, 0.1)
        assert exc.value.exit_code == 2


# ========== Pipeline ==========


@pytest.mark.unit
class TestDynamicPowerAllocator:
    def test_allocation_respects_budget(self, unit_model, open_qos):
        allocator = DynamicPowerAllocator(open_qos, T=4)

        solution = allocator.allocate([unit_model, unit_model], 0.2, rng=np.random.default_rng(1))

        assert solution.consumed <= 0.2 + 1e-12
        assert solution.groups_served in (1, 2)
        assert solution.rate == pytest.approx(solution.user_rates.sum())
        assert sorted(solution.tables.order) == [0, 1]
        assert solution.tables.selected == (solution.groups_served, solution.t_star)

    def test_same_seed_same_result(self, unit_model, open_qos):
        allocator = DynamicPowerAllocator(open_qos, T=4)
        models = [unit_model, rate_model()]

        a = allocator.allocate(models, 0.2, rng=np.random.default_rng(9))
        b = allocator.allocate(models, 0.2, rng=np.random.default_rng(9))

        assert a.tables.order == b.tables.order
        np.testing.assert_array_equal(a.user_powers, b.user_powers)

    @staticmethod
    def _evaluations(open_qos, T: int, G: int) -> int:
        counter = EvaluationCounter()
        models = [rate_model(weak_gain=1.0, strong_gain=1.0, sigma2=1e-3) for _ in range(G)]
        DynamicPowerAllocator(open_qos, T=T, counter=counter).allocate(models, 0.2)
        return counter.total

    def test_work_grows_linearly_with_groups(self, open_qos):
        assert self._evaluations(open_qos, 3, 2) == 2 * self._evaluations(open_qos, 3, 1)
        assert self._evaluations(open_qos, 3, 3) == 3 * self._evaluations(open_qos, 3, 1)

    @pytest.mark.slow
    def test_work_is_linear_in_levels_times_groups(self, open_qos):
        cells = [(T, G) for T in (2, 4, 6, 8) for G in (1, 2, 3, 4)]
        x = np.array([T * G for T, G in cells], dtype=float)
        y = np.array([self._evaluations(open_qos, T, G) for T, G in cells], dtype=float)

        slope, intercept = np.polyfit(x, y, 1)
        fitted = slope * x + intercept
        r2 = 1.0 - np.sum((y - fitted) ** 2) / np.sum((y - y.mean()) ** 2)

        assert slope > 0
        assert r2 >= 0.95

    def test_infeasible_network(self, unit_model, open_qos):
        # Every level sits below the strong user's threshold.
        with pytest.raises(InfeasibleNetworkError):
            DynamicPowerAllocator(open_qos, T=4).allocate([unit_model], 0.008)


@pytest.mark.unit
class TestExhaustiveNetwork:
    def test_single_group_uses_whole_budget(self, unit_model, open_qos):
        rate, pairs = exhaustive_network([0], [1], lambda i, j: unit_model, 0.1, open_qos, T=2)

        assert pairs == ((0, 1),)
        assert rate == pytest.approx(solve_group(0, unit_model, 0.1, open_qos, p_max=0.1).rate)

    def test_prefers_stronger_pairing(self, open_qos):
        boosted = {(0, 2), (1, 3)}

        def make_model(i, j):
            return rate_model(weak_gain=1.0, strong_gain=3.0 if (i, j) in boosted else 1.0, sigma2=1e-3)

        rate, pairs = exhaustive_network([0, 1], [2, 3], make_model, 0.2, open_qos, T=2)

        assert pairs == ((0, 2), (1, 3))
        assert math.isfinite(rate)
