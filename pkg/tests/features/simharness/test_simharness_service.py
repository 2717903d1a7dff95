"""Tests for scenario loading, drops, records and sweeps."""

import json
import math

import numpy as np
import pytest

from app.common.errors import ConfigurationError, PersistenceError
from app.features.baselines.schemas import SchemeId
from app.features.channel.service import noise_variance
from app.features.noma_rate.service import signal_scale
from app.features.simharness.metrics import bootstrap_ordering, bootstrap_slope
from app.features.simharness.repository import ResultRepository
from app.features.simharness.schemas import MetricsRecord, ScenarioConfig, SweepSpec
from app.features.simharness.service import (
    allocate_drop,
    apply_axis,
    build_network,
    drop_streams,
    load_config,
    prepare_drop,
    run_drop,
    run_ensemble,
    run_schemes,
    snr_noise,
    summarize,
    sweep,
)
from tests.utils.factories import small_scenario


def _record(sum_rate: float, jain: float = 1.0) -> MetricsRecord:
    return MetricsRecord(
        scheme="dynamic_noma",
        seed=0,
        drop_index=0,
        num_users=4,
        sum_rate=sum_rate,
        sum_rate_bps=sum_rate * 1.5e9,
        jain=jain,
        energy_eff=1.0,
        consumed_power=0.1,
        groups_served=2,
        t_star=3,
    )


# ========== Configuration ==========


@pytest.mark.unit
class TestLoadConfig:
    def test_valid_document(self, tmp_path):
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps({"users": {"count": 6}, "seed": 3, "ap_grid": {"rows": 2, "cols": 2}}))

        cfg = load_config(path)

        assert cfg.users.count == 6
        assert cfg.seed == 3
        assert cfg.ap_grid.num_aps == 4
        assert cfg.schema_version == 1

    def test_invalid_document(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"users": {"count": 0}, "bogus": True}))

        with pytest.raises(ConfigurationError) as exc:
            load_config(path)

        assert exc.value.detail["path"] == str(path)
        locs = [tuple(err["loc"]) for err in exc.value.detail["errors"]]
        assert ("users", "count") in locs
        assert ("bogus",) in locs

    def test_missing_file(self, tmp_path):
        with pytest.raises(PersistenceError):
            load_config(tmp_path / "absent.json")

    def test_unknown_schema_version(self, tmp_path):
        path = tmp_path / "v2.json"
        path.write_text(json.dumps({"schema_version": 2}))
        with pytest.raises(ConfigurationError):
            load_config(path)

    def test_users_outside_room(self):
        with pytest.raises(ValueError):
            ScenarioConfig.model_validate(
                {"users": {"count": 1, "placement": "fixed", "positions": [[9.0, 1.0]]}}
            )


# ========== Network and drops ==========


@pytest.mark.unit
class TestBuildNetwork:
    def test_default_grid_and_power(self, scenario):
        network = build_network(scenario)

        assert len(network.aps) == 4
        assert network.detector.num_photodiodes == 4
        np.testing.assert_allclose(network.ap_powers, [0.1] * 4)
        assert network.p_max == pytest.approx(0.4)

    def test_beam_power_override(self):
        network = build_network(small_scenario(per_beam_power=0.05, ap_grid={"array_side": 2}))
        # Four VCSELs per AP.
        np.testing.assert_allclose(network.ap_powers, [0.2] * 4)


@pytest.mark.unit
class TestPrepareDrop:
    def test_streams_depend_on_seed_and_index(self):
        a = drop_streams(1, 0)[0].generate_state(2)
        assert np.array_equal(a, drop_streams(1, 0)[0].generate_state(2))
        assert not np.array_equal(a, drop_streams(1, 1)[0].generate_state(2))
        assert not np.array_equal(a, drop_streams(2, 0)[0].generate_state(2))

    def test_context(self, scenario):
        drop = prepare_drop(scenario)

        assert drop.real_ids == [0, 1, 2, 3]
        assert drop.num_aps == 4
        assert drop.assignment.num_groups == 2
        assert set(drop.channels) == {0, 1, 2, 3}
        assert all(s > 0 for s in drop.sigma2.values())
        assert drop.warnings == []

    def test_repeatable(self, scenario):
        a, b = prepare_drop(scenario, 1), prepare_drop(scenario, 1)

        assert [u.position for u in a.users] == [u.position for u in b.users]
        assert a.assignment.pairs == b.assignment.pairs
        assert a.order_seed == b.order_seed

    def test_drops_differ(self, scenario):
        a, b = prepare_drop(scenario, 0), prepare_drop(scenario, 1)
        assert [u.position for u in a.users] != [u.position for u in b.users]

    def test_odd_users_add_virtual_weak_user(self):
        cfg = small_scenario(users={"count": 3})

        drop = prepare_drop(cfg)

        assert len(drop.users) == 3
        assert np.all(drop.channels[3].gains == 0.0)
        assert drop.sigma2[3] == pytest.approx(noise_variance(cfg.front_end, cfg.noise, 0.0))
        assert any(3 in pair for pair in drop.assignment.pairs)

    def test_fixed_placement(self):
        cfg = small_scenario(users={"count": 2, "placement": "fixed", "positions": [[1.0, 1.0], [7.0, 7.0]]})

        drop = prepare_drop(cfg)

        assert [(u.position.x, u.position.y) for u in drop.users] == [(1.0, 1.0), (7.0, 7.0)]

    def test_empty_threshold_class_falls_back(self):
        cfg = small_scenario(classification={"kind": "distance_threshold", "d_th": 0.1})

        drop = prepare_drop(cfg)

        assert drop.warnings == ["empty_strong_class", "classification_fallback"]
        assert drop.assignment.num_groups == 2


# ========== Single drops ==========


@pytest.mark.unit
class TestRunDrop:
    def test_record(self, scenario):
        record = run_drop(scenario, SchemeId.DYNAMIC_NOMA)

        assert record.scheme == "dynamic_noma"
        assert record.num_users == 4
        assert record.sum_rate > 0
        assert record.sum_rate_bps == pytest.approx(record.sum_rate * 1.5e9)
        assert 0 < record.jain <= 1
        assert record.energy_eff == pytest.approx(record.sum_rate_bps / record.consumed_power)

    def test_deterministic(self, scenario):
        assert run_drop(scenario, "dynamic_noma", 1) == run_drop(scenario, "dynamic_noma", 1)

    def test_full_blockage_gives_zero_rate(self):
        record = run_drop(small_scenario(blockage_probability=1.0), "dynamic_noma")

        assert record.sum_rate == 0.0
        assert record.jain == 0.0
        assert "zero_rate" in record.flags

    def test_infeasible_network_flag(self):
        record = run_drop(small_scenario(qos={"p_s_threshold": 0.5}), "dynamic_noma")

        assert "infeasible_network" in record.flags
        assert record.energy_eff == 0.0

    def test_scheme_order_does_not_matter(self, scenario):
        forward = run_schemes(scenario, ["dynamic_noma", "baseline2"])
        backward = run_schemes(scenario, ["baseline2", "dynamic_noma"])

        assert forward[0] == backward[1]
        assert forward[1] == backward[0]

    def test_allocate_drop_tables(self, scenario):
        drop, solution = allocate_drop(scenario)

        assert solution.tables.seed == scenario.seed
        assert solution.tables.selected == (solution.groups_served, solution.t_star)
        assert solution.tables.levels.T == scenario.allocation.T
        assert len(solution.tables.user_ids) == 2 * drop.assignment.num_groups


# ========== Sweeps ==========


@pytest.mark.unit
class TestApplyAxis:
    def test_num_users(self, scenario):
        assert apply_axis(scenario, "num_users", 6.0).users.count == 6

    def test_blockage(self, scenario):
        assert apply_axis(scenario, "blockage", 0.3).blockage_probability == 0.3

    def test_beam_waist(self, scenario):
        assert apply_axis(scenario, "beam_waist", 2e-6).beam.w0 == 2e-6

    def test_tx_power(self, scenario):
        assert apply_axis(scenario, "tx_power", 0.05).per_beam_power == 0.05

    def test_snr_fixes_noise(self, scenario):
        cfg = apply_axis(scenario, "snr", 10.0)

        assert cfg.noise.mode == "fixed_sigma"
        expected = signal_scale(scenario.front_end) * 0.4 / (4 * 10.0)
        assert cfg.noise.sigma2 == pytest.approx(expected)
        assert snr_noise(scenario, 10.0).sigma2 == pytest.approx(expected)

    def test_out_of_range_value(self, scenario):
        with pytest.raises(ConfigurationError):
            apply_axis(scenario, "blockage", 1.5)

    def test_unknown_axis(self, scenario):
        with pytest.raises(ConfigurationError):
            apply_axis(scenario, "humidity", 1.0)

    def test_original_is_untouched(self, scenario):
        apply_axis(scenario, "num_users", 8)
        assert scenario.users.count == 4


@pytest.mark.unit
class TestSummarize:
    def test_mean_and_stderr(self):
        row = summarize(2.0, "dynamic_noma", [_record(1.0), _record(2.0), _record(3.0)])

        assert row.axis == 2.0
        assert row.mean_rate == pytest.approx(2.0)
        assert row.stderr == pytest.approx(1.0 / math.sqrt(3.0))
        assert row.groups == 2.0
        assert row.t_star == 3.0

    def test_single_record_has_zero_stderr(self):
        assert summarize(0.0, "plain_bia", [_record(1.0)]).stderr == 0.0


@pytest.mark.unit
class TestSweep:
    def test_rows_in_value_then_scheme_order(self, scenario):
        spec = SweepSpec(axis="num_users", values=[2, 4], drops=2)

        rows = sweep(scenario, spec, ["dynamic_noma", "plain_bia"])

        assert [(r.axis, r.scheme) for r in rows] == [
            (2.0, "dynamic_noma"),
            (2.0, "plain_bia"),
            (4.0, "dynamic_noma"),
            (4.0, "plain_bia"),
        ]
        assert all(r.stderr >= 0 for r in rows)

    def test_identical_csv_on_rerun(self, scenario, tmp_path):
        spec = SweepSpec(axis="blockage", values=[0.0, 0.5], drops=2)
        repository = ResultRepository()

        repository.save_sweep(sweep(scenario, spec, ["dynamic_noma", "baseline1"]), tmp_path / "a.csv")
        repository.save_sweep(sweep(scenario, spec, ["dynamic_noma", "baseline1"]), tmp_path / "b.csv")

        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    @pytest.mark.slow
    def test_parallel_matches_serial(self, tmp_path):
        spec = SweepSpec(axis="num_users", values=[4], drops=3)

        serial = sweep(small_scenario(workers=1), spec, ["dynamic_noma"])
        parallel = sweep(small_scenario(workers=2), spec, ["dynamic_noma"])

        assert serial == parallel


# ========== Ensemble trends ==========


def _per_drop(records, scheme, field="sum_rate"):
    """Metric of *scheme* ordered by drop index, so schemes pair drop by drop."""
    chosen = sorted((r for r in records if r.scheme == scheme), key=lambda r: r.drop_index)
    return [getattr(r, field) for r in chosen]


@pytest.mark.slow
class TestEnsembleTrends:
    """Small seeded ensembles: orderings and trends must not be significantly reversed."""

    DROPS = 8
    SCHEMES = ["dynamic_noma", "baseline1", "conventional_noma", "plain_bia"]

    @pytest.fixture(scope="class")
    def ensemble(self):
        # even T puts the equal split P_max/2 + P_max/2 on the level grid
        cfg = small_scenario(seed=11, allocation={"T": 6})
        spec = SweepSpec(axis="blockage", values=[0.0], drops=self.DROPS)
        return run_ensemble(cfg, spec, self.SCHEMES)[0.0]

    def test_dynamic_never_below_equal_split(self, ensemble):
        dynamic = _per_drop(ensemble, "dynamic_noma")
        baseline = _per_drop(ensemble, "baseline1")

        assert all(d >= b * (1 - 1e-6) for d, b in zip(dynamic, baseline))

    def test_scheme_ordering(self, ensemble):
        rates = {s: _per_drop(ensemble, s) for s in self.SCHEMES}

        for better, worse in zip(self.SCHEMES, self.SCHEMES[1:]):
            estimate = bootstrap_ordering(rates[better], rates[worse], resamples=500)
            assert estimate.high >= 0, f"{better} significantly below {worse}: {estimate}"

    def test_energy_efficiency_ordering(self, ensemble):
        dynamic = _per_drop(ensemble, "dynamic_noma", "energy_eff")
        baseline = _per_drop(ensemble, "baseline1", "energy_eff")

        assert bootstrap_ordering(dynamic, baseline, resamples=500).high >= 0

    def test_summary_matches_records(self, ensemble):
        row = summarize(0.0, "dynamic_noma", [r for r in ensemble if r.scheme == "dynamic_noma"])

        assert row.mean_rate == pytest.approx(np.mean(_per_drop(ensemble, "dynamic_noma")))
        assert row.ee == pytest.approx(np.mean(_per_drop(ensemble, "dynamic_noma", "energy_eff")))

    def _slope(self, axis, values, scheme, field="sum_rate"):
        spec = SweepSpec(axis=axis, values=values, drops=self.DROPS)
        by_value = run_ensemble(small_scenario(seed=11), spec, [scheme])
        samples = [_per_drop(by_value[v], scheme, field) for v in values]
        return bootstrap_slope(values, samples, resamples=500)

    def test_rate_falls_with_blockage(self):
        values = [0.0, 0.4, 0.8]

        assert self._slope("blockage", values, "plain_bia").negative
        assert not self._slope("blockage", values, "dynamic_noma").positive

    def test_rate_grows_with_snr(self):
        values = [0.0, 20.0, 40.0]

        assert self._slope("snr", values, "plain_bia").positive
        assert not self._slope("snr", values, "dynamic_noma").negative

    def test_fairness_does_not_fall_with_beam_waist(self):
        values = [4e-6, 6e-6, 8e-6]

        assert not self._slope("beam_waist", values, "dynamic_noma", "jain").negative
