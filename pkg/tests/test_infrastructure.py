"""
Tests for the shared infrastructure in app.common: errors, caching,
reports, file output, logging and work counters.
"""
import logging

import pandas as pd
import pytest

from app.common import logs
from app.common.cache import CacheService
from app.common.errors import (
    BlockSizeError,
    ConfigurationError,
    InfeasibleNetworkError,
    PersistenceError,
    SimulationError,
)
from app.common.instrumentation import EvaluationCounter
from app.common.reports import Violation, build_report, fail_report, pass_report
from app.common.storage import atomic_path, read_text, write_frame, write_json


# ========== Errors ==========


@pytest.mark.unit
class TestErrors:
    def test_detail_carries_context(self):
        err = ConfigurationError("bad value", field="T")

        assert isinstance(err, SimulationError)
        assert err.detail == {"error": "configuration_error", "message": "bad value", "field": "T"}
        assert err.exit_code == 1

    def test_block_size_detail(self):
        err = BlockSizeError(num_slots=5000, max_slots=100)

        assert err.detail["num_slots"] == 5000
        assert err.detail["max_slots"] == 100
        assert "5000" in str(err)

    def test_infeasible_network_exit_code(self):
        assert InfeasibleNetworkError("nothing fits").exit_code == 2

    def test_persistence_path(self):
        assert PersistenceError("cannot write", path="/tmp/x.csv").detail["path"] == "/tmp/x.csv"


# ========== Cache ==========


@pytest.mark.unit
class TestCacheService:
    @pytest.fixture
    def cache(self):
        service = CacheService()
        service.register("blocks", maxsize=2)
        return service

    def test_get_set_and_stats(self, cache):
        assert cache.get("blocks", (2, 2)) is None
        cache.set("blocks", (2, 2), "block")

        assert cache.get("blocks", (2, 2)) == "block"
        assert cache.stats()["blocks"] == {"size": 1, "maxsize": 2, "hits": 1, "misses": 1}

    def test_lru_eviction(self, cache):
        for key in ("a", "b", "c"):
            cache.set("blocks", key, key.upper())

        assert not cache.has("blocks", "a")
        assert cache.has("blocks", "c")

    def test_get_or_build_calls_builder_once(self, cache):
        calls = []

        def build():
            calls.append(1)
            return ("block",)

        first = cache.get_or_build("blocks", (3, 2), build)
        second = cache.get_or_build("blocks", (3, 2), build)

        assert first is second
        assert len(calls) == 1
        assert cache.stats()["blocks"]["hits"] == 1

    def test_register_twice_keeps_entries(self, cache):
        cache.set("blocks", "a", 1)
        cache.register("blocks", maxsize=10)
        assert cache.get("blocks", "a") == 1

    def test_unregistered_namespace(self, cache):
        with pytest.raises(KeyError):
            cache.get("missing", "a")
        assert cache.clear("missing") is False

    def test_clear_all_resets_counts(self, cache):
        cache.set("blocks", "a", 1)
        cache.get("blocks", "a")

        cache.clear_all()

        assert cache.stats()["blocks"]["size"] == 0
        assert cache.stats()["blocks"]["hits"] == 0


# ========== Reports ==========


@pytest.mark.unit
class TestReports:
    def test_build_passing(self):
        report = build_report([], data={"n": 3}, subject="alignment")

        assert report.passed
        assert report.details == "alignment: passed"
        assert report.data == {"n": 3}

    def test_build_failing(self):
        v = Violation(rule="slot", message="misaligned", location={"slot": 4})

        report = build_report([v], subject="alignment")

        assert not report.passed
        assert report.details == "alignment: 1 violation(s)"
        assert report.violations[0].location == {"slot": 4}

    def test_without_subject(self):
        assert build_report([]).details == "passed"

    def test_helpers(self):
        assert pass_report().passed
        assert not fail_report([Violation(rule="r", message="m")]).passed


# ========== Storage ==========


@pytest.mark.unit
class TestStorage:
    def test_frame_float_format(self, tmp_path):
        frame = pd.DataFrame({"a": [0.1 + 0.2, float("nan")], "b": [1, 2]})

        path = write_frame(frame, tmp_path / "nested" / "t.csv")

        assert path.read_text() == "a,b\n0.3,1\n,2\n"

    def test_json_sorted(self, tmp_path):
        path = write_json({"b": 1, "a": [1, 2]}, tmp_path / "doc.json")

        assert path.read_text().startswith('{\n  "a"')

    def test_failed_write_leaves_nothing(self, tmp_path):
        target = tmp_path / "out.csv"

        with pytest.raises(RuntimeError):
            with atomic_path(target) as tmp:
                tmp.write_text("partial")
                raise RuntimeError("boom")

        assert list(tmp_path.iterdir()) == []

    def test_existing_file_kept_on_failure(self, tmp_path):
        target = tmp_path / "out.csv"
        target.write_text("old")

        with pytest.raises(RuntimeError):
            with atomic_path(target) as tmp:
                tmp.write_text("new")
                raise RuntimeError("boom")

        assert target.read_text() == "old"

    def test_read_text(self, tmp_path):
        (tmp_path / "a.txt").write_text("hello", encoding="utf-8")

        assert read_text(tmp_path / "a.txt") == "hello"
        with pytest.raises(PersistenceError) as exc:
            read_text(tmp_path / "missing.txt")
        assert exc.value.detail["path"] == str(tmp_path / "missing.txt")


# ========== Logging ==========


@pytest.mark.unit
class TestLogging:
    def test_handler_installed_once(self, monkeypatch):
        root = logging.getLogger()
        monkeypatch.setattr(logs, "_configured", False)
        monkeypatch.setattr(root, "handlers", list(root.handlers))
        monkeypatch.setattr(root, "level", root.level)
        before = len(root.handlers)

        logs.configure_logging("debug")
        logs.configure_logging("ERROR")

        assert len(root.handlers) == before + 1
        assert root.level == logging.ERROR


# ========== Instrumentation ==========


@pytest.mark.unit
class TestEvaluationCounter:
    def test_counts_by_key(self):
        counter = EvaluationCounter()

        counter.tick()
        counter.tick("lambda", n=3)

        assert counter.counts["rate"] == 1
        assert counter.total == 4
        counter.reset()
        assert counter.total == 0
