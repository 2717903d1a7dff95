"""Pytest configuration and shared fixtures."""

import json
import math

import numpy as np
import pytest
from typer.testing import CliRunner

from app.common.cache import cache_service
from app.features.channel.schemas import BeamParams, OpticalFrontEnd
from app.features.geometry.schemas import AccessPoint, DetectorGeometry, Room, Vec3
from app.features.power_alloc.schemas import QoSBounds, SolverConfig
from app.features.simharness.schemas import ScenarioConfig
from tests.utils.factories import small_scenario, small_scenario_data


@pytest.fixture(autouse=True)
def clear_caches():
    """Every test starts with empty memoization caches."""
    cache_service.clear_all()
    yield
    cache_service.clear_all()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def room() -> Room:
    return Room()


@pytest.fixture
def zenith_detector() -> DetectorGeometry:
    """Two photodiodes facing straight up with a wide field of view."""
    return DetectorGeometry(
        num_photodiodes=2,
        elevations=[0.0, 0.0],
        azimuths=[0.0, math.pi],
        area_per_pd=15e-6,
        fov=math.radians(80.0),
    )


@pytest.fixture
def ceiling_ap() -> AccessPoint:
    return AccessPoint(id=0, position=Vec3(x=4.0, y=4.0, z=3.0))


@pytest.fixture
def wide_beam() -> BeamParams:
    """W_0 = 1 µm spreads to about 1.5 m at 3 m, so most users see several APs."""
    return BeamParams(w0=1e-6)


@pytest.fixture
def front_end() -> OpticalFrontEnd:
    return OpticalFrontEnd()


@pytest.fixture
def open_qos() -> QoSBounds:
    """No upper rate bound."""
    return QoSBounds(r_min=0.0, r_max=math.inf, p_s_threshold=0.01)


@pytest.fixture
def solver_config() -> SolverConfig:
    return SolverConfig()


@pytest.fixture
def scenario() -> ScenarioConfig:
    return small_scenario()


@pytest.fixture
def cli() -> CliRunner:
    return CliRunner()


@pytest.fixture
def scenario_file(tmp_path):
    """Write a small scenario JSON document; overrides merge into its sections."""

    def _write(name: str = "scenario.json", **overrides):
        path = tmp_path / name
        path.write_text(json.dumps(small_scenario_data(**overrides)))
        return path

    return _write
