"""Monte Carlo harness.

One drop places users, builds their channels (with blockage), classifies
and pairs them, then hands the shared DropContext to every requested
scheme. Drops are seeded from (seed, drop index) alone, so a sweep gives
the same numbers serially and under joblib.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed
from pydantic import ValidationError
from tqdm import tqdm

from app.common.errors import ConfigurationError
from app.common.storage import read_text
from app.features.baselines.schemas import DropContext, SchemeId, SchemeOutcome
from app.features.baselines.service import bia_group_models, get_scheme
from app.features.channel.schemas import ChannelMatrix, NoiseModel
from app.features.channel.service import (
    aggregate_received_power,
    ap_power,
    apply_blockage,
    build_channel_matrix,
    check_modulation_depth,
    noise_variance,
    per_vcsel_power,
)
from app.features.geometry.schemas import (
    AccessPoint,
    Classification,
    ClassificationRule,
    DetectorGeometry,
    UserTerminal,
    Vec3,
)
from app.features.geometry.service import classify_users, place_ap_grid
from app.features.grouping.service import build_weight_matrix, optimal_matching
from app.features.noma_rate.service import signal_scale
from app.features.power_alloc.schemas import NetworkSolution
from app.features.power_alloc.service import DynamicPowerAllocator

from .metrics import energy_efficiency, jain_fairness
from .schemas import MetricsRecord, ScenarioConfig, SweepAxis, SweepRow, SweepSpec

logger = logging.getLogger(__name__)

PLACEMENT, BLOCKAGE, ORDER = range(3)


# ==================== Configuration ====================


def load_config(path: Union[str, Path]) -> ScenarioConfig:
    """Parse and validate a scenario JSON document.

    Raises:
        ConfigurationError: If the document does not match the schema.
        PersistenceError: If the file cannot be read.
    """
    try:
        return ScenarioConfig.model_validate_json(read_text(path))
    except ValidationError as e:
        raise ConfigurationError(
            f"Invalid scenario {path}: {e.error_count()} error(s)",
            path=str(path),
            errors=[{"loc": list(err["loc"]), "msg": err["msg"]} for err in e.errors()],
        ) from e


def _override(cfg: ScenarioConfig, section: Optional[str], **fields) -> ScenarioConfig:
    data = cfg.model_dump()
    if section is None:
        data.update(fields)
    else:
        data[section].update(fields)
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(f"Override {fields} is invalid: {e.error_count()} error(s)") from e


# ==================== Network ====================


@dataclass(frozen=True)
class Network:
    aps: List[AccessPoint]
    ap_powers: np.ndarray
    detector: DetectorGeometry

    @property
    def p_max(self) -> float:
        return float(self.ap_powers.sum())


def build_network(cfg: ScenarioConfig) -> Network:
    """AP grid, per-AP optical powers and the user detector.

    P_l = L_v²·P_tr with P_tr the eye-safe per-VCSEL power unless
    ``per_beam_power`` overrides it.
    """
    check_modulation_depth(cfg.safety)
    aps = place_ap_grid(cfg.room, cfg.ap_grid.rows, cfg.ap_grid.cols, cfg.ap_grid.array_side)
    p_tr = cfg.per_beam_power if cfg.per_beam_power is not None else per_vcsel_power(cfg.beam, cfg.safety)
    powers = np.full(len(aps), ap_power(p_tr, cfg.ap_grid.array_side))
    return Network(aps=aps, ap_powers=powers, detector=cfg.detector.build(len(aps)))


def place_users(cfg: ScenarioConfig, detector: DetectorGeometry, rng: np.random.Generator) -> List[UserTerminal]:
    K = cfg.users.count
    if cfg.users.placement == "fixed":
        assert cfg.users.positions is not None
        xy = np.asarray(cfg.users.positions[:K], dtype=float)
    else:
        xy = np.column_stack([rng.uniform(0.0, cfg.room.width, K), rng.uniform(0.0, cfg.room.depth, K)])
    return [
        UserTerminal(id=k, position=Vec3(x=float(x), y=float(y), z=cfg.users.height), detector=detector)
        for k, (x, y) in enumerate(xy)
    ]


def drop_streams(seed: int, drop_index: int) -> List[np.random.SeedSequence]:
    """Independent child streams for placement, blockage and group order."""
    return np.random.SeedSequence([seed, drop_index]).spawn(3)


# ==================== Drops ====================


def _classify(
    cfg: ScenarioConfig,
    users: List[UserTerminal],
    aps: List[AccessPoint],
    received: Dict[int, float],
) -> Tuple[Classification, List[str]]:
    classification = classify_users(users, aps, cfg.classification, received_power=received)
    warnings = list(classification.warnings)
    if warnings:
        logger.warning(f"{cfg.classification.kind} gave {warnings}; falling back to median_split")
        classification = classify_users(users, aps, ClassificationRule(), received_power=received)
        warnings.append("classification_fallback")
    return classification, warnings


def prepare_drop(cfg: ScenarioConfig, drop_index: int = 0, network: Optional[Network] = None) -> DropContext:
    """Everything up to (and including) grouping for one drop."""
    network = network or build_network(cfg)
    placement, blockage, order = drop_streams(cfg.seed, drop_index)
    users = place_users(cfg, network.detector, np.random.default_rng(placement))
    L = len(network.aps)
    mask = apply_blockage(np.random.default_rng(blockage), cfg.blockage_probability, len(users), L)

    channels: Dict[int, ChannelMatrix] = {}
    for n, user in enumerate(users):
        channels[user.id] = build_channel_matrix(user, network.aps, cfg.beam, blockage_mask=mask[n])
    received = {u: aggregate_received_power(ch, network.ap_powers) for u, ch in channels.items()}

    classification, warnings = _classify(cfg, users, network.aps, received)
    for u in classification.weak + classification.strong:
        if u.is_virtual:
            channels[u.id] = build_channel_matrix(u, network.aps, cfg.beam)
            received[u.id] = 0.0
    sigma2 = {u: noise_variance(cfg.front_end, cfg.noise, p) for u, p in received.items()}

    assignment = optimal_matching(build_weight_matrix(classification.weak, classification.strong))
    return DropContext(
        aps=network.aps,
        users=users,
        channels=channels,
        sigma2=sigma2,
        classification=classification,
        assignment=assignment,
        ap_powers=network.ap_powers,
        p_max=network.p_max,
        front_end=cfg.front_end,
        qos=cfg.qos,
        T=cfg.allocation.T,
        solver=cfg.allocation.solver,
        baselines=cfg.baselines,
        order_seed=int(order.generate_state(1)[0]),
        warnings=warnings,
    )


def make_record(cfg: ScenarioConfig, drop_index: int, outcome: SchemeOutcome, drop: DropContext) -> MetricsRecord:
    rate = outcome.sum_rate
    bps = rate * cfg.front_end.bandwidth
    flags = list(drop.warnings) + list(outcome.flags)
    if rate == 0.0:
        flags.append("zero_rate")
    return MetricsRecord(
        scheme=outcome.scheme.value,
        seed=cfg.seed,
        drop_index=drop_index,
        num_users=len(drop.users),
        sum_rate=rate,
        sum_rate_bps=bps,
        jain=jain_fairness(outcome.rates),
        energy_eff=energy_efficiency(bps, outcome.consumed_power),
        consumed_power=outcome.consumed_power,
        groups_served=outcome.groups_served,
        t_star=outcome.t_star,
        flags=flags,
    )


def run_drop(cfg: ScenarioConfig, scheme: Union[SchemeId, str], drop_index: int = 0) -> MetricsRecord:
    """Metrics of one scheme on drop *drop_index*.

    An infeasible allocation is reported through the record's flags.
    """
    drop = prepare_drop(cfg, drop_index)
    return make_record(cfg, drop_index, get_scheme(SchemeId(scheme)).evaluate(drop), drop)


def run_schemes(
    cfg: ScenarioConfig,
    schemes: Sequence[Union[SchemeId, str]],
    drop_index: int = 0,
    network: Optional[Network] = None,
) -> List[MetricsRecord]:
    """Several schemes on one shared drop."""
    drop = prepare_drop(cfg, drop_index, network)
    return [make_record(cfg, drop_index, get_scheme(SchemeId(s)).evaluate(drop), drop) for s in schemes]


def allocate_drop(cfg: ScenarioConfig, drop_index: int = 0) -> Tuple[DropContext, NetworkSolution]:
    """Dynamic allocation of one drop with its full DP tables.

    Raises:
        InfeasibleNetworkError: If no (groups, level) cell is admissible.
    """
    drop = prepare_drop(cfg, drop_index)
    assert drop.assignment is not None
    models = bia_group_models(drop)
    user_ids = [u for pair in drop.assignment.pairs for u in pair]
    allocator = DynamicPowerAllocator(drop.qos, T=drop.T, cfg=drop.solver)
    solution = allocator.allocate(
        models, drop.p_max, rng=np.random.default_rng(drop.order_seed), user_ids=user_ids, seed=cfg.seed,
    )
    return drop, solution


# ==================== Sweeps ====================


def snr_noise(cfg: ScenarioConfig, snr_db: float) -> NoiseModel:
    """Fixed σ² giving every user the median SNR cρ²f²P_max/(K σ²) = snr_db."""
    network = build_network(cfg)
    snr = 10.0 ** (snr_db / 10.0)
    sigma2 = signal_scale(cfg.front_end) * network.p_max / (cfg.users.count * snr)
    return NoiseModel(mode="fixed_sigma", sigma2=sigma2)


def apply_axis(cfg: ScenarioConfig, axis: SweepAxis, value: float) -> ScenarioConfig:
    """Scenario at one point of a sweep axis."""
    if axis == "num_users":
        return _override(cfg, "users", count=int(round(value)))
    if axis == "blockage":
        return _override(cfg, None, blockage_probability=value)
    if axis == "snr":
        return _override(cfg, None, noise=snr_noise(cfg, value).model_dump())
    if axis == "beam_waist":
        return _override(cfg, "beam", w0=value)
    if axis == "tx_power":
        return _override(cfg, None, per_beam_power=value)
    raise ConfigurationError(f"Unknown sweep axis {axis!r}")


def _drop_records(cfg: ScenarioConfig, schemes: Sequence[str], drop_index: int) -> List[MetricsRecord]:
    return run_schemes(cfg, schemes, drop_index)


def run_ensemble(
    cfg: ScenarioConfig,
    spec: SweepSpec,
    schemes: Sequence[Union[SchemeId, str]],
    progress: bool = False,
) -> Dict[float, List[MetricsRecord]]:
    """Records of every drop at every axis value, keyed by value."""
    scheme_ids = [SchemeId(s).value for s in schemes]
    points = {value: apply_axis(cfg, spec.axis, value) for value in spec.values}
    tasks = [(value, d) for value in spec.values for d in range(spec.drops)]
    logger.info(f"Sweep {spec.axis}: {len(spec.values)} points x {spec.drops} drops x {len(scheme_ids)} schemes")

    results = Parallel(n_jobs=cfg.workers)(
        delayed(_drop_records)(points[value], scheme_ids, d)
        for value, d in tqdm(tasks, desc=f"sweep {spec.axis}", disable=not progress)
    )
    by_value: Dict[float, List[MetricsRecord]] = {value: [] for value in spec.values}
    for (value, _), records in zip(tasks, results):
        by_value[value].extend(records)
    return by_value


def summarize(value: float, scheme: str, records: Sequence[MetricsRecord]) -> SweepRow:
    rates = np.array([r.sum_rate for r in records])
    stderr = float(rates.std(ddof=1) / np.sqrt(rates.size)) if rates.size > 1 else 0.0
    return SweepRow(
        axis=value,
        scheme=scheme,
        mean_rate=float(rates.mean()),
        stderr=stderr,
        jain=float(np.mean([r.jain for r in records])),
        ee=float(np.mean([r.energy_eff for r in records])),
        groups=float(np.mean([r.groups_served for r in records])),
        t_star=float(np.mean([r.t_star for r in records])),
    )


def sweep(
    cfg: ScenarioConfig,
    spec: SweepSpec,
    schemes: Sequence[Union[SchemeId, str]],
    progress: bool = False,
) -> List[SweepRow]:
    """Mean ± standard error per (axis value, scheme), in value then scheme order."""
    return summarize_sweep(spec, schemes, run_ensemble(cfg, spec, schemes, progress=progress))


def summarize_sweep(
    spec: SweepSpec,
    schemes: Sequence[Union[SchemeId, str]],
    by_value: Dict[float, List[MetricsRecord]],
) -> List[SweepRow]:
    rows = []
    for value in spec.values:
        for scheme in [SchemeId(s).value for s in schemes]:
            records = [r for r in by_value[value] if r.scheme == scheme]
            rows.append(summarize(value, scheme, records))
    return rows
