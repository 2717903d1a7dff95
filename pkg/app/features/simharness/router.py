"""Simulation commands: run, sweep and oracle."""

import logging
from pathlib import Path
from typing import List, Optional

import typer
from rich.table import Table

from app.common.cli import console, exit_with, report_table
from app.common.errors import ConfigurationError, InfeasibleNetworkError, SimulationError
from app.features.baselines.schemas import SchemeId

from .oracles import run_oracles
from .repository import ResultRepository
from .schemas import MetricsRecord, SweepSpec
from .service import allocate_drop, load_config, run_drop, run_ensemble, summarize_sweep

logger = logging.getLogger(__name__)

router = typer.Typer()


def _parse_floats(raw: str) -> List[float]:
    try:
        return [float(v) for v in raw.split(",") if v.strip()]
    except ValueError as e:
        raise ConfigurationError(f"Cannot parse values {raw!r}: {e}") from e


def _parse_schemes(raw: str) -> List[SchemeId]:
    try:
        return [SchemeId(s.strip()) for s in raw.split(",") if s.strip()]
    except ValueError as e:
        choices = ", ".join(s.value for s in SchemeId)
        raise ConfigurationError(f"Unknown scheme in {raw!r}; choose from {choices}") from e


def _record_table(record: MetricsRecord) -> Table:
    table = Table(title=f"{record.scheme} (seed {record.seed}, drop {record.drop_index})")
    table.add_column("metric")
    table.add_column("value", justify="right")
    for key in ("sum_rate", "sum_rate_bps", "jain", "energy_eff", "consumed_power", "groups_served", "t_star"):
        table.add_row(key, f"{getattr(record, key):.6g}")
    table.add_row("flags", ", ".join(record.flags) or "-")
    return table


@router.command("run")
def run(
    config: Path = typer.Option(..., "--config", help="Scenario JSON file"),
    scheme: SchemeId = typer.Option(SchemeId.DYNAMIC_NOMA, "--scheme"),
    drop: int = typer.Option(0, "--drop", min=0, help="Drop index"),
    tables_out: Optional[Path] = typer.Option(
        None, "--tables-out", help="Directory for the DP tables and pairing (dynamic_noma only)"
    ),
):
    """
    Run one drop of one scheme and print its metrics.

    Exits 2 when no allocation is feasible.
    """
    try:
        cfg = load_config(config)
        record = run_drop(cfg, scheme, drop)
        if tables_out is not None and scheme == SchemeId.DYNAMIC_NOMA:
            context, solution = allocate_drop(cfg, drop)
            repository = ResultRepository()
            repository.save_tables(solution.tables, tables_out)
            if context.assignment is not None:
                repository.save_assignment(context.assignment, tables_out / "grouping.csv")
    except SimulationError as e:
        raise exit_with(e)

    console.print(_record_table(record))
    if "infeasible_network" in record.flags:
        raise typer.Exit(code=InfeasibleNetworkError.exit_code)


@router.command("sweep")
def sweep_command(
    config: Path = typer.Option(..., "--config", help="Scenario JSON file"),
    axis: str = typer.Option(..., "--axis", help="num_users | blockage | snr | beam_waist | tx_power"),
    values: str = typer.Option(..., "--values", help="Comma-separated axis values (SI units, dB for snr)"),
    schemes: str = typer.Option(",".join(s.value for s in SchemeId), "--schemes"),
    out: Path = typer.Option(..., "--out", help="CSV output path"),
    drops: Optional[int] = typer.Option(None, "--drops", min=1, help="Drops per point (default from config)"),
    records_out: Optional[Path] = typer.Option(None, "--records-out", help="Also write per-drop records"),
    progress: bool = typer.Option(False, "--progress/--no-progress"),
):
    """
    Sweep one axis and write mean ± stderr per (value, scheme).
    """
    try:
        cfg = load_config(config)
        try:
            spec = SweepSpec(axis=axis, values=_parse_floats(values), drops=drops or cfg.drops)
        except ValueError as e:
            raise ConfigurationError(f"Invalid sweep: {e}") from e
        scheme_ids = _parse_schemes(schemes)
        by_value = run_ensemble(cfg, spec, scheme_ids, progress=progress)
        rows = summarize_sweep(spec, scheme_ids, by_value)
        repository = ResultRepository()
        repository.save_sweep(rows, out)
        if records_out is not None:
            repository.save_records([r for recs in by_value.values() for r in recs], records_out)
    except SimulationError as e:
        raise exit_with(e)

    console.print(f"Wrote {len(rows)} rows to {out}")
    if rows and all(r.mean_rate == 0.0 for r in rows):
        logger.warning("Every sweep point has zero mean rate")


@router.command("oracle")
def oracle(
    seed: int = typer.Option(0, "--seed"),
    scale: float = typer.Option(1.0, "--scale", min=0.01, help="Multiplier on instance counts"),
):
    """
    Compare matching, the group solver and the DP against brute force.

    Exits 1 if any suite reports a mismatch.
    """
    try:
        reports = run_oracles(seed=seed, scale=scale)
    except SimulationError as e:
        raise exit_with(e)
    console.print(report_table(reports, title="Oracle suites"))
    if not all(r.passed for r in reports):
        raise typer.Exit(code=1)
