"""BIA commands."""

from pathlib import Path
from typing import Optional

import typer

from app.common.cli import console, exit_with, report_table
from app.common.errors import SimulationError

from .repository import ScheduleRepository
from .service import alignment_ratio, build_block, verify_alignment, verify_decodability

router = typer.Typer()


@router.command("verify")
def verify(
    L: int = typer.Option(..., "--L", help="Number of APs / reception modes"),
    G: int = typer.Option(..., "--G", help="Number of groups"),
    schedule_out: Optional[Path] = typer.Option(None, "--schedule-out", help="Write the slot schedule as CSV"),
):
    """
    Build the (L, G) transmission block and check decodability and alignment.

    Exits 1 if either check fails.
    """
    try:
        block = build_block(L, G)
        reports = [verify_decodability(block), verify_alignment(block)]
        if schedule_out is not None:
            ScheduleRepository().save(block, schedule_out)
    except SimulationError as e:
        raise exit_with(e)

    console.print(
        f"L={L} G={G}: {block.num_slots} slots, "
        f"{block.blocks_per_group} alignment blocks per group, prelog {alignment_ratio(L, G)}"
    )
    console.print(report_table(reports, title="BIA conditions"))
    if not all(r.passed for r in reports):
        raise typer.Exit(code=1)
