"""Console output helpers shared by the command routers."""

from typing import Iterable

import typer
from rich.console import Console
from rich.table import Table

from app.common.errors import SimulationError
from app.common.reports import Report

console = Console()
err_console = Console(stderr=True)


def exit_with(error: SimulationError) -> typer.Exit:
    """Print a SimulationError and return the Exit carrying its exit code.

    Usage:
        except SimulationError as e:
            raise exit_with(e)
    """
    err_console.print(f"[bold red]{error.error}[/bold red]: {error.message}")
    context = {k: v for k, v in error.detail.items() if k not in ("error", "message")}
    if context:
        err_console.print(context)
    return typer.Exit(code=error.exit_code)


def report_table(reports: Iterable[Report], title: str = "Checks") -> Table:
    table = Table(title=title)
    table.add_column("check")
    table.add_column("result")
    table.add_column("details")
    for report in reports:
        status = "[green]pass[/green]" if report.passed else "[red]FAIL[/red]"
        table.add_row(report.details.split(":")[0], status, report.details)
    return table
