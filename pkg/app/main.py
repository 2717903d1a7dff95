from typing import Optional

import typer

from app.common.config import settings
from app.common.logs import configure_logging
from app.features.bia.router import router as bia_router
from app.features.simharness.router import router as simharness_router

app = typer.Typer(
    name=settings.APP_NAME,
    help="Laser OWC NOMA simulator with BIA precoding and dynamic power allocation",
    no_args_is_help=True,
    add_completion=False,
)


def include_router(target: typer.Typer, router: typer.Typer) -> None:
    """Mount a feature router's commands at the top level."""
    target.registered_commands.extend(router.registered_commands)


@app.callback()
def main(
    log_level: Optional[str] = typer.Option(
        None, "--log-level", help="Overrides LOG_LEVEL (DEBUG, INFO, WARNING, ...)"
    ),
):
    configure_logging(log_level)


@app.command("version")
def version():
    """Print the application version."""
    typer.echo(f"{settings.APP_NAME} {settings.APP_VERSION}")


# Include routers from feature modules
include_router(app, simharness_router)
include_router(app, bia_router)


if __name__ == "__main__":
    app()
