import logging
from typing import Annotated, Optional

import typer

from app import __interface_version__, __version__
from app.routers.common import cli_state, configure_logging

# Import command routers
from app.routers.centrality import router as centrality_router
from app.routers.graph import router as graph_router
from app.routers.solve import router as solve_router
from app.routers.heuristics import router as heuristics_router
from app.routers.mc import router as mc_router
from app.routers.sweep import router as sweep_router

app = typer.Typer(
    name="epictrl",
    help="Optimal campaign controls for SI information spreading on networks.",
    add_completion=False,
    no_args_is_help=True,
)


def version_callback(value: bool):
    if value:
        typer.echo(f"epictrl {__version__} (interface {__interface_version__})")
        raise typer.Exit()


@app.callback()
def main(
    version: Annotated[
        Optional[bool],
        typer.Option("--version", callback=version_callback, is_eager=True, help="Print the version and exit"),
    ] = None,
    log_level: Annotated[Optional[str], typer.Option("--log-level", help="DEBUG, INFO, WARNING or ERROR")] = None,
):
    if log_level is not None and not isinstance(logging.getLevelName(log_level.upper()), int):
        raise typer.BadParameter(f"unknown log level {log_level}", param_hint="--log-level")
    cli_state["log_level"] = log_level
    configure_logging(log_level)


# Register routers
for router in (
    centrality_router,
    graph_router,
    solve_router,
    heuristics_router,
    mc_router,
    sweep_router,
):
    app.registered_commands.extend(router.registered_commands)


if __name__ == "__main__":
    app()
