from pathlib import Path
from typing import Annotated, Optional

import typer

from app.routers import options as opt
from app.routers.common import configure_logging, cli_state, run_command
from app.services.experiment_service import experiment_service

router = typer.Typer()


@router.command("prepare-graph")
def prepare_graph(
    graph: Annotated[Path, typer.Option("--graph", help="Raw edge-list file")],
    out: Annotated[Path, typer.Option("--out", help="Directory for graph.txt and relabel_map.csv")],
    giant: opt.Giant = None,
    bfs_start: Annotated[Optional[int], typer.Option("--bfs-start", help="BFS start node (relabeled id)")] = None,
    bfs_size: Annotated[Optional[int], typer.Option("--bfs-size", help="Nodes kept by the BFS sample")] = None,
):
    """Giant component and/or BFS sample of a raw edge list."""
    configure_logging(cli_state["log_level"])

    def action():
        experiment_service.prepare_graph(
            graph, out, giant=True if giant is None else giant, bfs_start=bfs_start, bfs_size=bfs_size
        )

    run_command(action)
