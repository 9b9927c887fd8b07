import sys

import typer

from app.routers import options as opt
from app.routers.common import build_config, run_command
from app.services.experiment_service import experiment_service
from app.services.export_service import export_service

router = typer.Typer()


@router.command("centrality")
def centrality(
    graph: opt.Graph = None,
    measure: opt.Measure = None,
    betweenness: opt.Betweenness = None,
    pagerank_eta: opt.PagerankEta = None,
    pagerank_delta: opt.PagerankDelta = None,
    giant: opt.Giant = None,
    n_jobs: opt.NJobs = None,
    config: opt.ConfigFile = None,
):
    """Print node,score lines for one centrality measure."""

    def action():
        cfg = build_config(
            config, graph=graph, measure=measure, betweenness=betweenness,
            pagerank_eta=pagerank_eta, pagerank_delta=pagerank_delta, giant=giant, n_jobs=n_jobs,
        )
        scores = experiment_service.run_centrality(cfg)
        export_service.write_centrality(scores, sys.stdout)

    run_command(action)
