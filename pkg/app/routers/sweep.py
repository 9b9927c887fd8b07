import sys
from typing import Annotated

import typer

from app.models.models import SweepAxis
from app.routers import options as opt
from app.routers.common import build_config, parse_values, run_command
from app.services.experiment_service import experiment_service
from app.services.export_service import export_service

router = typer.Typer()


@router.command("sweep")
def sweep(
    axis: Annotated[SweepAxis, typer.Option("--axis", help="b, beta, M or B")],
    values: Annotated[str, typer.Option("--values", help="Comma-separated axis values")],
    graph: opt.Graph = None,
    giant: opt.Giant = None,
    measure: opt.Measure = None,
    betweenness: opt.Betweenness = None,
    groups: opt.Groups = None,
    beta: opt.Beta = None,
    target_reach: opt.TargetReach = None,
    spontaneous_rate: opt.SpontaneousRate = None,
    b: opt.CostScale = None,
    horizon: opt.Horizon = None,
    steps: opt.Steps = None,
    seed_mode: opt.SeedModeOpt = None,
    seed_frac: opt.SeedFrac = None,
    seed_vector: opt.SeedVectorOpt = None,
    budget: opt.Budget = None,
    u_th: opt.UTh = None,
    max_iter: opt.MaxIter = None,
    damping: opt.Damping = None,
    outer_iterations: opt.OuterIterations = None,
    u_max: opt.UMax = None,
    out: opt.Out = None,
    rng_seed: opt.RngSeed = None,
    n_jobs: opt.NJobs = None,
    config: opt.ConfigFile = None,
):
    """Strategies compared against the best static control along one parameter axis."""

    def action():
        points = parse_values(values)
        cfg = build_config(
            config, graph=graph, giant=giant, measure=measure, betweenness=betweenness,
            groups=groups, beta=beta, target_reach=target_reach, spontaneous_rate=spontaneous_rate,
            b=b, horizon=horizon, steps=steps, seed_mode=seed_mode, seed_frac=seed_frac,
            seed_vector=seed_vector, budget=budget, u_th=u_th, max_iter=max_iter, damping=damping,
            outer_iterations=outer_iterations, u_max=u_max, out=out, rng_seed=rng_seed, n_jobs=n_jobs,
        )
        rows = experiment_service.run_sweep(cfg, axis, points)
        if cfg.out is None:
            export_service.write_sweep_rows(rows, sys.stdout)

    run_command(action)
