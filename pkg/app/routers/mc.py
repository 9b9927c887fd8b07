from typing import Annotated, Optional

import typer

from app.models.models import SolverKind
from app.routers import options as opt
from app.routers.common import build_config, run_command
from app.services.experiment_service import experiment_service

router = typer.Typer()


@router.command("mc-validate")
def mc_validate(
    solver: Annotated[
        Optional[SolverKind], typer.Option("--solver", help="Strategy whose control is simulated; mc = none")
    ] = None,
    runs: opt.Runs = None,
    substeps: opt.Substeps = None,
    rng_seed: opt.RngSeed = None,
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
    out: opt.Out = None,
    n_jobs: opt.NJobs = None,
    config: opt.ConfigFile = None,
):
    """Monte-Carlo reach of a strategy next to its mean-field reach."""

    def action():
        cfg = build_config(
            config, solver=solver, runs=runs, substeps=substeps, rng_seed=rng_seed, graph=graph,
            giant=giant, measure=measure, betweenness=betweenness, groups=groups, beta=beta,
            target_reach=target_reach, spontaneous_rate=spontaneous_rate, b=b, horizon=horizon,
            steps=steps, seed_mode=seed_mode, seed_frac=seed_frac, seed_vector=seed_vector,
            budget=budget, u_th=u_th, max_iter=max_iter, damping=damping, out=out, n_jobs=n_jobs,
        )
        outcome = experiment_service.run_mc(cfg)
        if cfg.out is None:
            typer.echo(outcome.record.model_dump_json(indent=2))

    run_command(action)
