from typing import Annotated

import typer

from app.core.exceptions import ConfigError
from app.models.models import SolverKind
from app.routers import options as opt
from app.routers.common import build_config, run_command
from app.services.experiment_service import experiment_service

router = typer.Typer()

KINDS = {"static": SolverKind.STATIC, "two-stage": SolverKind.TWO_STAGE, "two_stage": SolverKind.TWO_STAGE}


@router.command("heuristic")
def heuristic(
    kind: Annotated[str, typer.Option("--kind", help="static or two-stage")] = "static",
    budget: opt.Budget = None,
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
    u_max: opt.UMax = None,
    golden_tol: opt.GoldenTol = None,
    max_evaluations: opt.MaxEvaluations = None,
    out: opt.Out = None,
    rng_seed: opt.RngSeed = None,
    n_jobs: opt.NJobs = None,
    config: opt.ConfigFile = None,
):
    """Best static or two-stage level, or the level spending --budget."""

    def action():
        if kind not in KINDS:
            raise ConfigError(f"--kind must be static or two-stage, got {kind}")
        cfg = build_config(
            config, budget=budget, graph=graph, giant=giant, measure=measure, betweenness=betweenness,
            groups=groups, beta=beta, target_reach=target_reach, spontaneous_rate=spontaneous_rate,
            b=b, horizon=horizon, steps=steps, seed_mode=seed_mode, seed_frac=seed_frac,
            seed_vector=seed_vector, u_max=u_max, golden_tol=golden_tol,
            max_evaluations=max_evaluations, out=out, rng_seed=rng_seed, n_jobs=n_jobs,
            solver=KINDS[kind],
        )
        outcome = experiment_service.run_heuristic(cfg)
        if cfg.out is None:
            typer.echo(outcome.record.model_dump_json(indent=2))

    run_command(action)
