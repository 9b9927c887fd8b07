import typer

from app.models.models import SeedMode, SolverKind
from app.routers import options as opt
from app.routers.common import build_config, run_command
from app.services.experiment_service import experiment_service

router = typer.Typer()


@router.command("solve")
def solve(
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
    u_th: opt.UTh = None,
    max_iter: opt.MaxIter = None,
    damping: opt.Damping = None,
    stationarity_tol: opt.StationarityTol = None,
    out: opt.Out = None,
    rng_seed: opt.RngSeed = None,
    n_jobs: opt.NJobs = None,
    config: opt.ConfigFile = None,
):
    """Optimal group controls for a fixed seed (forward-backward sweep)."""

    def action():
        cfg = build_config(
            config, graph=graph, giant=giant, measure=measure, betweenness=betweenness,
            groups=groups, beta=beta, target_reach=target_reach, spontaneous_rate=spontaneous_rate,
            b=b, horizon=horizon, steps=steps, seed_mode=seed_mode, seed_frac=seed_frac,
            seed_vector=seed_vector, u_th=u_th, max_iter=max_iter, damping=damping,
            stationarity_tol=stationarity_tol, out=out, rng_seed=rng_seed, n_jobs=n_jobs,
            solver=SolverKind.FBS,
        )
        outcome = experiment_service.run_solve(cfg)
        if cfg.out is None:
            typer.echo(outcome.record.model_dump_json(indent=2))
        return outcome.converged

    run_command(action)


@router.command("solve-joint")
def solve_joint(
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
    seed_frac: opt.SeedFrac = None,
    u_th: opt.UTh = None,
    max_iter: opt.MaxIter = None,
    damping: opt.Damping = None,
    stationarity_tol: opt.StationarityTol = None,
    outer_iterations: opt.OuterIterations = None,
    fd_step: opt.FdStep = None,
    out: opt.Out = None,
    rng_seed: opt.RngSeed = None,
    n_jobs: opt.NJobs = None,
    config: opt.ConfigFile = None,
):
    """Seed allocation and controls optimized together under the seed budget --seed-frac."""

    def action():
        cfg = build_config(
            config, graph=graph, giant=giant, measure=measure, betweenness=betweenness,
            groups=groups, beta=beta, target_reach=target_reach, spontaneous_rate=spontaneous_rate,
            b=b, horizon=horizon, steps=steps, seed_frac=seed_frac, u_th=u_th, max_iter=max_iter,
            damping=damping, stationarity_tol=stationarity_tol, outer_iterations=outer_iterations,
            fd_step=fd_step, out=out, rng_seed=rng_seed, n_jobs=n_jobs,
            seed_mode=SeedMode.JOINT, solver=SolverKind.JOINT,
        )
        outcome = experiment_service.run_solve_joint(cfg)
        if cfg.out is None:
            typer.echo(outcome.record.model_dump_json(indent=2))
        return outcome.converged

    run_command(action)


@router.command("solve-budget")
def solve_budget(
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
    u_th: opt.UTh = None,
    max_iter: opt.MaxIter = None,
    damping: opt.Damping = None,
    mu_lo: opt.MuLo = None,
    mu_hi: opt.MuHi = None,
    mu_th: opt.MuTh = None,
    spend_rtol: opt.SpendRtol = None,
    out: opt.Out = None,
    rng_seed: opt.RngSeed = None,
    n_jobs: opt.NJobs = None,
    config: opt.ConfigFile = None,
):
    """Controls maximizing the reach for a total spend of --budget."""

    def action():
        cfg = build_config(
            config, budget=budget, graph=graph, giant=giant, measure=measure, betweenness=betweenness,
            groups=groups, beta=beta, target_reach=target_reach, spontaneous_rate=spontaneous_rate,
            b=b, horizon=horizon, steps=steps, seed_mode=seed_mode, seed_frac=seed_frac,
            seed_vector=seed_vector, u_th=u_th, max_iter=max_iter, damping=damping,
            mu_lo=mu_lo, mu_hi=mu_hi, mu_th=mu_th, spend_rtol=spend_rtol,
            out=out, rng_seed=rng_seed, n_jobs=n_jobs, solver=SolverKind.BUDGET,
        )
        outcome = experiment_service.run_solve_budget(cfg)
        if cfg.out is None:
            typer.echo(outcome.record.model_dump_json(indent=2))
        return outcome.converged

    run_command(action)
