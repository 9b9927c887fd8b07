from dataclasses import dataclass
from decouple import config


@dataclass
class Settings:
    # Model
    BETA: float = config("EPICTRL_BETA", default=0.1, cast=float)
    B: float = config("EPICTRL_B", default=25.0, cast=float)
    HORIZON: float = config("EPICTRL_HORIZON", default=1.0, cast=float)
    STEPS: int = config("EPICTRL_STEPS", default=1000, cast=int)
    SEED_FRAC: float = config("EPICTRL_SEED_FRAC", default=0.01, cast=float)
    GROUPS: int = config("EPICTRL_GROUPS", default=10, cast=int)
    CLAMP_WARN: float = config("EPICTRL_CLAMP_WARN", default=1e-9, cast=float)

    # Forward-backward sweep
    U_TH: float = config("EPICTRL_U_TH", default=1e-6, cast=float)
    MAX_ITER: int = config("EPICTRL_MAX_ITER", default=200, cast=int)
    DAMPING: float = config("EPICTRL_DAMPING", default=0.5, cast=float)
    STATIONARITY_TOL: float = config("EPICTRL_STATIONARITY_TOL", default=1e-4, cast=float)
    CONTROL_SANITY_BOUND: float = config("EPICTRL_CONTROL_SANITY_BOUND", default=1e3, cast=float)

    # Centrality
    PAGERANK_ETA: float = config("EPICTRL_PAGERANK_ETA", default=0.85, cast=float)
    PAGERANK_DELTA: float = config("EPICTRL_PAGERANK_DELTA", default=1.0, cast=float)
    PAGERANK_TOL: float = config("EPICTRL_PAGERANK_TOL", default=1e-10, cast=float)
    PAGERANK_MAX_ITER: int = config("EPICTRL_PAGERANK_MAX_ITER", default=10000, cast=int)
    BETWEENNESS_BLOCK: int = config("EPICTRL_BETWEENNESS_BLOCK", default=256, cast=int)

    # Joint seed optimization
    OUTER_ITER: int = config("EPICTRL_OUTER_ITER", default=50, cast=int)
    FD_STEP: float = config("EPICTRL_FD_STEP", default=1e-3, cast=float)

    # Budget bisection
    MU_LOW: float = config("EPICTRL_MU_LOW", default=1e-2, cast=float)
    MU_HIGH: float = config("EPICTRL_MU_HIGH", default=1e2, cast=float)
    MU_TH: float = config("EPICTRL_MU_TH", default=1e-8, cast=float)
    SPEND_RTOL: float = config("EPICTRL_SPEND_RTOL", default=1e-3, cast=float)
    MAX_WIDENING: int = config("EPICTRL_MAX_WIDENING", default=60, cast=int)

    # Heuristics
    U_MAX: float = config("EPICTRL_U_MAX", default=10.0, cast=float)
    GOLDEN_TOL: float = config("EPICTRL_GOLDEN_TOL", default=1e-5, cast=float)
    MAX_EVALUATIONS: int = config("EPICTRL_MAX_EVALUATIONS", default=200, cast=int)

    # Monte-Carlo validation
    MC_RUNS: int = config("EPICTRL_MC_RUNS", default=10000, cast=int)
    MC_SUBSTEPS: int = config("EPICTRL_MC_SUBSTEPS", default=4, cast=int)
    MC_BATCH_SIZE: int = config("EPICTRL_MC_BATCH_SIZE", default=1000, cast=int)

    # Runtime
    N_JOBS: int = config("EPICTRL_N_JOBS", default=1, cast=int)
    LOG_LEVEL: str = config("EPICTRL_LOG_LEVEL", default="INFO")


settings = Settings()
