"""Campaign structure on a 2000-node preferential-attachment graph."""

import networkx as nx
import numpy as np
import pytest
from scipy.stats import spearmanr

from app.models.models import CentralityMeasure, QuadraticCost, SeedOptParams, SweepParams, TimeGrid
from app.services.centrality_service import centrality_service
from app.services.dynamics_service import dynamics_service
from app.services.network_service import network_service
from app.services.seed_service import seed_service
from app.services.sweep_service import sweep_service

pytestmark = pytest.mark.slow

GRID = TimeGrid(T=1.0, K=200)
PARAMS = SweepParams(u_th=1e-7, max_iter=1000)
GROUPS = 10


@pytest.fixture(scope="module")
def campaign():
    graph = nx.barabasi_albert_graph(2000, 3, seed=7)
    network = network_service.from_edges(2000, list(graph.edges()))
    scores = centrality_service.compute(network, CentralityMeasure.DEGREE)
    grouping = centrality_service.group_by_centrality(scores, GROUPS)
    seed = np.full(2000, 0.01)
    beta = dynamics_service.calibrate_beta(network, seed, 0.10, GRID)
    return network, grouping, seed, beta


def solve(campaign, b):
    network, grouping, seed, beta = campaign
    cost = QuadraticCost(b=b, p=grouping.p)
    control, _, _, report = sweep_service.fbs_solve(network, grouping, seed, beta, cost, PARAMS, GRID)
    assert report.converged
    resource = [dynamics_service.per_capita_resource(control, cost, m) for m in range(GROUPS)]
    return control, np.array(resource)


def test_expensive_campaign_favours_central_groups(campaign):
    control, resource = solve(campaign, 25.0)
    rho, _ = spearmanr(np.arange(GROUPS), resource)
    assert rho >= 0.8
    assert np.diff(control.u, axis=1).max() <= 1e-6


def test_cheap_campaign_favours_peripheral_groups(campaign):
    control, resource = solve(campaign, 0.1)
    assert resource[0] > resource[-1]
    assert np.diff(control.u, axis=1).max() <= 1e-6


def seed_mass_by_group(campaign, budget):
    network, grouping, _, beta = campaign
    seed, _, _ = seed_service.joint_optimize(
        network, grouping, budget, beta, QuadraticCost(b=25.0, p=grouping.p),
        PARAMS, GRID, SeedOptParams(outer_iterations=10, n_jobs=-1),
    )
    return seed.mass


def test_joint_seeds_move_with_the_budget(campaign):
    small = seed_mass_by_group(campaign, 0.01)
    assert small[-3:].sum() >= 0.7 * small.sum()

    large = seed_mass_by_group(campaign, 0.4)
    assert large[:3].sum() > small[:3].sum()
