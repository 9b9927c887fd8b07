import math

import numpy as np
import pytest
from scipy.special import lambertw

from app.core.exceptions import ConfigError
from app.models.models import ControlSchedule, Grouping, HeuristicParams, QuadraticCost, SweepParams
from app.services.adjoint_service import adjoint_service
from app.services.dynamics_service import dynamics_service
from app.services.heuristic_service import heuristic_service
from app.services.sweep_service import sweep_service
from conftest import build, random_graph, single_group, singletons

OMEGA = float(lambertw(1.0).real)


def test_everyone_seeded_needs_no_control(k4, grid200):
    control, state, _, report = sweep_service.fbs_solve(
        k4, single_group(4), np.ones(4), 1.0, QuadraticCost(b=1.0, p=[1.0]), grid=grid200
    )
    assert not control.u.any()
    assert report.J == 1.0
    assert report.converged
    assert state.final.tolist() == [1.0] * 4


def test_isolated_nodes_match_closed_form(grid1000):
    # Nodes never interact, so lambda * s is constant in time and u solves u = exp(-u) / (2b)
    network = build(3, [])
    control, state, _, report = sweep_service.fbs_solve(
        network, single_group(3), np.zeros(3), 1.0, QuadraticCost(b=0.5, p=[1.0]), grid=grid1000
    )
    assert report.converged
    np.testing.assert_allclose(control.u, OMEGA, atol=1e-4)
    assert report.reach == pytest.approx(1.0 - math.exp(-OMEGA), abs=1e-4)


def test_prohibitive_cost_leaves_uncontrolled_reach(k2, grid200):
    control, _, _, report = sweep_service.fbs_solve(
        k2, single_group(2), [0.1, 0.1], 1.0, QuadraticCost(b=1e6, p=[1.0]), grid=grid200
    )
    assert control.u.max() < 1e-6
    uncontrolled = dynamics_service.uncontrolled_reach(k2, [0.1, 0.1], 1.0, grid200)
    assert report.reach == pytest.approx(uncontrolled, abs=1e-6)


def test_converged_solution_is_stationary(grid200):
    network = random_graph(15, 0.2, seed=8)
    grouping = Grouping(group_of=np.arange(15) % 3, M=3)
    cost = QuadraticCost(b=5.0, p=grouping.p)
    params = SweepParams(u_th=1e-9, max_iter=1000)
    control, _, _, report = sweep_service.fbs_solve(
        network, grouping, np.full(15, 0.05), 1.0, cost, params, grid200
    )
    assert report.converged
    assert report.final_control_delta < params.u_th
    assert report.max_stationarity_residual <= params.stationarity_tol
    assert report.J == pytest.approx(report.reach - report.spend, abs=1e-12)
    assert len(report.per_group_spend) == 3
    assert control.u.min() >= 0.0


def assert_decreasing_convex_controls(network, b, grid):
    grouping = singletons(network.node_count)
    seed = np.full(network.node_count, 0.05)
    params = SweepParams(u_th=1e-9, max_iter=2000)
    control, _, adjoint, report = sweep_service.fbs_solve(
        network, grouping, seed, 1.0, QuadraticCost(b=b, p=grouping.p), params, grid
    )
    assert report.converged
    assert np.diff(control.u, axis=1).max() <= 1e-6
    assert np.diff(control.u, n=2, axis=1).min() >= -1e-6
    assert adjoint.x.min() >= -1e-9


@pytest.mark.parametrize("b", [1.0, 25.0])
def test_node_level_controls_are_decreasing_and_convex(b, grid200):
    assert_decreasing_convex_controls(random_graph(12, 0.25, seed=0), b, grid200)


@pytest.mark.slow
@pytest.mark.parametrize("graph_seed", range(10))
@pytest.mark.parametrize("b", [1.0, 25.0])
def test_node_level_controls_on_larger_graphs(graph_seed, b, grid200):
    assert_decreasing_convex_controls(random_graph(30, 0.1, seed=graph_seed), b, grid200)


def test_hamiltonian_is_constant_along_solution(grid200):
    network = random_graph(8, 0.3, seed=6)
    grouping = Grouping(group_of=np.arange(8) % 2, M=2)
    cost = QuadraticCost(b=2.0, p=grouping.p)
    control, state, adjoint, report = sweep_service.fbs_solve(
        network, grouping, np.full(8, 0.1), 1.0, cost, SweepParams(u_th=1e-10, max_iter=1000), grid200
    )
    assert report.converged
    path = adjoint_service.hamiltonian_path(state, adjoint, control, network, grouping, cost, 1.0)
    assert np.ptp(path) <= 1e-3 * np.abs(path).max()


def test_optimal_dominates_heuristics_and_zero(grid200):
    network = random_graph(20, 0.15, seed=9)
    grouping = Grouping(group_of=np.arange(20) % 4, M=4)
    cost = QuadraticCost(b=3.0, p=grouping.p)
    seed = np.full(20, 0.02)
    _, _, _, report = sweep_service.fbs_solve(
        network, grouping, seed, 1.0, cost, SweepParams(u_th=1e-8, max_iter=1000), grid200
    )
    static = heuristic_service.best_static(
        network, grouping, seed, 1.0, cost, grid200, HeuristicParams(u_max=5.0)
    )
    two_stage = heuristic_service.best_two_stage(
        network, grouping, seed, 1.0, cost, grid200, HeuristicParams(u_max=5.0)
    )
    zero_J, _, _ = dynamics_service.evaluate(
        network, grouping, ControlSchedule.zeros(grid200, 4), seed, 1.0, cost
    )
    assert report.J >= static.J - 1e-6
    assert report.J >= two_stage.J - 1e-6
    assert static.J >= zero_J - 1e-6


def test_iteration_cap_reports_non_convergence(k2, grid200):
    _, _, _, report = sweep_service.fbs_solve(
        k2, single_group(2), [0.1, 0.1], 1.0, QuadraticCost(b=0.1, p=[1.0]),
        SweepParams(max_iter=1), grid200,
    )
    assert not report.converged
    assert report.iterations == 1


def test_warm_start_converges_immediately(k2, grid200):
    cost = QuadraticCost(b=1.0, p=[1.0])
    params = SweepParams(u_th=1e-9, max_iter=1000)
    control, _, _, first = sweep_service.fbs_solve(k2, single_group(2), [0.1, 0.1], 1.0, cost, params, grid200)
    _, _, _, again = sweep_service.fbs_solve(
        k2, single_group(2), [0.1, 0.1], 1.0, cost, params, grid200, initial_control=control
    )
    assert again.iterations < first.iterations
    assert again.J == pytest.approx(first.J, abs=1e-9)


def test_multiplier_scales_cost(k2, grid200):
    params = SweepParams(u_th=1e-9, max_iter=1000)
    scaled, _, _, _ = sweep_service.fbs_solve(
        k2, single_group(2), [0.1, 0.1], 1.0, QuadraticCost(b=1.0, p=[1.0]), params, grid200, multiplier=4.0
    )
    direct, _, _, _ = sweep_service.fbs_solve(
        k2, single_group(2), [0.1, 0.1], 1.0, QuadraticCost(b=4.0, p=[1.0]), params, grid200
    )
    np.testing.assert_allclose(scaled.u, direct.u, atol=1e-7)


def test_invalid_inputs(k2, grid200):
    with pytest.raises(ConfigError):
        sweep_service.fbs_solve(k2, single_group(2), [0.1, 0.1], 1.0, QuadraticCost(b=1.0, p=[0.5, 0.5]), grid=grid200)
    with pytest.raises(ConfigError):
        sweep_service.fbs_solve(
            k2, single_group(2), [0.1, 0.1], 1.0, QuadraticCost(b=1.0, p=[1.0]), grid=grid200, multiplier=0.0
        )
