import math

import numpy as np
import pytest

from app.core.exceptions import ConfigError
from app.models.models import ControlSchedule, CostModel, QuadraticCost, TimeGrid
from app.services.dynamics_service import dynamics_service
from conftest import build, random_graph, single_group, singletons


def logistic(t, beta, i0):
    grow = i0 * math.exp(beta * t)
    return grow / (1.0 - i0 + grow)


def test_k2_matches_logistic(k2, grid1000):
    state = dynamics_service.forward_si(
        k2, single_group(2), ControlSchedule.zeros(grid1000, 1), [0.1, 0.1], beta=1.0
    )
    expected = [logistic(t, 1.0, 0.1) for t in grid1000.times]
    np.testing.assert_allclose(state.x[0], expected, atol=1e-6)
    np.testing.assert_allclose(state.x[1], expected, atol=1e-6)


def test_single_node_constant_control(single_node, grid1000):
    control = dynamics_service.uniform_control(grid1000, 1, 1.0)
    state = dynamics_service.forward_si(single_node, single_group(1), control, [0.0], beta=1.0)
    assert state.final[0] == pytest.approx(1.0 - math.exp(-1.0), abs=1e-9)


def test_spontaneous_rate_acts_like_control(single_node, grid1000):
    state = dynamics_service.forward_si(
        single_node, single_group(1), ControlSchedule.zeros(grid1000, 1), [0.0],
        beta=0.0, spontaneous_rate=0.5,
    )
    assert state.final[0] == pytest.approx(1.0 - math.exp(-0.5), abs=1e-9)


def test_fourth_order_convergence(k2):
    exact = logistic(1.0, 1.0, 0.1)
    errors = []
    for K in (125, 250, 500):
        grid = TimeGrid(T=1.0, K=K)
        state = dynamics_service.forward_si(
            k2, single_group(2), ControlSchedule.zeros(grid, 1), [0.1, 0.1], beta=1.0
        )
        errors.append(abs(state.final[0] - exact))
    assert math.log2(errors[0] / errors[1]) >= 3.8
    assert math.log2(errors[1] / errors[2]) >= 3.8


def test_reach_grows_with_spreading_rate(grid200):
    network = random_graph(20, 0.15, seed=4)
    control = dynamics_service.uniform_control(grid200, 1, 0.3)
    seed = np.full(20, 0.02)
    reaches = [
        float(np.mean(dynamics_service.forward_si(network, single_group(20), control, seed, beta).final))
        for beta in (0.0, 0.25, 0.5, 1.0, 2.0, 4.0)
    ]
    assert all(later >= earlier - 1e-12 for earlier, later in zip(reaches, reaches[1:]))
    assert reaches[-1] > reaches[0]


def test_seeded_nodes_stay_infected(path3, grid200):
    state = dynamics_service.forward_si(
        path3, single_group(3), ControlSchedule.zeros(grid200, 1), [1.0, 0.0, 1.0], beta=1.0
    )
    assert state.x[0].tolist() == [1.0] * 201
    assert state.x[1, 0] == 0.0
    assert np.all(np.diff(state.x, axis=1) >= 0)


def test_zero_seed_and_control_stays_empty(k4, grid200):
    state = dynamics_service.forward_si(
        k4, single_group(4), ControlSchedule.zeros(grid200, 1), np.zeros(4), beta=3.0
    )
    assert not state.x.any()


def test_more_control_never_lowers_state(grid200):
    network = random_graph(15, 0.2, seed=2)
    grouping = singletons(15)
    rng = np.random.default_rng(0)
    low = rng.random((15, 201))
    high = low + rng.random((15, 201))
    seed = np.full(15, 0.05)
    state_low = dynamics_service.forward_si(network, grouping, ControlSchedule(grid=grid200, u=low), seed, 1.0)
    state_high = dynamics_service.forward_si(network, grouping, ControlSchedule(grid=grid200, u=high), seed, 1.0)
    assert np.all(state_high.x >= state_low.x - 1e-9)


def test_reward_decomposes(k2, grid1000):
    cost = QuadraticCost(b=0.5, p=[1.0])
    control = dynamics_service.uniform_control(grid1000, 1, 1.0)
    J, reach, spend = dynamics_service.evaluate(k2, single_group(2), control, [0.0, 0.0], 0.0, cost)
    assert spend == pytest.approx(0.5, abs=1e-12)
    assert reach == pytest.approx(1.0 - math.exp(-1.0), abs=1e-9)
    assert J == pytest.approx(reach - spend, abs=1e-15)


def test_per_group_spend_weights_by_group_size(grid1000):
    cost = QuadraticCost(b=2.0, p=[0.25, 0.75])
    control = ControlSchedule(grid=grid1000, u=np.vstack([np.ones(1001), 2 * np.ones(1001)]))
    spend = dynamics_service.per_group_spend(control, cost)
    np.testing.assert_allclose(spend, [0.5, 6.0], atol=1e-12)
    assert dynamics_service.per_capita_resource(control, cost, 1) == pytest.approx(8.0)


def test_per_capita_resource_of_ramp(grid1000):
    cost = QuadraticCost(b=3.0, p=[1.0])
    control = ControlSchedule(grid=grid1000, u=grid1000.times[None, :])
    assert dynamics_service.per_capita_resource(control, cost, 0) == pytest.approx(1.0, abs=1e-5)
    with pytest.raises(ConfigError):
        dynamics_service.per_capita_resource(control, cost, 1)


def test_cost_model_needs_every_method():
    class LinearCost(CostModel):
        def g(self, u):
            return self._column() * u

    with pytest.raises(TypeError):
        LinearCost(p=[1.0])


def test_spend_rejects_mismatched_cost(grid200):
    with pytest.raises(ConfigError):
        dynamics_service.spend_of(ControlSchedule.zeros(grid200, 2), QuadraticCost(b=1.0, p=[1.0]))


def test_dimension_checks(k2, grid200):
    with pytest.raises(ConfigError):
        dynamics_service.forward_si(k2, single_group(3), ControlSchedule.zeros(grid200, 1), [0, 0], 1.0)
    with pytest.raises(ConfigError):
        dynamics_service.forward_si(k2, single_group(2), ControlSchedule.zeros(grid200, 2), [0, 0], 1.0)
    with pytest.raises(ConfigError):
        dynamics_service.forward_si(k2, single_group(2), ControlSchedule.zeros(grid200, 1), [0, 1.5], 1.0)
    with pytest.raises(ConfigError):
        dynamics_service.forward_si(k2, single_group(2), ControlSchedule.zeros(grid200, 1), [0, 0], -1.0)


def test_calibrate_beta_hits_target(k2, grid1000):
    beta = dynamics_service.calibrate_beta(k2, [0.01, 0.01], 0.5, grid1000)
    assert beta == pytest.approx(math.log(99.0), abs=1e-5)
    reach = dynamics_service.uncontrolled_reach(k2, [0.01, 0.01], beta, grid1000)
    assert reach == pytest.approx(0.5, abs=1e-9)


def test_calibrate_beta_rejects_unreachable_target(grid200):
    edgeless = build(3, [])
    with pytest.raises(ConfigError):
        dynamics_service.calibrate_beta(edgeless, [0.1, 0.1, 0.1], 0.5, grid200)
    with pytest.raises(ConfigError):
        dynamics_service.calibrate_beta(edgeless, [0.1, 0.1, 0.1], 0.05, grid200)


def test_two_stage_control_shape():
    grid = TimeGrid(T=1.0, K=4)
    control = dynamics_service.two_stage_control(grid, 2, 0.7)
    assert control.u.tolist() == [[0.7, 0.7, 0.7, 0.0, 0.0]] * 2
    with pytest.raises(ConfigError):
        dynamics_service.two_stage_control(TimeGrid(T=1.0, K=5), 1, 0.7)
