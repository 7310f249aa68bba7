import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adaptive_tracking.plant import (
    CommandInput, DomainError, NoUncertainty, Plant, PlantConfig, ProportionalVelocity,
    RobotState, TERRAINS, input_jacobian, nominal_derivative, profile_from_dict,
    step_plant, true_derivative, varied_terrain, wrap_angle,
)

NO_LAG = PlantConfig(execution_lag=0.0)


def arc_endpoint(x0, v, q, t, radius=0.2):
    """Closed-form constant-curvature motion."""
    x, y, yaw = x0
    w = v * math.tan(q) / radius
    if abs(w) < 1e-12:
        return np.array([x + v * t * math.cos(yaw), y + v * t * math.sin(yaw), yaw])
    yaw_t = yaw + w * t
    return np.array([x + v / w * (math.sin(yaw_t) - math.sin(yaw)),
                     y - v / w * (math.cos(yaw_t) - math.cos(yaw)),
                     wrap_angle(yaw_t)])


# --- nominal_derivative ----------------------------------------------------

@pytest.mark.parametrize("state, cmd, expected", [
    ((0, 0, 0), (1.0, 0.0), (1.0, 0.0, 0.0)),
    ((0, 0, math.pi / 2), (2.0, 0.0), (0.0, 2.0, 0.0)),
    ((0, 0, 0), (1.0, math.pi / 4), (1.0, 0.0, 5.0)),
])
def test_nominal_derivative_examples(state, cmd, expected):
    np.testing.assert_allclose(nominal_derivative(state, cmd, 0.2), expected, atol=1e-12)


@pytest.mark.parametrize("q", [math.pi / 2, -math.pi / 2, 2.0])
def test_roll_at_or_beyond_half_pi_is_a_domain_error(q):
    with pytest.raises(DomainError):
        nominal_derivative((0, 0, 0), (1.0, q), 0.2)
    with pytest.raises(DomainError):
        input_jacobian((0, 0, 0), (1.0, q), 0.2)
    with pytest.raises(DomainError):
        CommandInput(1.0, q)


# --- input_jacobian --------------------------------------------------------

def test_jacobian_examples():
    np.testing.assert_allclose(input_jacobian((0, 0, 0), (1, 0), 0.2),
                               [[1, 0], [0, 0], [0, 5]], atol=1e-12)
    np.testing.assert_allclose(input_jacobian((0, 0, math.pi / 2), (0, 0), 0.2),
                               [[0, 0], [1, 0], [0, 0]], atol=1e-12)


def fd_jacobian(x, u, radius, h=1e-6):
    cols = []
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        cols.append((nominal_derivative(x, u + e, radius)
                     - nominal_derivative(x, u - e, radius)) / (2 * h))
    return np.column_stack(cols)


@settings(max_examples=200, deadline=None)
@given(yaw=st.floats(-math.pi, math.pi), v=st.floats(-1.5, 1.5), q=st.floats(-0.6, 0.6))
def test_jacobian_matches_finite_differences(yaw, v, q):
    x, u = np.array([0.3, -0.2, yaw]), np.array([v, q])
    J = input_jacobian(x, u, 0.2)
    np.testing.assert_allclose(J, fd_jacobian(x, u, 0.2), rtol=1e-5, atol=1e-7)


# --- true_derivative -------------------------------------------------------

def test_true_derivative_without_uncertainty_is_exactly_nominal():
    rng = np.random.default_rng(3)
    for _ in range(50):
        x = rng.uniform(-3, 3, 3)
        u = np.array([rng.uniform(-1.5, 1.5), rng.uniform(-0.6, 0.6)])
        assert np.array_equal(true_derivative(x, u, NoUncertainty(), 0.2),
                              nominal_derivative(x, u, 0.2))


@pytest.mark.parametrize("xi, expected_x", [(0.2, 0.8), (0.4, 0.6)])
def test_true_derivative_proportional_velocity(xi, expected_x):
    d = true_derivative((0, 0, 0), (1.0, 0.0), ProportionalVelocity(xi=xi), 0.2)
    np.testing.assert_allclose(d, (expected_x, 0.0, 0.0), atol=1e-12)


# --- step_plant ------------------------------------------------------------

def test_straight_line_step():
    s = step_plant(RobotState(), CommandInput(1.0, 0.0), NoUncertainty(), NO_LAG, 0.1)
    np.testing.assert_allclose(s.as_array(), (0.1, 0.0, 0.0), atol=1e-9)


def test_arc_step_reaches_half_radian():
    s = step_plant(RobotState(), CommandInput(1.0, math.pi / 4), NoUncertainty(), NO_LAG, 0.1)
    assert s.yaw == pytest.approx(0.5, abs=1e-9)
    np.testing.assert_allclose(s.as_array(), arc_endpoint((0, 0, 0), 1.0, math.pi / 4, 0.1),
                               atol=1e-6)
    # radius of the arc is v / yaw_rate = 0.2 m
    assert math.hypot(s.x_pos, s.y_pos - 0.2) == pytest.approx(0.2, abs=1e-6)


@pytest.mark.parametrize("profile", [ProportionalVelocity(xi=0.4), TERRAINS["grass"],
                                     TERRAINS["hollow_tiles"]])
def test_zero_velocity_leaves_state_unchanged(profile):
    start = RobotState(1.0, -2.0, 0.7)
    s = step_plant(start, CommandInput(0.0, 0.3), profile, PlantConfig(), 0.5)
    np.testing.assert_allclose(s.as_array(), start.as_array(), atol=1e-15)


def test_duration_must_be_a_substep_multiple():
    with pytest.raises(ValueError):
        step_plant(RobotState(), CommandInput(1.0, 0.0), NoUncertainty(), PlantConfig(), 0.03)
    with pytest.raises(ValueError):
        step_plant(RobotState(), CommandInput(1.0, 0.0), NoUncertainty(), PlantConfig(), 0.0)


@settings(max_examples=40, deadline=None)
@given(yaw=st.floats(-math.pi, math.pi), v=st.floats(-1.5, 1.5), q=st.floats(-0.6, 0.6),
       n=st.integers(1, 200))
def test_step_plant_matches_closed_form_arc(yaw, v, q, n):
    duration = n * NO_LAG.plant_substep
    s = step_plant(RobotState(0.5, -0.5, yaw), CommandInput(v, q), NoUncertainty(), NO_LAG,
                   duration)
    exact = arc_endpoint((0.5, -0.5, yaw), v, q, duration)
    assert np.max(np.abs(s.as_array()[:2] - exact[:2])) < 1e-6
    assert abs(wrap_angle(s.yaw - exact[2])) < 1e-6


@pytest.mark.parametrize("profile", [NoUncertainty(), ProportionalVelocity(xi=0.2),
                                     TERRAINS["grass"]])
def test_halving_the_substep_barely_moves_a_ten_second_endpoint(profile):
    cmd, start = CommandInput(0.8, 0.3), RobotState(0.0, -0.5, 0.0)
    executed = CommandInput(0.0, 0.0)
    coarse = step_plant(start, cmd, profile, PlantConfig(), 10.0, executed)
    fine = step_plant(start, cmd, profile, PlantConfig(plant_substep=0.01), 10.0, executed)
    assert math.hypot(coarse.x_pos - fine.x_pos, coarse.y_pos - fine.y_pos) < 1e-5


def test_lag_makes_the_executed_command_approach_the_setpoint():
    plant = Plant(PlantConfig(), NoUncertainty())
    plant.step(CommandInput(1.0, 0.2))
    u = plant.executed_command.as_array()
    expected = 1.0 - math.exp(-0.1 / 0.05)
    np.testing.assert_allclose(u, [expected, 0.2 * expected], rtol=1e-12)


# --- profiles and the stateful plant --------------------------------------

def test_measured_input_is_executed_minus_true_perturbation():
    plant = Plant(PlantConfig(execution_lag=0.0), ProportionalVelocity(xi=0.2))
    plant.step(CommandInput(1.0, 0.0))
    assert plant.true_delta_u[0] == pytest.approx(0.2)
    assert plant.measured_input.velocity == pytest.approx(0.8)


def test_varied_terrain_switches_at_boundary():
    prof = varied_terrain(0.0)
    cmd = np.array([1.0, 0.1])
    right = prof.evaluate(np.array([0.5, 0.0, 0.0]), cmd)
    left = prof.evaluate(np.array([-0.5, 0.0, 0.0]), cmd)
    np.testing.assert_allclose(right, TERRAINS["rubber"].evaluate(np.zeros(3), cmd))
    np.testing.assert_allclose(left, TERRAINS["grass"].evaluate(np.zeros(3), cmd))


@pytest.mark.parametrize("profile", [NoUncertainty(), ProportionalVelocity(xi=0.3),
                                     TERRAINS["rubber"], TERRAINS["hollow_tiles"],
                                     varied_terrain(1.0)])
def test_profiles_round_trip_through_dicts(profile):
    assert profile_from_dict(profile.to_dict()) == profile


@settings(max_examples=100, deadline=None)
@given(x=st.floats(-50, 50), v=st.floats(-1.5, 1.5), q=st.floats(-1.5, 1.5),
       n1=st.floats(-5, 5), n2=st.floats(-5, 5))
def test_profile_evaluation_is_finite(x, v, q, n1, n2):
    for prof in list(TERRAINS.values()) + [varied_terrain(0.0), ProportionalVelocity(xi=0.4)]:
        du = prof.evaluate(np.array([x, 0.0, 0.0]), np.array([v, q]), (n1, n2))
        assert du.shape == (2,) and np.all(np.isfinite(du))


def test_plant_is_deterministic_for_equal_streams():
    def run():
        streams = [np.random.Generator(np.random.Philox(key=[7, c])) for c in range(2)]
        plant = Plant(PlantConfig(), TERRAINS["hollow_tiles"], RobotState(0, -0.5, 0),
                      noise_streams=streams)
        for k in range(30):
            plant.step(CommandInput(0.6, 0.1 * math.sin(k)))
        return plant.x.tobytes()
    assert run() == run()


def test_plant_config_rejects_bad_values():
    with pytest.raises(ValueError):
        PlantConfig(wheel_radius=0.0)
    with pytest.raises(ValueError):
        PlantConfig(planner_period=0.03)
    with pytest.raises(ValueError):
        PlantConfig(execution_lag=-1.0)
