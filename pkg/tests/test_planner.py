import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dangeraware.belief import Belief
from dangeraware.core import ActionSet, Grid
from dangeraware.human_model import HumanObjectives
from dangeraware.planner import Planner, RobotObjectives, plan, robot_stage_cost
from dangeraware.prediction import HumanPredictor, collision_profile_exact
from oracles import all_sequences

LANE = Grid((-15.0, 10.0), (0.5, 1.0), (61, 1))
HACTS = ActionSet(np.array([[-1.0, 0], [-0.5, 0], [0, 0], [0.5, 0], [1.0, 0]]))
RACTS = ActionSet(np.array([[0.0, 0.0], [0.0, 1.0], [0.0, 2.0]]))
HOBJ = HumanObjectives(2.5, 8e-3, 3000.0, 0.3, (5.0, 10.0), (0.5, 0.0))
ROBJ = RobotObjectives(1.0, 0.5, (0.0, 80.0))


def lane_planner(horizon=5, p_th=0.1, omega=0.1, mode="exact"):
    pred = HumanPredictor(LANE, HACTS, HOBJ, 1000.0, omega, 2.0)
    return Planner(RACTS, ROBJ, horizon, p_th, pred, mode)


def wall_planner(p_th=0.1):
    # the pedestrian never moves: a fixed obstacle at (0, 10)
    pred = HumanPredictor(LANE, ActionSet(np.array([[0.0, 0.0]])), HOBJ, 1000.0, 0.0, 2.0)
    return Planner(RACTS, ROBJ, 3, p_th, pred)


def test_stage_cost_examples():
    assert robot_stage_cost((0.0, 80.0), (0.0, 0.0), ROBJ) == 0.0
    assert robot_stage_cost((0.0, 78.0), (0.0, 2.0), ROBJ) == 2.0
    no_penalty = RobotObjectives(1.0, 0.0, (0.0, 80.0))
    assert robot_stage_cost((0.0, 70.0), (0.0, 2.0), no_penalty) == robot_stage_cost((0.0, 71.0), (0.0, 1.0), no_penalty)


def test_free_road_means_full_speed():
    planner = lane_planner()
    res = plan((0.0, -60.0), (-5.0, 10.0), Belief(), planner)
    assert res.action_indices == (2,) * 6
    assert res.d_r == 0 and res.feasible and not res.fallback_used
    # oracle: cost of every one of the 729 sequences
    best = min(all_sequences(3, 6), key=lambda s: _cost((0.0, -60.0), s))
    assert best == res.action_indices
    assert res.objective_value == pytest.approx(_cost((0.0, -60.0), best), rel=1e-15)


def test_inactive_constraint_keeps_unconstrained_plan():
    planner = lane_planner()
    res = planner.plan(np.array([0.0, 30.0]), np.array([-5.0, 10.0]), Belief())
    assert res.d_r == 0 and res.action_indices == (2,) * 6
    assert np.all(res.collision_profile.probs == 0)


def test_wall_forces_a_stop():
    res = wall_planner().plan(np.array([0.0, 7.0]), np.array([0.0, 10.0]), Belief())
    assert res.first_index == 0 and np.array_equal(res.first_action, [0.0, 0.0])
    assert res.d_r == 1 and res.feasible
    assert res.collision_profile.peak <= 0.1


def test_nothing_feasible_uses_least_bad_fallback():
    res = wall_planner(p_th=0.0).plan(np.array([0.0, 9.0]), np.array([0.0, 10.0]), Belief())
    assert res.fallback_used and not res.feasible and res.d_r == 1
    assert res.collision_profile[1] == 1.0


def _cost(x, seq):
    y, total = x[1], 0.0
    for i in seq:
        u = float(RACTS[i][1])
        y += u
        total += (y - 80.0) ** 2 + 0.5 * u * u
    return total


def _oracle_plan(x_r, x_h, belief, horizon, p_th, predictor):
    best = None
    for seq in all_sequences(3, horizon + 1):
        traj = [np.asarray(x_r, dtype=np.float64)]
        for i in seq[:horizon]:
            traj.append(traj[-1] + RACTS[i])
        prof = collision_profile_exact(x_h, np.array(traj), belief, predictor)
        if prof.peak <= p_th:
            c = _cost(x_r, seq)
            if best is None or c < best[0]:
                best = (c, seq, prof)
    return best


robot_y = st.integers(-6, 14).map(float)
human_x = st.integers(-16, 16).map(lambda v: v / 2.0)


@given(robot_y, human_x, st.floats(0.01, 0.99), st.sampled_from([2, 3]), st.sampled_from([0.0, 0.05, 0.1, 0.3]))
def test_plan_matches_enumeration_oracle(y_r, x_h, p, horizon, p_th):
    planner = lane_planner(horizon, p_th)
    x_r, xh = np.array([0.0, y_r]), np.array([x_h, 10.0])
    res = planner.plan(x_r, xh, Belief(p, 1 - p))
    best = _oracle_plan(x_r, xh, Belief(p, 1 - p), horizon, p_th, planner.predictor)
    if best is None:
        assert res.fallback_used
        return
    assert res.feasible
    assert res.action_indices == best[1]
    assert res.objective_value == pytest.approx(best[0], rel=1e-12)
    assert np.allclose(res.collision_profile.probs, best[2].probs, atol=1e-12, rtol=0)


@given(robot_y, human_x, st.floats(0.01, 0.99), st.floats(0, 1), st.floats(0, 1), st.sampled_from(["exact", "marginal"]))
def test_objective_monotone_in_threshold(y_r, x_h, p, a, b, mode):
    lo, hi = sorted((a, b))
    x_r, xh = np.array([0.0, y_r]), np.array([x_h, 10.0])
    r_lo = lane_planner(3, lo, mode=mode).plan(x_r, xh, Belief(p, 1 - p))
    r_hi = lane_planner(3, hi, mode=mode).plan(x_r, xh, Belief(p, 1 - p))
    if r_lo.feasible:
        assert r_hi.feasible and r_hi.objective_value <= r_lo.objective_value


@given(robot_y, human_x, st.floats(0.01, 0.99))
def test_zero_threshold_is_deterministically_safe(y_r, x_h, p):
    x_r, xh = np.array([0.0, y_r]), np.array([x_h, 10.0])
    strict = lane_planner(3, 0.0).plan(x_r, xh, Belief(p, 1 - p))
    loose = lane_planner(3, 0.1).plan(x_r, xh, Belief(p, 1 - p))
    if strict.feasible:
        assert np.all(strict.collision_profile.probs == 0.0)
        assert strict.objective_value >= loose.objective_value


@given(robot_y, human_x, st.floats(0, 1), st.sampled_from(["exact", "marginal"]))
def test_feasible_plans_respect_threshold(y_r, x_h, p_th, mode):
    res = lane_planner(4, p_th, mode=mode).plan(np.array([0.0, y_r]), np.array([x_h, 10.0]), Belief())
    if res.feasible:
        assert np.all(res.collision_profile.probs <= p_th)
    assert np.array_equal(res.first_action, res.actions[0])
    assert res.collision_profile[0] == 0.0


def test_plan_is_deterministic():
    a = lane_planner().plan(np.array([0.0, 4.0]), np.array([-2.0, 10.0]), Belief(0.3, 0.7))
    b = lane_planner().plan(np.array([0.0, 4.0]), np.array([-2.0, 10.0]), Belief(0.3, 0.7))
    assert a.action_indices == b.action_indices and a.d_r == b.d_r
    assert a.collision_profile.probs.tobytes() == b.collision_profile.probs.tobytes()
    assert a.trajectory.tobytes() == b.trajectory.tobytes()


def test_rollout_shape_and_order():
    planner = lane_planner(horizon=2)
    trajs = planner.rollout(np.array([0.0, 1.0]))
    assert trajs.shape == (27, 4, 2)
    assert planner.sequences[0].tolist() == [0, 0, 0] and planner.sequences[-1].tolist() == [2, 2, 2]
    assert np.array_equal(trajs[-1, :, 1], [1.0, 3.0, 5.0, 7.0])


def test_planner_validation():
    pred = HumanPredictor(LANE, HACTS, HOBJ, 1000.0, 0.1, 2.0)
    with pytest.raises(ValueError):
        Planner(RACTS, ROBJ, 0, 0.1, pred)
    with pytest.raises(ValueError):
        Planner(RACTS, ROBJ, 2, 1.5, pred)
    with pytest.raises(ValueError):
        Planner(RACTS, ROBJ, 2, 0.1, pred, mode="mean")
