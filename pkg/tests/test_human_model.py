import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dangeraware.config import ScenarioConfig, load_config, scenario_path
from dangeraware.core import ActionSet
from dangeraware.human_model import (EstimationNoise, HumanObjectives, action_costs, action_distribution, boltzmann,
                                     deliberate_distribution, goal_cost, mixture_distribution, safety_cost,
                                     simulate_human_action)

ACTS = ActionSet(np.array([[-1.0, 0], [-0.5, 0], [0, 0], [0.5, 0], [1.0, 0]]))


def paper_objectives(**kw):
    base = dict(theta3=2.5, theta4=8e-3, theta5=300.0, theta6=6e-3, goal=(5.0, 10.0), v_ref=(0.5, 0.0))
    base.update(kw)
    return HumanObjectives(**base)


def test_goal_cost_examples():
    # theta4 must stay positive; a zero reference velocity removes the term instead
    assert goal_cost((5.0, 10.0), (0.0, 0.0), paper_objectives(v_ref=(0.0, 0.0))) == 0.0
    obj = paper_objectives()
    # 2.5 * 0.5^2 + 0.008 * (-1)^2
    assert goal_cost((6.0, 10.0), (-0.5, 0.0), obj) == pytest.approx(0.633, abs=1e-12)
    double = paper_objectives(theta3=5.0)
    first = goal_cost((6.0, 10.0), (-0.5, 0.0), obj) - 0.008
    assert goal_cost((6.0, 10.0), (-0.5, 0.0), double) - 0.008 == pytest.approx(2 * first, rel=1e-12)


def test_safety_cost_examples():
    obj = paper_objectives()
    assert safety_cost((0.0, 10.0), (0.0, 0.0), (0.0, 10.0), obj) == 300.0
    assert safety_cost((0.0, 10.0), (0.0, 0.0), (0.0, 10.0 + 1e6), obj) < 1e-12 * 300
    assert safety_cost((0.0, 10.0), (0.0, 0.0), (0.0, 110.0), obj) == pytest.approx(164.6435, abs=1e-3)
    assert safety_cost((0.0, 10.0), (0.0, 0.0), (0.0, 110.0), obj) == pytest.approx(300 * np.exp(-0.6), rel=1e-14)
    # post-action position: stepping toward the robot raises the cost
    assert safety_cost((0.0, 10.0), (1.0, 0.0), (3.0, 10.0), obj) > safety_cost((0.0, 10.0), (-1.0, 0.0), (3.0, 10.0), obj)


def test_boltzmann_examples():
    assert np.array_equal(boltzmann(np.array([3.0, 3.0]), 1000.0), [0.5, 0.5])
    p = boltzmann(np.array([0.0, 0.01, 5.0]), 1000.0)
    assert p[0] >= 1 - 1e-4
    # raw exponents would all underflow here
    p = boltzmann(np.array([800.0, 801.0]), 1000.0)
    assert np.all(np.isfinite(p)) and p.sum() == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        boltzmann(np.array([0.0]), 0.0)


@given(st.floats(-20, 20), st.floats(-20, 20))
def test_beta_zero_ignores_robot(x_h, y_r):
    obj = paper_objectives()
    a = deliberate_distribution((x_h, 10.0), (0.0, y_r), 0, obj, 1000.0, ACTS)
    b = deliberate_distribution((x_h, 10.0), (0.0, y_r + 7.3), 0, obj, 1000.0, ACTS)
    assert a.tobytes() == b.tobytes()


@given(st.floats(-15, 15), st.floats(-5, 30), st.integers(0, 1), st.floats(0.01, 2000), st.floats(0, 1))
def test_distributions_are_normalized(x_h, y_r, beta, gamma, omega):
    obj = paper_objectives(theta5=3000.0, theta6=0.3)
    p = action_distribution((x_h, 10.0), (0.0, y_r), beta, obj, gamma, omega, ACTS)
    assert np.all(p >= 0)
    assert abs(p.sum() - 1.0) <= 1e-12


@given(st.floats(-15, 15), st.floats(-5, 30), st.integers(0, 1))
def test_runner_up_mass_bound_at_paper_gamma(x_h, y_r, beta):
    obj = paper_objectives()
    costs = action_costs(np.array([x_h, 10.0]), np.array([0.0, y_r]), beta, obj, ACTS)
    p = boltzmann(costs, 1000.0)
    srt = np.sort(costs)
    if srt[1] - srt[0] >= 0.01:
        assert 1.0 - p[np.argmin(costs)] <= 1e-4


@given(st.floats(-15, 15), st.floats(-5, 30), st.integers(0, 1), st.floats(0.1, 10))
def test_argmax_invariance_under_cost_scaling(x_h, y_r, beta, c):
    obj = paper_objectives()
    scaled = paper_objectives(theta3=2.5 * c, theta4=8e-3 * c, theta5=300.0 * c)
    p = deliberate_distribution((x_h, 10.0), (0.0, y_r), beta, obj, 1000.0, ACTS)
    q = deliberate_distribution((x_h, 10.0), (0.0, y_r), beta, scaled, 1000.0 / c, ACTS)
    assert np.argmax(p) == np.argmax(q)
    assert np.allclose(p, q, atol=1e-9, rtol=0)


def test_mixture_examples():
    d = np.array([1.0, 0, 0, 0, 0])
    assert np.array_equal(mixture_distribution(d, 0.0, ACTS), d)
    assert np.allclose(mixture_distribution(d, 1.0, ACTS), 0.2, atol=0, rtol=0)
    assert np.allclose(mixture_distribution(d, 0.1, 5), [0.92, 0.02, 0.02, 0.02, 0.02], atol=1e-15)
    with pytest.raises(ValueError):
        mixture_distribution(d, 1.2, ACTS)


@given(st.lists(st.floats(0, 1), min_size=5, max_size=5).filter(lambda v: sum(v) > 0), st.floats(0, 1))
def test_mixture_is_affine_in_omega(raw, omega):
    d = np.array(raw) / sum(raw)
    lhs = mixture_distribution(d, omega, ACTS)
    rhs = (1 - omega) * mixture_distribution(d, 0.0, ACTS) + omega * mixture_distribution(d, 1.0, ACTS)
    assert np.array_equal(lhs, rhs)


def test_simulated_unaware_human_follows_goal_only():
    obj = paper_objectives()
    noise = EstimationNoise("gaussian", 1.0)
    for y_r in (-30.0, 9.0, 10.0, 40.0):
        for x in (-5.0, 0.0, 4.5, 6.0):
            d = simulate_human_action((x, 10.0), (0.0, y_r), 0, noise, obj, ACTS, np.random.default_rng(0))
            goal_only = int(np.argmin([goal_cost((x, 10.0), u, obj) for u in ACTS]))
            assert d.index == goal_only


def test_simulated_aware_human_matches_enumeration():
    # the library default weights: the safety term is too flat to change the choice next to the car,
    # the scenario weights flip it
    for th5, th6, expect_deviation in ((300.0, 6e-3, False), (3000.0, 0.3, True)):
        obj = paper_objectives(theta5=th5, theta6=th6)
        x_h, x_r = np.array([-1.0, 10.0]), np.array([0.0, 9.0])
        d = simulate_human_action(x_h, x_r, 1, EstimationNoise("constant_bias", 0.0, (0.0, 0.0)), obj, ACTS,
                                  np.random.default_rng(0))
        total = [goal_cost(x_h, u, obj) + safety_cost(x_h, u, x_r, obj) for u in ACTS]
        goal_only = [goal_cost(x_h, u, obj) for u in ACTS]
        assert d.index == int(np.argmin(total))
        assert (d.index != int(np.argmin(goal_only))) == expect_deviation


def test_constant_bias_decay_closed_form():
    eps0 = np.array([0.0, -5.0])
    noise = EstimationNoise("constant_bias", eps0=eps0, eta=0.3)
    rng = np.random.default_rng(0)
    assert np.array_equal(noise.draw(rng, 2, t=4, d_r=0, t_d=None), eps0)
    assert np.array_equal(noise.draw(rng, 2, t=4, d_r=0, t_d=2), eps0)
    for k in range(6):
        got = noise.draw(rng, 2, t=3 + k, d_r=1, t_d=3)
        assert np.allclose(got, eps0 * np.exp(-0.3 * k), rtol=1e-15, atol=0)


def test_gaussian_noise_is_seeded():
    noise = EstimationNoise("gaussian", np.array([[1.0, 0.0], [0.0, 4.0]]))
    a = noise.draw(np.random.default_rng(5), 2)
    b = noise.draw(np.random.default_rng(5), 2)
    assert a.tobytes() == b.tobytes()
    # zero covariance still advances the stream
    r1, r2 = np.random.default_rng(1), np.random.default_rng(1)
    EstimationNoise("gaussian", 0.0).draw(r1, 2)
    EstimationNoise("gaussian", 1.0).draw(r2, 2)
    assert r1.random() == r2.random()


def test_gaussian_sample_covariance():
    noise = EstimationNoise("gaussian", np.array([[1.0, 0.5], [0.5, 2.0]]))
    rng = np.random.default_rng(0)
    draws = np.array([noise.draw(rng, 2) for _ in range(20000)])
    assert np.allclose(np.cov(draws.T), [[1.0, 0.5], [0.5, 2.0]], atol=0.08)


def test_random_human_frequency():
    obj = paper_objectives()
    noise = EstimationNoise("gaussian", 0.0)
    rng = np.random.default_rng(3)
    picks = [simulate_human_action((-5.0, 10.0), (0.0, 0.0), 0, noise, obj, ACTS, rng, True, 0.4)
             for _ in range(4000)]
    rate = np.mean([d.random for d in picks])
    assert abs(rate - 0.4) < 4 * np.sqrt(0.24 / 4000)
    counts = np.bincount([d.index for d in picks if d.random], minlength=5)
    assert counts.min() > 0


def test_bundled_weights_separate_aware_from_unaware():
    cfg = load_config(scenario_path("concerned"))
    h = cfg.human
    obj = HumanObjectives(h.theta3, h.theta4, h.theta5, h.theta6, h.goal, h.v_ref)
    p0 = action_distribution((-2.0, 10.0), (0.0, 6.0), 0, obj, h.gamma, h.omega_h, cfg.human_actions)
    p1 = action_distribution((-2.0, 10.0), (0.0, 6.0), 1, obj, h.gamma, h.omega_h, cfg.human_actions)
    assert np.argmax(p0) != np.argmax(p1)
    assert ScenarioConfig().human.theta5 == 300.0
