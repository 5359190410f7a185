"""Human action models.

Two views of the same pedestrian live here:

* the robot's *predictive* model, a mixture of a Boltzmann (softmax) choice
  over goal and safety costs and a uniform random choice;
* the *simulated* ground-truth human, who picks the cost minimizer using a
  noisy estimate of where the robot is.

All cost functions accept batched inputs: leading axes of ``x_h`` and of
``x_r`` broadcast against each other, and the action axis is appended last.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import Action, ActionSet, AgentState, Dynamics, Integrator, as_vector


@dataclass(frozen=True, eq=False)
class HumanObjectives:
    """Weights and references of the human's goal and safety costs."""

    theta3: float
    theta4: float
    theta5: float
    theta6: float
    goal: np.ndarray
    v_ref: np.ndarray

    def __post_init__(self) -> None:
        for name in ("theta3", "theta4", "theta5", "theta6"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        object.__setattr__(self, "goal", as_vector(self.goal))
        object.__setattr__(self, "v_ref", as_vector(self.v_ref))


def _post_positions(x_h: np.ndarray, actions: np.ndarray, dynamics: Dynamics) -> np.ndarray:
    # (..., n) x (K, n) -> (..., K, n)
    return dynamics.step(np.asarray(x_h, dtype=np.float64)[..., None, :], actions)


def goal_cost(x_h: AgentState, u_h: Action, obj: HumanObjectives,
              dynamics: Dynamics = Integrator()) -> float | np.ndarray:
    """theta3 * |step(x, u) - g|^2 + theta4 * |u - v_ref|^2.

    With motion restricted to one axis (the other components of state, goal,
    action and reference agree) this is exactly the one-axis form.
    """
    u = np.asarray(u_h, dtype=np.float64)
    nxt = dynamics.step(np.asarray(x_h, dtype=np.float64), u)
    return (obj.theta3 * np.sum((nxt - obj.goal) ** 2, axis=-1)
            + obj.theta4 * np.sum((u - obj.v_ref) ** 2, axis=-1))


def safety_cost(x_h: AgentState, u_h: Action, x_r_est: AgentState, obj: HumanObjectives,
                dynamics: Dynamics = Integrator()) -> float | np.ndarray:
    """theta5 * exp(-theta6 * dist), dist measured from the human's
    post-action position to the (estimated) robot position."""
    nxt = dynamics.step(np.asarray(x_h, dtype=np.float64), np.asarray(u_h, dtype=np.float64))
    dist = np.sqrt(np.sum((nxt - np.asarray(x_r_est, dtype=np.float64)) ** 2, axis=-1))
    return obj.theta5 * np.exp(-obj.theta6 * dist)


def action_costs(x_h: np.ndarray, x_r: np.ndarray, beta: int, obj: HumanObjectives,
                 actions: ActionSet, dynamics: Dynamics = Integrator()) -> np.ndarray:
    """Total cost of every action, shape ``broadcast(x_h, x_r)[:-1] + (K,)``."""
    acts = actions.actions
    nxt = _post_positions(x_h, acts, dynamics)
    cost = (obj.theta3 * np.sum((nxt - obj.goal) ** 2, axis=-1)
            + obj.theta4 * np.sum((acts - obj.v_ref) ** 2, axis=-1))
    if beta:
        x_r = np.asarray(x_r, dtype=np.float64)[..., None, :]
        dist = np.sqrt(np.sum((nxt - x_r) ** 2, axis=-1))
        cost = cost + obj.theta5 * np.exp(-obj.theta6 * dist)
    else:
        shape = np.broadcast_shapes(np.shape(x_h)[:-1], np.shape(x_r)[:-1]) + (len(actions),)
        cost = np.broadcast_to(cost, shape)
    return cost


def boltzmann(costs: np.ndarray, gamma: float) -> np.ndarray:
    """Softmax of ``-gamma * costs`` over the last axis.

    The minimum cost is subtracted first; at gamma = 1000 the raw exponents
    underflow to zero for any cost above ~0.75.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    z = -gamma * (costs - np.min(costs, axis=-1, keepdims=True))
    w = np.exp(z)
    return w / np.sum(w, axis=-1, keepdims=True)


def deliberate_distribution(x_h: AgentState, x_r: AgentState, beta: int, obj: HumanObjectives,
                            gamma: float, actions: ActionSet,
                            dynamics: Dynamics = Integrator()) -> np.ndarray:
    return boltzmann(action_costs(x_h, x_r, beta, obj, actions, dynamics), gamma)


def mixture_distribution(deliberate: np.ndarray, omega_h: float, actions: ActionSet | int) -> np.ndarray:
    """(1 - omega) * deliberate + omega * uniform."""
    if not 0.0 <= omega_h <= 1.0:
        raise ValueError(f"omega_h must lie in [0, 1], got {omega_h}")
    n = actions if isinstance(actions, int) else len(actions)
    deliberate = np.asarray(deliberate, dtype=np.float64)
    if deliberate.shape[-1] != n:
        raise ValueError("distribution does not match the action set")
    return (1.0 - omega_h) * deliberate + omega_h * np.full(n, 1.0 / n)


def action_distribution(x_h: AgentState, x_r: AgentState, beta: int, obj: HumanObjectives,
                        gamma: float, omega_h: float, actions: ActionSet,
                        dynamics: Dynamics = Integrator()) -> np.ndarray:
    """The robot's full predictive model P(u | x_H, x_R; beta)."""
    return mixture_distribution(
        deliberate_distribution(x_h, x_r, beta, obj, gamma, actions, dynamics), omega_h, actions)


@dataclass(frozen=True, eq=False)
class EstimationNoise:
    """Error in the human's estimate of the robot position.

    ``gaussian``: a fresh zero-mean draw with covariance ``sigma`` each tick.
    ``constant_bias``: ``eps0`` while the danger signal is off, decaying as
    ``eps0 * exp(-eta * (t - t_d))`` while it is on, where ``t_d`` is the
    first tick the signal came on.
    """

    mode: str = "gaussian"
    sigma: np.ndarray | float = 0.0
    eps0: np.ndarray | None = None
    eta: float = 1.0

    def __post_init__(self) -> None:
        if self.mode not in ("gaussian", "constant_bias"):
            raise ValueError(f"unknown noise mode {self.mode!r}")
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        sig = np.asarray(self.sigma, dtype=np.float64)
        if np.any(np.diag(np.atleast_2d(sig)) < 0):
            raise ValueError("sigma must be non-negative")
        object.__setattr__(self, "sigma", sig)
        if self.eps0 is not None:
            object.__setattr__(self, "eps0", as_vector(self.eps0))

    def bias(self, t: int, d_r: int, t_d: int | None) -> np.ndarray:
        eps0 = self.eps0 if self.eps0 is not None else np.zeros(1)
        if d_r and t_d is not None:
            return eps0 * np.exp(-self.eta * (t - t_d))
        return eps0

    def draw(self, rng: np.random.Generator, dim: int, t: int = 0, d_r: int = 0,
             t_d: int | None = None) -> np.ndarray:
        if self.mode == "constant_bias":
            return np.broadcast_to(self.bias(t, d_r, t_d), (dim,)).astype(np.float64)
        cov = self.sigma * np.eye(dim) if self.sigma.ndim == 0 else self.sigma
        if not np.any(cov):
            # still consume the stream so seeds line up across sigma values
            rng.standard_normal(dim)
            return np.zeros(dim)
        return rng.multivariate_normal(np.zeros(dim), cov, method="cholesky" if _is_pd(cov) else "eigh")


def _is_pd(cov: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        return False
    return True


class HumanDecision(NamedTuple):
    index: int
    action: Action
    robot_estimate: AgentState
    random: bool


def simulate_human_action(x_h: AgentState, x_r_true: AgentState, beta_true: int,
                          noise: EstimationNoise, obj: HumanObjectives, actions: ActionSet,
                          rng: np.random.Generator, randomness: bool = False, omega_h: float = 0.0,
                          *, t: int = 0, d_r: int = 0, t_d: int | None = None,
                          dynamics: Dynamics = Integrator()) -> HumanDecision:
    """Pick the simulated human's next action.

    The estimate of the robot position is drawn first, then (if randomness
    is on) a coin with bias ``omega_h`` decides whether the action is
    uniform-random instead of the cost minimizer. Ties in the minimizer go
    to the lowest action index.
    """
    x_r_true = np.asarray(x_r_true, dtype=np.float64)
    estimate = as_vector(x_r_true + noise.draw(rng, x_r_true.shape[0], t, d_r, t_d))
    if randomness:
        coin = rng.random()
        pick = int(rng.integers(len(actions)))
        if coin < omega_h:
            return HumanDecision(pick, actions[pick], estimate, True)
    costs = action_costs(np.asarray(x_h, dtype=np.float64), estimate, beta_true, obj, actions, dynamics)
    idx = int(np.argmin(costs))
    return HumanDecision(idx, actions[idx], estimate, False)
