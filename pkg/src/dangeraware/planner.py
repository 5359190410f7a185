"""Receding-horizon robot planner with a per-step chance constraint.

Every sequence of ``T+1`` actions from the robot's finite action set is
enumerated, rolled out, scored, and checked against ``P_coll[k] <= P_th``.
Exhaustive enumeration keeps the result exact and deterministic; with three
actions and ``T = 5`` that is 729 sequences, whose collision profiles are
evaluated in one batch by :meth:`HumanPredictor.batch_profiles`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .belief import Belief
from .core import Action, ActionSet, AgentState, Dynamics, Integrator, as_vector
from .prediction import CollisionProfile, HumanPredictor


@dataclass(frozen=True, eq=False)
class RobotObjectives:
    theta1: float
    theta2: float
    goal: np.ndarray

    def __post_init__(self) -> None:
        if not self.theta1 > 0:
            raise ValueError("theta1 must be positive")
        if not self.theta2 >= 0:
            raise ValueError("theta2 must be non-negative")
        object.__setattr__(self, "goal", as_vector(self.goal))


def robot_stage_cost(x_r: AgentState, u_r: Action, obj: RobotObjectives,
                     dynamics: Dynamics = Integrator()) -> float | np.ndarray:
    """theta1 * |step(x, u) - g|^2 + theta2 * |u|^2 (batched over leading axes)."""
    u = np.asarray(u_r, dtype=np.float64)
    nxt = dynamics.step(np.asarray(x_r, dtype=np.float64), u)
    return obj.theta1 * np.sum((nxt - obj.goal) ** 2, axis=-1) + obj.theta2 * np.sum(u * u, axis=-1)


@dataclass(frozen=True, eq=False)
class PlanResult:
    actions: np.ndarray  # (T+1, m)
    action_indices: tuple[int, ...]
    d_r: int
    collision_profile: CollisionProfile
    objective_value: float
    feasible: bool
    fallback_used: bool
    trajectory: np.ndarray  # (T+2, n): x_R[t] .. x_R[t+T+1]

    @property
    def first_action(self) -> Action:
        return self.actions[0]

    @property
    def first_index(self) -> int:
        return self.action_indices[0]


class Planner:
    """Enumerating chance-constrained planner.

    The sequence table is built once; :meth:`plan` is then cheap to call
    every tick.
    """

    def __init__(self, actions: ActionSet, objectives: RobotObjectives, horizon: int,
                 p_th: float, predictor: HumanPredictor, mode: str = "exact",
                 dynamics: Dynamics = Integrator()) -> None:
        if horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not 0.0 <= p_th <= 1.0:
            raise ValueError("p_th must lie in [0, 1]")
        if mode not in ("exact", "marginal"):
            raise ValueError(f"unknown collision mode {mode!r}")
        self.actions = actions
        self.objectives = objectives
        self.horizon = horizon
        self.p_th = float(p_th)
        self.predictor = predictor
        self.mode = mode
        self.dynamics = dynamics
        # lexicographic order on action indices; argmin's first-occurrence rule
        # then implements the tie-break
        self.sequences = np.array(list(itertools.product(range(len(actions)), repeat=horizon + 1)),
                                  dtype=np.int64)
        self._seq_actions = self.actions.actions[self.sequences]  # (M, T+1, m)

    def rollout(self, x_r_now: AgentState) -> np.ndarray:
        """Trajectories of every sequence, shape ``(M, T+2, n)``."""
        acts = self._seq_actions
        m = acts.shape[0]
        states = [np.broadcast_to(np.asarray(x_r_now, dtype=np.float64), (m, len(x_r_now)))]
        for k in range(self.horizon + 1):
            states.append(self.dynamics.step(states[-1], acts[:, k]))
        return np.stack(states, axis=1)

    def plan(self, x_r_now: AgentState, x_h_now: AgentState, belief: Belief) -> PlanResult:
        trajs = self.rollout(x_r_now)
        acts = self._seq_actions
        costs = robot_stage_cost(trajs[:, :-1], acts, self.objectives, self.dynamics).sum(axis=1)

        probs, survival, saturated = self.predictor.batch_profiles(
            x_h_now, trajs[:, : self.horizon + 1], belief, self.mode)
        peak = probs.max(axis=1)
        ok = peak <= self.p_th

        unconstrained = int(np.argmin(costs))
        d_r = 0 if ok[unconstrained] else 1
        if ok.any():
            masked = np.where(ok, costs, np.inf)
            choice = int(np.argmin(masked))
            feasible, fallback = True, False
        else:
            # least-bad: smallest peak collision probability, then cost, then index
            choice = int(np.lexsort((np.arange(costs.size), costs, peak))[0])
            feasible, fallback = False, True
            d_r = 1

        profile = CollisionProfile(
            probs[choice].copy(), self.mode,
            None if self.mode == "marginal" else float(survival[choice]),
            bool(saturated[choice]))
        seq = self.sequences[choice]
        return PlanResult(
            actions=self.actions.actions[seq].copy(),
            action_indices=tuple(int(i) for i in seq),
            d_r=d_r,
            collision_profile=profile,
            objective_value=float(costs[choice]),
            feasible=feasible,
            fallback_used=fallback,
            trajectory=trajs[choice].copy(),
        )


def plan(x_r_now: AgentState, x_h_now: AgentState, belief: Belief, planner: Planner) -> PlanResult:
    return planner.plan(x_r_now, x_h_now, belief)
