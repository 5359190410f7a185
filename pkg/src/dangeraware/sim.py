"""Closed-loop robot/pedestrian episodes and parameter sweeps.

Each tick: the robot plans against its forecast (which also sets the danger
signal), the simulated human picks an action from its noisy view of the
robot, the robot updates its belief from that action, and both agents move.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Sequence

import numpy as np

from .belief import Belief, DegenerateEvidenceError, update_belief
from .config import HumanConfig, PredictionConfig, RobotConfig, ScenarioConfig, resolve_field
from .core import make_dynamics, step
from .human_model import EstimationNoise, HumanObjectives, action_costs, simulate_human_action
from .planner import Planner, RobotObjectives
from .prediction import HumanPredictor, OccupancyForecast, propagate_occupancy, within

OUTCOMES = ("robot_reached_goal", "human_reached_goal", "both_reached", "collision", "timeout")
GOAL_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class StepRecord:
    t: int
    x_r: np.ndarray
    x_h: np.ndarray
    u_r: np.ndarray
    u_h: np.ndarray
    d_r: int
    p_aware: float  # belief after observing this tick's human action
    collision_profile: np.ndarray  # planned P_coll[t+1..t+T]
    x_r_est_human: np.ndarray
    fallback_used: bool
    feasible: bool

    def as_row(self) -> dict[str, Any]:
        row: dict[str, Any] = {"t": self.t}
        for name in ("x_r", "x_h", "u_r", "u_h"):
            for i, v in enumerate(getattr(self, name)):
                row[f"{name}_{i}"] = float(v)
        row["d_r"] = self.d_r
        row["p_aware"] = self.p_aware
        for k, p in enumerate(self.collision_profile, start=1):
            row[f"p_coll_{k}"] = float(p)
        for i, v in enumerate(self.x_r_est_human):
            row[f"x_r_est_human_{i}"] = float(v)
        row["fallback_used"] = int(self.fallback_used)
        row["feasible"] = int(self.feasible)
        return row


@dataclass(eq=False)
class EpisodeResult:
    config: ScenarioConfig
    records: list[StepRecord]
    outcome: str
    steps_to_robot_goal: int | None
    steps_to_human_goal: int | None
    final_x_r: np.ndarray
    final_x_h: np.ndarray
    final_belief: Belief
    forecast: OccupancyForecast | None = None

    @property
    def collided(self) -> bool:
        return self.outcome == "collision"

    def trace_rows(self) -> list[dict[str, Any]]:
        return [r.as_row() for r in self.records]


@dataclass(frozen=True, eq=False)
class Components:
    predictor: HumanPredictor
    planner: Planner
    human_objectives: HumanObjectives


@lru_cache(maxsize=32)
def _components(robot: RobotConfig, human: HumanConfig, prediction: PredictionConfig) -> Components:
    hobj = HumanObjectives(human.theta3, human.theta4, human.theta5, human.theta6,
                           np.asarray(human.goal), np.asarray(human.v_ref))
    hactions = ScenarioConfig(robot=robot, human=human, prediction=prediction).human_actions
    ractions = ScenarioConfig(robot=robot, human=human, prediction=prediction).robot_actions
    predictor = HumanPredictor(prediction.grid, hactions, hobj, human.gamma, human.omega_h,
                               prediction.rho, make_dynamics(human.dynamics))
    robj = RobotObjectives(robot.theta1, robot.theta2, np.asarray(robot.goal))
    planner = Planner(ractions, robj, robot.horizon, robot.p_th, predictor,
                      prediction.bound_mode, make_dynamics(robot.dynamics))
    return Components(predictor, planner, hobj)


def build(config: ScenarioConfig) -> Components:
    """Predictor/planner for a config; cached so repeated episodes share
    the predictor's per-position tables."""
    return _components(config.robot, config.human, config.prediction)


def _reached(x: np.ndarray, goal: Sequence[float]) -> bool:
    return bool(np.max(np.abs(x - np.asarray(goal))) <= GOAL_TOL)


def run_episode(config: ScenarioConfig, forecast_at: int | None = None) -> EpisodeResult:
    """Run one closed-loop episode.

    ``forecast_at``: if set, the unconditional occupancy forecast computed
    along the chosen plan at that tick is attached to the result.
    """
    comp = build(config)
    predictor, planner, hobj = comp.predictor, comp.planner, comp.human_objectives
    rdyn, hdyn = make_dynamics(config.robot.dynamics), make_dynamics(config.human.dynamics)
    ractions, hactions = config.robot_actions, config.human_actions
    h, sim = config.human, config.simulation
    noise = EstimationNoise(sim.noise_mode, h.sigma_matrix, np.asarray(h.eps0), h.eta)
    rng = np.random.default_rng(sim.rng_seed)
    rho = config.prediction.rho

    x_r = np.asarray(config.robot.start, dtype=np.float64)
    x_h = np.asarray(config.human.start, dtype=np.float64)
    belief = Belief(config.prior.p_aware, config.prior.p_unaware)
    records: list[StepRecord] = []
    forecast = None
    t_d: int | None = None
    robot_t = 0 if _reached(x_r, config.robot.goal) else None
    human_t = 0 if _reached(x_h, config.human.goal) else None
    collided = bool(within(x_r, x_h, rho))

    t = 0
    while not collided and not (robot_t is not None and human_t is not None) and t < sim.max_steps:
        result = planner.plan(x_r, x_h, belief)
        if forecast_at is not None and t == forecast_at:
            forecast = propagate_occupancy(x_h, result.trajectory[: planner.horizon + 1], belief, predictor)
        d_r = result.d_r
        if d_r and t_d is None:
            t_d = t
        decision = simulate_human_action(
            x_h, x_r, h.beta_true, noise, hobj, hactions, rng, sim.human_randomness, h.omega_h,
            t=t, d_r=d_r, t_d=t_d, dynamics=hdyn)
        try:
            belief = update_belief(belief, decision.index, predictor.likelihoods(x_h, x_r))
        except DegenerateEvidenceError:
            # only possible with omega_h = 0: an action neither hypothesis
            # explains says nothing about beta, so the belief is kept
            pass
        u_r = result.first_action
        records.append(StepRecord(
            t=t, x_r=x_r.copy(), x_h=x_h.copy(), u_r=u_r.copy(), u_h=np.array(decision.action),
            d_r=d_r, p_aware=belief.p_aware, collision_profile=result.collision_profile.probs[1:].copy(),
            x_r_est_human=np.array(decision.robot_estimate), fallback_used=result.fallback_used,
            feasible=result.feasible))
        x_r = np.asarray(step(rdyn, x_r, u_r, ractions))
        x_h = np.asarray(step(hdyn, x_h, decision.action, hactions))
        t += 1
        collided = bool(within(x_r, x_h, rho))
        if robot_t is None and _reached(x_r, config.robot.goal):
            robot_t = t
        if human_t is None and _reached(x_h, config.human.goal):
            human_t = t

    if collided:
        outcome = "collision"
    elif robot_t is not None and human_t is not None:
        outcome = "both_reached"
    elif robot_t is not None:
        outcome = "robot_reached_goal"
    elif human_t is not None:
        outcome = "human_reached_goal"
    else:
        outcome = "timeout"
    return EpisodeResult(config, records, outcome, robot_t, human_t, x_r, x_h, belief, forecast)


@dataclass
class SweepReport:
    parameter: str
    values: list[Any]
    replications: int
    rows: list[dict[str, Any]] = field(default_factory=list)
    episodes: list[EpisodeResult] = field(default_factory=list)

    def summary(self) -> list[dict[str, Any]]:
        """One row per parameter value: outcome rates, mean steps to goal,
        and mean forecast entropy at each horizon depth."""
        out = []
        for v in self.values:
            rows = [r for r in self.rows if r["value"] == v]
            n = len(rows)
            counts = Counter(r["outcome"] for r in rows)
            entry: dict[str, Any] = {"value": v, "replications": n}
            for o in OUTCOMES:
                entry[f"rate_{o}"] = counts.get(o, 0) / n
            steps = [r["steps_to_robot_goal"] for r in rows if r["steps_to_robot_goal"] != ""]
            entry["mean_steps_to_robot_goal"] = float(np.mean(steps)) if steps else ""
            for key in sorted(k for k in rows[0] if k.startswith("entropy_")):
                vals = [r[key] for r in rows if r[key] != ""]
                entry[key] = float(np.mean(vals)) if vals else ""
            out.append(entry)
        return out


def run_sweep(base: ScenarioConfig, parameter: str, values: Sequence[Any], replications: int,
              keep_episodes: bool = True) -> SweepReport:
    """Run ``replications`` episodes per value. Replication ``i`` uses seed
    ``base.simulation.rng_seed + i`` for every value, so runs are paired
    across values."""
    resolve_field(parameter)  # raises ConfigError on unknown names
    if replications < 1:
        raise ValueError("replications must be >= 1")
    report = SweepReport(parameter, list(values), replications)
    horizon = base.robot.horizon
    for v in values:
        cfg_v = base.replace(parameter, v)
        for rep in range(replications):
            seed = base.simulation.rng_seed + rep
            cfg = cfg_v.replace("simulation.rng_seed", seed)
            ep = run_episode(cfg, forecast_at=0)
            row: dict[str, Any] = {
                "value": v, "replication": rep, "seed": seed, "outcome": ep.outcome,
                "steps_to_robot_goal": "" if ep.steps_to_robot_goal is None else ep.steps_to_robot_goal,
                "steps_to_human_goal": "" if ep.steps_to_human_goal is None else ep.steps_to_human_goal,
                "n_steps": len(ep.records),
                "final_p_aware": ep.final_belief.p_aware,
            }
            for k in range(1, horizon + 1):
                row[f"entropy_{k}"] = ep.forecast.entropy(k) if ep.forecast is not None else ""
            report.rows.append(row)
            if keep_episodes:
                report.episodes.append(ep)
    return report


# -- trace analysis ------------------------------------------------------------
def goal_only_choice(config: ScenarioConfig, x_h: np.ndarray) -> int:
    """Index of the action the pedestrian would take if it ignored the robot."""
    hobj = build(config).human_objectives
    costs = action_costs(np.asarray(x_h, dtype=np.float64), np.zeros_like(x_h), 0, hobj,
                         config.human_actions, make_dynamics(config.human.dynamics))
    return int(np.argmin(costs))


def safety_driven(episode: EpisodeResult) -> np.ndarray:
    """Per step: did the pedestrian deviate from its goal-only choice?"""
    acts = episode.config.human_actions
    return np.array([acts.index_of(r.u_h) != goal_only_choice(episode.config, r.x_h)
                     for r in episode.records], dtype=bool)


def crossing_direction(config: ScenarioConfig) -> np.ndarray:
    """Unit vector from the pedestrian's start toward its goal."""
    d = np.asarray(config.human.goal) - np.asarray(config.human.start)
    return d / np.linalg.norm(d)


def yield_steps(episode: EpisodeResult) -> list[int]:
    """Steps where the pedestrian made less progress toward its goal than
    its goal-only choice would have, i.e. held back for the robot."""
    cfg = episode.config
    acts, e = cfg.human_actions, crossing_direction(cfg)
    out = []
    for r, driven in zip(episode.records, safety_driven(episode)):
        if driven and float(r.u_h @ e) < float(acts[goal_only_choice(cfg, r.x_h)] @ e):
            out.append(r.t)
    return out


def realization_displacement(episode: EpisodeResult, after: int = 0) -> tuple[int, float] | None:
    """Reaction to the danger once the pedestrian realizes it.

    Realization is the first step at or after ``after`` where the action is
    safety-driven. Returns that step and the net displacement along the
    crossing direction over the unbroken run of safety-driven steps that
    starts there: negative means back toward the start side, positive
    toward the far side. ``None`` if the pedestrian never reacts.
    """
    driven = safety_driven(episode)
    starts = [i for i, r in enumerate(episode.records) if r.t >= after and driven[i]]
    if not starts:
        return None
    i0 = i1 = starts[0]
    while i1 < len(driven) and driven[i1]:
        i1 += 1
    x_end = episode.records[i1].x_h if i1 < len(episode.records) else episode.final_x_h
    disp = float((x_end - episode.records[i0].x_h) @ crossing_direction(episode.config))
    return episode.records[i0].t, disp


def in_road_band(config: ScenarioConfig, x_h: np.ndarray) -> bool:
    """Strictly between the start and goal sidewalks along the crossing."""
    e = crossing_direction(config)
    s = float((np.asarray(x_h) - np.asarray(config.human.start)) @ e)
    return 0.0 < s < float((np.asarray(config.human.goal) - np.asarray(config.human.start)) @ e)
