"""Occupancy forecasting of the human and collision probabilities.

The human position is tracked as probability mass over grid cells plus one
extra *sink* slot (index ``grid.n_cells``) that absorbs mass pushed off the
grid. Each value of the awareness coefficient gets its own chain; chains are
mixed with the current belief only when read out, since the coefficient is
held fixed over the horizon.

Two collision measures are provided for a robot trajectory
``x_R[t], ..., x_R[t+T]``:

* ``exact``: probability that the *first* entry into the collision
  neighbourhood happens at step k. Computed by removing colliding mass at
  every step (hazard / survival recursion).
* ``marginal``: probability of being in the neighbourhood at step k,
  regardless of earlier steps. An upper bound on ``exact``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .belief import Belief
from .core import ActionSet, AgentState, CellIndex, Dynamics, Grid, Integrator, OutOfGridError
from .human_model import HumanObjectives, action_costs, boltzmann

SURVIVAL_FLOOR = 1e-15


def within(a: np.ndarray, b: np.ndarray, rho: float) -> np.ndarray | bool:
    """Euclidean proximity test |a - b| <= rho, on squared distances."""
    d = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    return np.sum(d * d, axis=-1) <= rho * rho


def collision_cells(x_r_k: AgentState, grid: Grid, rho: float) -> set[CellIndex]:
    """Cells whose center lies within ``rho`` of the robot position."""
    hits = np.flatnonzero(within(grid.centers, x_r_k, rho))
    return {grid.unflatten(int(i)) for i in hits}


@dataclass(frozen=True, eq=False)
class OccupancyForecast:
    """Per-step, per-beta cell masses.

    ``masses[k, beta, cell]`` for k = 0..T (k = 0 is the current time); the
    last cell column is the off-grid sink. ``survival`` is set only for a
    collision-conditioned forecast, where colliding mass has been removed.
    """

    masses: np.ndarray
    weights: np.ndarray
    grid: Grid
    survival: np.ndarray | None = None

    @property
    def horizon(self) -> int:
        return self.masses.shape[0] - 1

    @property
    def combined(self) -> np.ndarray:
        return np.einsum("kbc,b->kc", self.masses, self.weights)

    def row_sums(self) -> np.ndarray:
        return self.combined.sum(axis=1)

    def entropy(self, k: int) -> float:
        """Shannon entropy (nats) of the belief-weighted occupancy at step k."""
        p = self.combined[k]
        p = p[p > 0]
        p = p / p.sum()
        return float(-np.sum(p * np.log(p)))

    def table(self) -> list[dict[str, float | int | str]]:
        """Dense per-step table, one row per cell plus one for the sink."""
        rows: list[dict[str, float | int | str]] = []
        comb = self.combined
        n = self.grid.n_cells
        for k in range(self.masses.shape[0]):
            for c in range(n + 1):
                row: dict[str, float | int | str] = {"k": k, "cell": c if c < n else -1}
                center = self.grid.centers[c] if c < n else None
                for ax in range(self.grid.ndim):
                    row[f"x{ax}"] = float(center[ax]) if center is not None else ""
                row["mass"] = float(comb[k, c])
                row["mass_beta0"] = float(self.masses[k, 0, c])
                row["mass_beta1"] = float(self.masses[k, 1, c])
                rows.append(row)
        return rows


@dataclass(frozen=True, eq=False)
class CollisionProfile:
    """``probs[k]`` for k = 0..T; ``probs[0]`` is always 0 (no collision now).

    ``survival`` (exact mode) is the belief-weighted probability of no
    collision anywhere in the horizon, so ``probs.sum() + survival == 1``.
    """

    probs: np.ndarray
    mode: str
    survival: float | None = None
    saturated: bool = False

    def __len__(self) -> int:
        return self.probs.shape[0]

    def __getitem__(self, k: int) -> float:
        return float(self.probs[k])

    @property
    def peak(self) -> float:
        return float(self.probs.max())


class HumanPredictor:
    """Everything the robot needs to forecast the human on a grid.

    Mixture tables and collision masks depend only on the robot position,
    so they are cached per position and reused across candidate plans,
    planning steps and episodes that share a predictor.
    """

    def __init__(self, grid: Grid, actions: ActionSet, objectives: HumanObjectives,
                 gamma: float, omega_h: float, rho: float,
                 dynamics: Dynamics = Integrator(), cache_size: int = 20000) -> None:
        if not gamma > 0:
            raise ValueError("gamma must be positive")
        if not 0.0 <= omega_h <= 1.0:
            raise ValueError("omega_h must lie in [0, 1]")
        if not rho > 0:
            raise ValueError("rho must be positive")
        self.grid = grid
        self.actions = actions
        self.objectives = objectives
        self.gamma = float(gamma)
        self.omega_h = float(omega_h)
        self.rho = float(rho)
        self.dynamics = dynamics
        self.cache_size = cache_size

        n, k = grid.n_cells, len(actions)
        self.n_cells = n
        self.sink = n
        nxt = dynamics.step(grid.centers[:, None, :], actions.actions)
        dest = grid.locate(nxt)
        self.next_cell = np.where(dest < 0, self.sink, dest)  # (N, K)
        scatter = np.zeros((n * k, n + 1))
        scatter[np.arange(n * k), self.next_cell.reshape(-1)] = 1.0
        self._scatter = scatter
        self._mix: dict[tuple[float, ...], np.ndarray] = {}
        self._mask: dict[tuple[float, ...], np.ndarray] = {}

    # -- per-robot-position tables -------------------------------------------
    def mixture_table(self, x_r: AgentState) -> np.ndarray:
        """P(u | cell, x_R; beta) for every cell, shape ``(2, N, K)``."""
        key = tuple(np.asarray(x_r, dtype=np.float64).tolist())
        tab = self._mix.get(key)
        if tab is None:
            if len(self._mix) >= self.cache_size:
                self._mix.clear()
            x_r = np.asarray(key)
            per_beta = [boltzmann(action_costs(self.grid.centers, x_r, beta, self.objectives,
                                               self.actions, self.dynamics), self.gamma)
                        for beta in (0, 1)]
            k = len(self.actions)
            tab = (1.0 - self.omega_h) * np.stack(per_beta) + self.omega_h * np.full(k, 1.0 / k)
            tab.setflags(write=False)
            self._mix[key] = tab
        return tab

    def collision_mask(self, x_r: AgentState) -> np.ndarray:
        """Boolean mask over cells + sink; the sink never collides."""
        key = tuple(np.asarray(x_r, dtype=np.float64).tolist())
        m = self._mask.get(key)
        if m is None:
            if len(self._mask) >= self.cache_size:
                self._mask.clear()
            m = np.zeros(self.n_cells + 1, dtype=bool)
            m[:-1] = within(self.grid.centers, np.asarray(key), self.rho)
            m.setflags(write=False)
            self._mask[key] = m
        return m

    # -- core recursion ----------------------------------------------------------
    def point_mass(self, x_h_now: AgentState) -> np.ndarray:
        cell = self.grid.state_to_cell(x_h_now)
        m = np.zeros((2, self.n_cells + 1))
        m[:, self.grid.flat_index(cell)] = 1.0
        return m

    def push(self, mass: np.ndarray, tables: np.ndarray) -> np.ndarray:
        """One step of the occupancy recursion.

        ``mass``: ``(B, 2, N+1)``; ``tables``: ``(B, 2, N, K)`` mixture
        tables at each node's robot position.
        """
        b = mass.shape[0]
        w = mass[..., :-1, None] * tables  # (B, 2, N, K)
        out = w.reshape(b * 2, -1) @ self._scatter
        out = out.reshape(b, 2, -1)
        out[..., -1] += mass[..., -1]
        return out

    def _tables(self, positions: Iterable[np.ndarray]) -> np.ndarray:
        return np.stack([self.mixture_table(p) for p in positions])

    def batch_profiles(self, x_h_now: AgentState, trajectories: np.ndarray, belief: Belief,
                       mode: str = "exact") -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Collision profiles for many robot trajectories at once.

        ``trajectories`` has shape ``(M, T+1, n)``. Candidates sharing a
        trajectory prefix share the propagation work. Returns
        ``(probs (M, T+1), survival (M,), saturated (M,))``; survival is NaN
        in marginal mode.
        """
        if mode not in ("exact", "marginal"):
            raise ValueError(f"unknown collision mode {mode!r}")
        trajs = np.asarray(trajectories, dtype=np.float64)
        m_count, t1, _ = trajs.shape
        weights = belief.weights
        exact = mode == "exact"

        # one id per distinct robot position; a prefix is then identified by
        # (parent prefix id, position id), a 1-D integer key
        upos, pos_id = _unique_rows(trajs.reshape(-1, trajs.shape[-1]))
        pos_id = pos_id.reshape(m_count, t1)
        n_pos = upos.shape[0]
        tables = self._tables(upos)  # (P, 2, N, K)
        masks = np.stack([self.collision_mask(p) for p in upos])  # (P, N+1)

        if not self._may_collide(x_h_now, pos_id, masks):
            # no robot position meets the human's reachable set: the
            # recursion would produce exact zeros
            survival = np.ones(m_count) if exact else np.full(m_count, np.nan)
            return np.zeros((m_count, t1)), survival, np.zeros(m_count, dtype=bool)

        _, first, inv = np.unique(pos_id[:, 0], return_index=True, return_inverse=True)
        inv = inv.reshape(-1)
        nodes = np.repeat(self.point_mass(x_h_now)[None], first.size, axis=0)
        node_pid = pos_id[first, 0]
        dead = np.zeros((first.size, 2), dtype=bool)

        probs = np.zeros((m_count, t1))
        for k in range(t1 - 1):
            prop = self.push(nodes, tables[node_pid])
            key = inv.astype(np.int64) * n_pos + pos_id[:, k + 1]
            _, first_c, inv_c = np.unique(key, return_index=True, return_inverse=True)
            inv_c = inv_c.reshape(-1)
            parent = inv[first_c]
            child = prop[parent]
            child_dead = dead[parent].copy()
            child_pid = pos_id[first_c, k + 1]
            cmask = masks[child_pid]  # (C, N+1)
            hit = np.where(cmask[:, None, :], child, 0.0).sum(axis=-1)  # (C, 2)
            if exact:
                hit = np.where(child_dead, 0.0, hit)
                child = np.where(cmask[:, None, :], 0.0, child)
                surv = child.sum(axis=-1)
                newly = (surv < SURVIVAL_FLOOR) & ~child_dead
                child_dead |= newly
                child = np.where(child_dead[..., None], 0.0, child)
            probs[:, k + 1] = (hit @ weights)[inv_c]
            nodes, inv, node_pid, dead = child, inv_c, child_pid, child_dead

        if exact:
            survival = (nodes.sum(axis=-1) @ weights)[inv]
            saturated = dead.any(axis=1)[inv]
        else:
            survival = np.full(m_count, np.nan)
            saturated = np.zeros(m_count, dtype=bool)
        return probs, survival, saturated

    def _may_collide(self, x_h_now: AgentState, pos_id: np.ndarray, masks: np.ndarray) -> bool:
        support = np.zeros(self.n_cells + 1, dtype=bool)
        support[self.grid.flat_index(self.grid.state_to_cell(x_h_now))] = True
        for k in range(1, pos_id.shape[1]):
            nxt = np.zeros_like(support)
            nxt[self.next_cell[support[:-1]].reshape(-1)] = True
            nxt[-1] |= support[-1]
            support = nxt
            if np.any(masks[np.unique(pos_id[:, k])][:, support]):
                return True
        return False

    def likelihoods(self, x_h: AgentState, x_r: AgentState) -> np.ndarray:
        """Predictive action distributions for beta = 0 and 1, shape ``(2, K)``."""
        per_beta = [boltzmann(action_costs(np.asarray(x_h, dtype=np.float64), x_r, beta,
                                           self.objectives, self.actions, self.dynamics), self.gamma)
                    for beta in (0, 1)]
        k = len(self.actions)
        return (1.0 - self.omega_h) * np.stack(per_beta) + self.omega_h * np.full(k, 1.0 / k)


def _unique_rows(rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Distinct rows (lexicographic order) and the inverse index; a column
    lexsort is much cheaper than ``np.unique(axis=0)`` for few columns."""
    order = np.lexsort(rows.T[::-1])
    srt = rows[order]
    new = np.ones(len(srt), dtype=bool)
    new[1:] = np.any(srt[1:] != srt[:-1], axis=1)
    ids = np.cumsum(new) - 1
    inv = np.empty(len(rows), dtype=np.int64)
    inv[order] = ids
    return srt[new], inv


def _check_traj(trajectory: np.ndarray, horizon: int | None) -> np.ndarray:
    traj = np.asarray(trajectory, dtype=np.float64)
    if traj.ndim != 2:
        raise ValueError("robot trajectory must be a (T+1, n) array")
    if horizon is not None and traj.shape[0] != horizon + 1:
        raise ValueError(f"robot trajectory must have {horizon + 1} entries, got {traj.shape[0]}")
    return traj


def propagate_occupancy(x_h_now: AgentState, x_r_trajectory: np.ndarray, belief: Belief,
                        predictor: HumanPredictor, horizon: int | None = None,
                        condition_on_survival: bool = False) -> OccupancyForecast:
    """Forecast the human's cell occupancy along one robot trajectory.

    With ``condition_on_survival`` the mass colliding with the robot at each
    step is removed, giving the collision-conditioned (sub-probability)
    forecast used by the exact collision measure.
    """
    traj = _check_traj(x_r_trajectory, horizon)
    if not predictor.grid.contains(x_h_now):
        raise OutOfGridError(f"human state {np.asarray(x_h_now).tolist()} is off the grid")
    mass = predictor.point_mass(x_h_now)
    history = [mass]
    survival = [np.ones(2)]
    for k in range(traj.shape[0] - 1):
        mass = predictor.push(mass[None], predictor.mixture_table(traj[k])[None])[0]
        if condition_on_survival:
            mass = np.where(predictor.collision_mask(traj[k + 1]), 0.0, mass)
            survival.append(mass.sum(axis=-1))
        history.append(mass)
    return OccupancyForecast(
        masses=np.stack(history), weights=belief.weights, grid=predictor.grid,
        survival=np.stack(survival) if condition_on_survival else None)


def collision_profile_exact(x_h_now: AgentState, x_r_trajectory: np.ndarray, belief: Belief,
                            predictor: HumanPredictor, horizon: int | None = None) -> CollisionProfile:
    """First-collision probabilities via the hazard / survival recursion.

    For each beta chain: the hazard at step k is the share of surviving mass
    that enters the collision cells, the first-collision probability is that
    hazard times the survival up to k-1, and survival is then reduced by the
    hazard before propagating on.
    """
    traj = _check_traj(x_r_trajectory, horizon)
    if not predictor.grid.contains(x_h_now):
        raise OutOfGridError(f"human state {np.asarray(x_h_now).tolist()} is off the grid")
    weights = belief.weights
    cond = predictor.point_mass(x_h_now)  # occupancy conditioned on no collision so far
    surv = np.ones(2)
    per_beta = np.zeros((traj.shape[0], 2))
    saturated = False
    for k in range(1, traj.shape[0]):
        cond = predictor.push(cond[None], predictor.mixture_table(traj[k - 1])[None])[0]
        mask = predictor.collision_mask(traj[k])
        hazard = np.where(mask, cond, 0.0).sum(axis=-1)
        alive = surv >= SURVIVAL_FLOOR
        saturated |= bool(np.any(~alive))
        per_beta[k] = np.where(alive, hazard * surv, 0.0)
        surv = np.where(alive, surv * (1.0 - hazard), 0.0)
        rest = np.where(mask, 0.0, cond)
        norm = rest.sum(axis=-1, keepdims=True)
        cond = np.divide(rest, norm, out=np.zeros_like(rest), where=norm > 0)
    return CollisionProfile(per_beta @ weights, "exact", float(surv @ weights), saturated)


def collision_profile_marginal(forecast: OccupancyForecast, x_r_trajectory: np.ndarray,
                               predictor: HumanPredictor) -> CollisionProfile:
    """Occupancy mass inside the collision cells at each step, ignoring
    earlier steps. Needs an unconditional forecast."""
    if forecast.survival is not None:
        raise ValueError("marginal bound needs an unconditional forecast")
    traj = _check_traj(x_r_trajectory, forecast.horizon)
    comb = forecast.combined
    probs = np.zeros(traj.shape[0])
    for k in range(1, traj.shape[0]):
        probs[k] = comb[k][predictor.collision_mask(traj[k])].sum()
    return CollisionProfile(probs, "marginal")
