"""State vectors, action sets, dynamics and the discrete human-state grid.

States and actions are plain float64 numpy vectors. They are made read-only
on construction so they can be shared freely between the planner, the
predictor and the simulator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Protocol, Sequence

import numpy as np

AgentState = np.ndarray
Action = np.ndarray
CellIndex = tuple[int, ...]


class OutOfGridError(ValueError):
    """Raised when a state falls outside the grid bounding box."""


class ActionError(ValueError):
    """Raised when an action is not a member of the agent's action set."""


def as_vector(values: Sequence[float] | np.ndarray) -> np.ndarray:
    """Return a read-only float64 1-D copy of ``values``."""
    arr = np.array(values, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"non-finite entries in {arr!r}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ActionSet:
    """Ordered, duplicate-free finite set of actions.

    The order matters: it fixes tie-breaking everywhere (lowest index wins)
    and the column order of every action distribution.
    """

    actions: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.actions, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[:, None]
        if arr.ndim != 2 or arr.shape[0] == 0:
            raise ValueError("action set must be a non-empty list of vectors")
        if not np.all(np.isfinite(arr)):
            raise ValueError("action set contains non-finite entries")
        if len({tuple(row) for row in arr.tolist()}) != arr.shape[0]:
            raise ValueError("action set contains duplicate actions")
        arr.setflags(write=False)
        object.__setattr__(self, "actions", arr)

    def __len__(self) -> int:
        return self.actions.shape[0]

    def __getitem__(self, i: int) -> Action:
        return self.actions[i]

    def __iter__(self) -> Iterator[Action]:
        return iter(self.actions)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ActionSet):
            return NotImplemented
        return self.actions.shape == other.actions.shape and bool(
            np.array_equal(self.actions, other.actions)
        )

    @property
    def dim(self) -> int:
        return self.actions.shape[1]

    def index_of(self, action: Action) -> int:
        """Exact-match lookup of ``action``; raises :class:`ActionError`."""
        a = np.asarray(action, dtype=np.float64).reshape(-1)
        if a.shape[0] == self.dim:
            hits = np.flatnonzero(np.all(self.actions == a, axis=1))
            if hits.size:
                return int(hits[0])
        raise ActionError(f"{a.tolist()} is not in the action set")

    def __contains__(self, action: object) -> bool:
        try:
            self.index_of(action)  # type: ignore[arg-type]
        except ActionError:
            return False
        return True

    def tolist(self) -> list[list[float]]:
        return self.actions.tolist()


class Dynamics(Protocol):
    """Single-step transition map. Implementations must broadcast over
    leading axes so the planner can roll out many candidates at once."""

    name: str

    def step(self, state: np.ndarray, action: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class Integrator:
    """x[t+1] = x[t] + u[t]"""

    name: str = "integrator"

    def step(self, state: np.ndarray, action: np.ndarray) -> np.ndarray:
        return np.add(state, action)


DYNAMICS: dict[str, type] = {"integrator": Integrator}


def make_dynamics(name: str) -> Dynamics:
    try:
        return DYNAMICS[name]()
    except KeyError:
        raise ValueError(f"unknown dynamics {name!r}; known: {sorted(DYNAMICS)}") from None


def step(dynamics: Dynamics, state: AgentState, action: Action,
         actions: ActionSet | None = None) -> AgentState:
    """Advance one tick. If ``actions`` is given, membership is enforced."""
    if actions is not None:
        actions.index_of(action)
    return as_vector(dynamics.step(np.asarray(state, dtype=np.float64),
                                   np.asarray(action, dtype=np.float64)))


@dataclass(frozen=True)
class Grid:
    """Axis-aligned regular grid over the human state space.

    ``origin`` is the *center* of cell (0, ..., 0); cell ``c`` has center
    ``origin + c * cell_size``. A state belongs to the cell whose center is
    nearest along every axis, so the bounding box extends half a cell past
    the outermost centers.
    """

    origin: tuple[float, ...]
    cell_size: tuple[float, ...]
    counts: tuple[int, ...]
    _strides: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        origin = tuple(float(v) for v in self.origin)
        size = tuple(float(v) for v in self.cell_size)
        counts = tuple(int(v) for v in self.counts)
        if not (len(origin) == len(size) == len(counts)) or not origin:
            raise ValueError("origin, cell_size and counts must have the same length")
        if any(not np.isfinite(v) for v in origin):
            raise ValueError("grid origin must be finite")
        if any(not (s > 0 and np.isfinite(s)) for s in size):
            raise ValueError("cell_size must be positive")
        if any(c < 1 for c in counts):
            raise ValueError("counts must be positive")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "cell_size", size)
        object.__setattr__(self, "counts", counts)
        # row-major strides for flat indexing
        strides = np.cumprod((1,) + counts[:0:-1])[::-1]
        object.__setattr__(self, "_strides", tuple(int(s) for s in strides))

    @property
    def ndim(self) -> int:
        return len(self.counts)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.counts))

    def _fractional(self, states: np.ndarray) -> np.ndarray:
        return (np.asarray(states, dtype=np.float64) - np.asarray(self.origin)) / np.asarray(self.cell_size)

    def locate(self, states: np.ndarray) -> np.ndarray:
        """Flat cell indices for a batch of states (shape ``(..., ndim)``);
        ``-1`` marks states outside the bounding box."""
        idx = np.floor(self._fractional(states) + 0.5).astype(np.int64)
        inside = np.all((idx >= 0) & (idx < np.asarray(self.counts)), axis=-1)
        flat = idx @ np.asarray(self._strides, dtype=np.int64)
        return np.where(inside, flat, -1)

    def state_to_cell(self, state: AgentState) -> CellIndex:
        s = np.asarray(state, dtype=np.float64).reshape(-1)
        if s.shape[0] != self.ndim:
            raise ValueError(f"state has dimension {s.shape[0]}, grid has {self.ndim}")
        idx = np.floor(self._fractional(s) + 0.5).astype(np.int64)
        if np.any(idx < 0) or np.any(idx >= np.asarray(self.counts)):
            raise OutOfGridError(f"state {s.tolist()} is outside the grid bounding box")
        return tuple(int(i) for i in idx)

    def cell_center(self, cell: CellIndex) -> AgentState:
        c = np.asarray(cell, dtype=np.int64)
        if c.shape != (self.ndim,) or np.any(c < 0) or np.any(c >= np.asarray(self.counts)):
            raise OutOfGridError(f"cell {tuple(cell)} is not on the grid")
        return as_vector(np.asarray(self.origin) + c * np.asarray(self.cell_size))

    def flat_index(self, cell: CellIndex) -> int:
        return int(np.dot(cell, self._strides))

    def unflatten(self, flat: int) -> CellIndex:
        return tuple(int(i) for i in np.unravel_index(flat, self.counts))

    @cached_property
    def centers(self) -> np.ndarray:
        """All cell centers in flat-index order, shape ``(n_cells, ndim)``."""
        mesh = np.meshgrid(*[np.arange(n) for n in self.counts], indexing="ij")
        idx = np.stack([m.reshape(-1) for m in mesh], axis=-1)
        out = np.asarray(self.origin) + idx * np.asarray(self.cell_size)
        out.setflags(write=False)
        return out

    def contains(self, state: AgentState) -> bool:
        return bool(self.locate(np.asarray(state, dtype=np.float64)[None, :])[0] >= 0)
