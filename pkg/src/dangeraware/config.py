"""Scenario configuration: dataclasses, validation and INI-style file I/O.

A scenario file is a standard INI file with the sections ``[robot]``,
``[human]``, ``[prediction]``, ``[prior]`` and ``[simulation]``. Values are
JSON literals (numbers, lists) except for the few enumerated settings,
which are bare words. See ``docs/config.md`` in the repository for the full
schema.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .core import ActionSet, Dynamics, Grid, make_dynamics

SECTIONS = ("robot", "human", "prediction", "prior", "simulation")
SCENARIO_DIR = Path(__file__).with_name("scenarios")


class ConfigError(ValueError):
    """Invalid scenario configuration. ``field`` names the offending key."""

    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"{field}: {message}")
        self.field = field


def _vec(value: Any, name: str) -> tuple[float, ...]:
    try:
        arr = np.asarray(value, dtype=np.float64).reshape(-1)
    except (TypeError, ValueError):
        raise ConfigError(name, f"expected a numeric vector, got {value!r}") from None
    if arr.size == 0 or not np.all(np.isfinite(arr)):
        raise ConfigError(name, f"expected a finite non-empty vector, got {value!r}")
    return tuple(float(v) for v in arr)


def _num(value: Any, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(name, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(name, f"expected a finite number, got {value!r}")
    return float(value)


def _actions(value: Any, name: str) -> tuple[tuple[float, ...], ...]:
    try:
        return tuple(tuple(float(x) for x in row) for row in ActionSet(np.asarray(value, dtype=np.float64)).actions)
    except (TypeError, ValueError) as exc:
        raise ConfigError(name, str(exc)) from None


def _positive(value: float, name: str, strict: bool = True) -> None:
    if (strict and not value > 0) or (not strict and not value >= 0):
        raise ConfigError(name, f"must be {'> 0' if strict else '>= 0'}, got {value}")


@dataclass(frozen=True)
class RobotConfig:
    dynamics: str = "integrator"
    action_set: tuple[tuple[float, ...], ...] = ((0.0, 0.0), (0.0, 1.0), (0.0, 2.0))
    goal: tuple[float, ...] = (0.0, 80.0)
    start: tuple[float, ...] = (0.0, 0.0)
    theta1: float = 1.0
    theta2: float = 0.5
    horizon: int = 5
    p_th: float = 0.1

    def __post_init__(self) -> None:
        p = "robot."
        make_dynamics_checked(self.dynamics, p + "dynamics")
        object.__setattr__(self, "action_set", _actions(self.action_set, p + "action_set"))
        object.__setattr__(self, "goal", _vec(self.goal, p + "goal"))
        object.__setattr__(self, "start", _vec(self.start, p + "start"))
        for name in ("theta1", "theta2", "p_th"):
            object.__setattr__(self, name, _num(getattr(self, name), p + name))
        _positive(self.theta1, p + "theta1")
        _positive(self.theta2, p + "theta2", strict=False)
        if not 0.0 <= self.p_th <= 1.0:
            raise ConfigError(p + "p_th", f"must lie in [0, 1], got {self.p_th}")
        if isinstance(self.horizon, bool) or not isinstance(self.horizon, (int, float)) \
                or int(self.horizon) != self.horizon or self.horizon < 1:
            raise ConfigError(p + "horizon", f"must be a positive integer, got {self.horizon!r}")
        object.__setattr__(self, "horizon", int(self.horizon))
        dim = len(self.goal)
        if len(self.start) != dim or len(self.action_set[0]) != dim:
            raise ConfigError(p + "goal", "goal, start and actions must share one dimension")


@dataclass(frozen=True)
class HumanConfig:
    dynamics: str = "integrator"
    action_set: tuple[tuple[float, ...], ...] = (
        (-1.0, 0.0), (-0.5, 0.0), (0.0, 0.0), (0.5, 0.0), (1.0, 0.0))
    goal: tuple[float, ...] = (5.0, 10.0)
    start: tuple[float, ...] = (-5.0, 10.0)
    theta3: float = 2.5
    theta4: float = 8e-3
    theta5: float = 300.0
    theta6: float = 6e-3
    v_ref: tuple[float, ...] = (0.5, 0.0)
    gamma: float = 1000.0
    omega_h: float = 0.1
    beta_true: int = 1
    sigma: Any = 1.0
    eps0: tuple[float, ...] = (0.0, 0.0)
    eta: float = 0.5

    def __post_init__(self) -> None:
        p = "human."
        make_dynamics_checked(self.dynamics, p + "dynamics")
        object.__setattr__(self, "action_set", _actions(self.action_set, p + "action_set"))
        for name in ("goal", "start", "v_ref", "eps0"):
            object.__setattr__(self, name, _vec(getattr(self, name), p + name))
        for name in ("theta3", "theta4", "theta5", "theta6", "gamma", "omega_h", "eta"):
            object.__setattr__(self, name, _num(getattr(self, name), p + name))
        for name in ("theta3", "theta4", "theta5", "theta6", "gamma", "eta"):
            _positive(getattr(self, name), p + name)
        if not 0.0 <= self.omega_h <= 1.0:
            raise ConfigError(p + "omega_h", f"must lie in [0, 1], got {self.omega_h}")
        if isinstance(self.beta_true, bool) or self.beta_true not in (0, 1):
            raise ConfigError(p + "beta_true", f"must be 0 or 1, got {self.beta_true!r}")
        object.__setattr__(self, "beta_true", int(self.beta_true))
        dim = len(self.goal)
        for name in ("start", "v_ref"):
            if len(getattr(self, name)) != dim:
                raise ConfigError(p + name, f"must have dimension {dim}")
        if len(self.action_set[0]) != dim:
            raise ConfigError(p + "action_set", f"actions must have dimension {dim}")
        object.__setattr__(self, "sigma", _sigma(self.sigma, p + "sigma"))

    @property
    def sigma_matrix(self) -> np.ndarray:
        return np.asarray(self.sigma, dtype=np.float64)


def _sigma(value: Any, name: str) -> float | tuple[tuple[float, ...], ...]:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        v = _num(value, name)
        _positive(v, name, strict=False)
        return v
    try:
        mat = np.asarray(value, dtype=np.float64)
    except (TypeError, ValueError):
        raise ConfigError(name, f"expected a scalar or square matrix, got {value!r}") from None
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or not np.all(np.isfinite(mat)):
        raise ConfigError(name, "expected a scalar or finite square matrix")
    if not np.allclose(mat, mat.T) or np.linalg.eigvalsh(mat).min() < -1e-12:
        raise ConfigError(name, "covariance must be symmetric positive semi-definite")
    return tuple(tuple(float(x) for x in row) for row in mat)


@dataclass(frozen=True)
class PredictionConfig:
    grid_origin: tuple[float, ...] = (-15.0, 10.0)
    grid_cell_size: tuple[float, ...] = (0.5, 1.0)
    grid_counts: tuple[int, ...] = (61, 1)
    rho: float = 2.0
    bound_mode: str = "exact"

    def __post_init__(self) -> None:
        p = "prediction."
        object.__setattr__(self, "grid_origin", _vec(self.grid_origin, p + "grid_origin"))
        object.__setattr__(self, "grid_cell_size", _vec(self.grid_cell_size, p + "grid_cell_size"))
        counts = _vec(self.grid_counts, p + "grid_counts")
        if any(c < 1 or not float(c).is_integer() for c in counts):
            raise ConfigError(p + "grid_counts", "must be positive integers")
        object.__setattr__(self, "grid_counts", tuple(int(c) for c in counts))
        try:
            Grid(self.grid_origin, self.grid_cell_size, self.grid_counts)
        except ValueError as exc:
            raise ConfigError(p + "grid_cell_size", str(exc)) from None
        object.__setattr__(self, "rho", _num(self.rho, p + "rho"))
        _positive(self.rho, p + "rho")
        if self.bound_mode not in ("exact", "marginal"):
            raise ConfigError(p + "bound_mode", f"must be 'exact' or 'marginal', got {self.bound_mode!r}")

    @property
    def grid(self) -> Grid:
        return Grid(self.grid_origin, self.grid_cell_size, self.grid_counts)


@dataclass(frozen=True)
class PriorConfig:
    p_aware: float = 0.5
    p_unaware: float = 0.5

    def __post_init__(self) -> None:
        for name in ("p_aware", "p_unaware"):
            v = _num(getattr(self, name), "prior." + name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError("prior." + name, f"must lie in [0, 1], got {v}")
            object.__setattr__(self, name, v)
        if abs(self.p_aware + self.p_unaware - 1.0) > 1e-12:
            raise ConfigError("prior.p_aware", "p_aware + p_unaware must equal 1")


@dataclass(frozen=True)
class SimulationConfig:
    max_steps: int = 200
    rng_seed: int = 0
    human_randomness: bool = False
    noise_mode: str = "gaussian"

    def __post_init__(self) -> None:
        p = "simulation."
        for name, low in (("max_steps", 1), ("rng_seed", 0)):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v or v < low:
                raise ConfigError(p + name, f"must be an integer >= {low}, got {v!r}")
            object.__setattr__(self, name, int(v))
        hr = self.human_randomness
        if isinstance(hr, str):
            if hr.lower() not in ("on", "off", "true", "false"):
                raise ConfigError(p + "human_randomness", f"must be on/off, got {hr!r}")
            hr = hr.lower() in ("on", "true")
        if not isinstance(hr, bool):
            raise ConfigError(p + "human_randomness", f"must be on/off, got {hr!r}")
        object.__setattr__(self, "human_randomness", hr)
        if self.noise_mode not in ("gaussian", "constant_bias"):
            raise ConfigError(p + "noise_mode", f"must be 'gaussian' or 'constant_bias', got {self.noise_mode!r}")


def make_dynamics_checked(name: Any, field_name: str) -> Dynamics:
    try:
        return make_dynamics(name)
    except (ValueError, TypeError) as exc:
        raise ConfigError(field_name, str(exc)) from None


@dataclass(frozen=True)
class ScenarioConfig:
    robot: RobotConfig = field(default_factory=RobotConfig)
    human: HumanConfig = field(default_factory=HumanConfig)
    prediction: PredictionConfig = field(default_factory=PredictionConfig)
    prior: PriorConfig = field(default_factory=PriorConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)

    def __post_init__(self) -> None:
        grid = self.prediction.grid
        if len(self.human.goal) != grid.ndim:
            raise ConfigError("prediction.grid_counts", "grid dimension must match the human state")
        if len(self.robot.goal) != grid.ndim:
            raise ConfigError("robot.goal", "robot and human positions must share one space")
        # occupancy recursion must stay on cell centers
        steps = np.asarray(self.human.action_set) / np.asarray(grid.cell_size)
        if not np.allclose(steps, np.round(steps), atol=1e-9, rtol=0):
            raise ConfigError("prediction.grid_cell_size", "cell size must divide every human action step")
        if grid.locate(np.asarray(self.human.start)[None, :])[0] < 0:
            raise ConfigError("human.start", "start lies outside the prediction grid")
        offset = (np.asarray(self.human.start) - np.asarray(grid.origin)) / np.asarray(grid.cell_size)
        if not np.allclose(offset, np.round(offset), atol=1e-9, rtol=0):
            raise ConfigError("human.start", "start must be a grid cell center")
        if self.simulation.noise_mode == "gaussian":
            sig = self.human.sigma_matrix
            if sig.ndim == 2 and sig.shape[0] != len(self.robot.goal):
                raise ConfigError("human.sigma", "covariance dimension must match the robot state")
        if len(self.human.eps0) != len(self.robot.goal):
            raise ConfigError("human.eps0", "bias must have the robot state dimension")

    # -- convenience accessors -------------------------------------------------
    @property
    def grid(self) -> Grid:
        return self.prediction.grid

    @property
    def robot_actions(self) -> ActionSet:
        return ActionSet(np.asarray(self.robot.action_set))

    @property
    def human_actions(self) -> ActionSet:
        return ActionSet(np.asarray(self.human.action_set))

    def to_dict(self) -> dict[str, dict[str, Any]]:
        out: dict[str, dict[str, Any]] = {}
        for sec in SECTIONS:
            raw = dataclasses.asdict(getattr(self, sec))
            out[sec] = {k: _plain(v) for k, v in raw.items()}
        out["simulation"]["human_randomness"] = "on" if self.simulation.human_randomness else "off"
        return out

    @classmethod
    def from_dict(cls, data: dict[str, dict[str, Any]]) -> "ScenarioConfig":
        unknown = set(data) - set(SECTIONS)
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown section")
        kwargs = {}
        for sec, klass in zip(SECTIONS, (RobotConfig, HumanConfig, PredictionConfig, PriorConfig, SimulationConfig)):
            values = dict(data.get(sec, {}))
            names = {f.name for f in dataclasses.fields(klass)}
            for key in values:
                if key not in names:
                    raise ConfigError(f"{sec}.{key}", "unknown key")
            try:
                kwargs[sec] = klass(**values)
            except ConfigError:
                raise
            except (TypeError, ValueError) as exc:
                raise ConfigError(sec, str(exc)) from None
        return cls(**kwargs)

    def replace(self, name: str, value: Any) -> "ScenarioConfig":
        """Return a copy with one field changed; ``name`` is ``section.key``
        or a bare key that is unique across sections."""
        sec, key = resolve_field(name)
        data = self.to_dict()
        data[sec][key] = value
        return ScenarioConfig.from_dict(data)

    def dumps(self) -> str:
        parser = configparser.ConfigParser()
        for sec, values in self.to_dict().items():
            parser[sec] = {k: v if isinstance(v, str) else json.dumps(v) for k, v in values.items()}
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()


def _plain(v: Any) -> Any:
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    return v


def resolve_field(name: str) -> tuple[str, str]:
    fields_by_sec = {
        sec: [f.name for f in dataclasses.fields(klass)]
        for sec, klass in zip(SECTIONS, (RobotConfig, HumanConfig, PredictionConfig, PriorConfig, SimulationConfig))
    }
    if "." in name:
        sec, key = name.split(".", 1)
        if sec in fields_by_sec and key in fields_by_sec[sec]:
            return sec, key
        raise ConfigError(name, "unknown parameter")
    hits = [(sec, name) for sec, keys in fields_by_sec.items() if name in keys]
    if len(hits) != 1:
        raise ConfigError(name, "unknown parameter" if not hits else "ambiguous parameter; use section.key")
    return hits[0]


def _parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw.strip()


def loads(text: str) -> ScenarioConfig:
    parser = configparser.ConfigParser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("file", str(exc)) from None
    data = {sec: {k: _parse_value(v) for k, v in parser[sec].items()} for sec in parser.sections()}
    return ScenarioConfig.from_dict(data)


def load_config(path: str | Path) -> ScenarioConfig:
    return loads(Path(path).read_text())


def bundled_scenarios() -> list[str]:
    return sorted(p.stem for p in SCENARIO_DIR.glob("*.cfg"))


def scenario_path(name: str | Path) -> Path:
    """A file path as given, else a bundled scenario name (``.cfg`` optional)."""
    path = Path(name)
    if path.is_file():
        return path
    bundled = SCENARIO_DIR / (path.name if path.suffix == ".cfg" else path.name + ".cfg")
    if path.parent == Path(".") and bundled.is_file():
        return bundled
    raise FileNotFoundError(f"no such config file or bundled scenario: {name}")
