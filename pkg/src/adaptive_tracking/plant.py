"""Ground-truth robot simulation.

The robot is a unicycle-class spherical roller driven by a forward velocity
``v`` and a roll angle ``q_r``.  Everything the bottom-layer controllers and
the terrain do to a command is folded into a command-level perturbation
``delta_u`` so that the realised kinematics are

    xdot = f(x, u) - df/du(x, u) @ delta_u

The bottom layer itself is modelled as a first-order lag on the command.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi
HALF_PI = 0.5 * math.pi


class DomainError(ValueError):
    """Raised when the roll angle reaches +/- pi/2 (tan q_r unbounded)."""


def wrap_angle(angle):
    """Wrap an angle (scalar or array) into (-pi, pi]."""
    return math.pi - np.mod(math.pi - angle, TWO_PI)


@dataclass(frozen=True)
class RobotState:
    """Planar pose in the world frame (m, m, rad)."""

    x_pos: float = 0.0
    y_pos: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        vals = (self.x_pos, self.y_pos, self.yaw)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite robot state {vals}")
        object.__setattr__(self, "yaw", float(wrap_angle(float(self.yaw))))

    def as_array(self) -> np.ndarray:
        return np.array([self.x_pos, self.y_pos, self.yaw])

    @classmethod
    def from_array(cls, arr: Sequence[float]) -> "RobotState":
        return cls(float(arr[0]), float(arr[1]), float(arr[2]))


@dataclass(frozen=True)
class CommandInput:
    """Forward velocity (m/s) and roll angle (rad)."""

    velocity: float = 0.0
    roll_angle: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.velocity) and math.isfinite(self.roll_angle)):
            raise ValueError("non-finite command")
        check_roll(self.roll_angle)

    def as_array(self) -> np.ndarray:
        return np.array([self.velocity, self.roll_angle])

    @classmethod
    def from_array(cls, arr: Sequence[float]) -> "CommandInput":
        return cls(float(arr[0]), float(arr[1]))

    def within(self, lower: Sequence[float], upper: Sequence[float], tol: float = 0.0) -> bool:
        u = self.as_array()
        return bool(np.all(u >= np.asarray(lower) - tol) and np.all(u <= np.asarray(upper) + tol))


def check_roll(roll_angle) -> None:
    if np.any(np.abs(roll_angle) >= HALF_PI):
        raise DomainError(f"roll angle {roll_angle} outside (-pi/2, pi/2)")


@dataclass(frozen=True)
class PlantConfig:
    wheel_radius: float = 0.2
    plant_substep: float = 1.0 / 50.0
    planner_period: float = 1.0 / 10.0
    execution_lag: float = 0.05

    def __post_init__(self):
        if self.wheel_radius <= 0:
            raise ValueError("wheel_radius must be positive")
        if self.plant_substep <= 0:
            raise ValueError("plant_substep must be positive")
        if self.execution_lag < 0:
            raise ValueError("execution_lag must be non-negative")
        _substep_count(self.planner_period, self.plant_substep)

    @property
    def substeps_per_period(self) -> int:
        return _substep_count(self.planner_period, self.plant_substep)


def _substep_count(duration: float, substep: float) -> int:
    n = round(duration / substep)
    if n < 1 or abs(n * substep - duration) > 1e-9 * max(1.0, duration):
        raise ValueError(f"duration {duration} is not a multiple of substep {substep}")
    return int(n)


# --------------------------------------------------------------------------
# Uncertainty profiles
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class UncertaintyProfile:
    """Command-level perturbation model.  Subclasses override ``mean``."""

    noise_std: tuple = (0.0, 0.0)

    kind = "none"

    def mean(self, state: np.ndarray, cmd: np.ndarray) -> np.ndarray:
        return np.zeros(2)

    def evaluate(self, state, cmd, noise: Optional[Sequence[float]] = None) -> np.ndarray:
        """Return ``delta_u`` at (state, cmd); ``noise`` is a unit-normal pair."""
        state = np.asarray(state, dtype=float)
        cmd = np.asarray(cmd, dtype=float)
        du = self.mean(state, cmd)
        if noise is not None and any(self.noise_std):
            du = du + np.asarray(self.noise_std) * np.asarray(noise)
        return du

    @property
    def is_noisy(self) -> bool:
        return any(s > 0 for s in self.noise_std)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "noise_std": list(self.noise_std)}


@dataclass(frozen=True)
class NoUncertainty(UncertaintyProfile):
    kind = "none"


@dataclass(frozen=True)
class ProportionalVelocity(UncertaintyProfile):
    """delta_u = (xi * v, 0)."""

    xi: float = 0.0
    kind = "proportional_velocity"

    def mean(self, state, cmd):
        return np.array([self.xi * cmd[0], 0.0])

    def to_dict(self):
        return {**super().to_dict(), "xi": self.xi}


@dataclass(frozen=True)
class TerrainProfile(UncertaintyProfile):
    """delta_u = (velocity_gain * v, roll_gain * g(q_r)), g is identity or sin."""

    name: str = "custom"
    velocity_gain: float = 0.0
    roll_gain: float = 0.0
    roll_shape: str = "linear"
    kind = "terrain_table"

    def __post_init__(self):
        if self.roll_shape not in ("linear", "sin"):
            raise ValueError(f"unknown roll_shape {self.roll_shape!r}")

    def mean(self, state, cmd):
        q = cmd[1]
        g = math.sin(q) if self.roll_shape == "sin" else q
        return np.array([self.velocity_gain * cmd[0], self.roll_gain * g])

    def to_dict(self):
        return {**super().to_dict(), "name": self.name, "velocity_gain": self.velocity_gain,
                "roll_gain": self.roll_gain, "roll_shape": self.roll_shape}


TERRAINS = {
    "rubber": TerrainProfile(name="rubber", velocity_gain=0.08, roll_gain=0.02, roll_shape="sin"),
    "hollow_tiles": TerrainProfile(name="hollow_tiles", velocity_gain=0.2, noise_std=(0.05, 0.0)),
    "grass": TerrainProfile(name="grass", velocity_gain=0.25, roll_gain=0.05),
}


@dataclass(frozen=True)
class Region:
    """Half-plane ``sign * (coord - threshold) > 0`` on the x or y axis."""

    axis: str = "x"
    threshold: float = 0.0
    side: int = 1

    def contains(self, state) -> bool:
        c = state[0] if self.axis == "x" else state[1]
        return self.side * (c - self.threshold) > 0

    def to_dict(self):
        return {"axis": self.axis, "threshold": self.threshold, "side": self.side}


@dataclass(frozen=True)
class SpatialSwitch(UncertaintyProfile):
    """First matching region wins; ``default`` applies elsewhere."""

    regions: tuple = ()
    default: UncertaintyProfile = field(default_factory=NoUncertainty)
    kind = "spatial_switch"

    def select(self, state) -> UncertaintyProfile:
        for region, profile in self.regions:
            if region.contains(state):
                return profile
        return self.default

    def evaluate(self, state, cmd, noise=None):
        state = np.asarray(state, dtype=float)
        return self.select(state).evaluate(state, cmd, noise)

    @property
    def is_noisy(self):
        return self.default.is_noisy or any(p.is_noisy for _, p in self.regions)

    def to_dict(self):
        return {"kind": self.kind,
                "regions": [[r.to_dict(), p.to_dict()] for r, p in self.regions],
                "default": self.default.to_dict()}


def varied_terrain(boundary_x: float = 0.0) -> SpatialSwitch:
    """Rubber for x > boundary, grass elsewhere."""
    return SpatialSwitch(regions=((Region("x", boundary_x, 1), TERRAINS["rubber"]),),
                         default=TERRAINS["grass"])


def profile_from_dict(d: dict) -> UncertaintyProfile:
    d = dict(d)
    kind = d.pop("kind")
    noise = tuple(d.pop("noise_std", (0.0, 0.0)))
    if kind == "none":
        return NoUncertainty(noise_std=noise)
    if kind == "proportional_velocity":
        return ProportionalVelocity(noise_std=noise, **d)
    if kind == "terrain_table":
        if set(d) == {"name"}:
            return TERRAINS[d["name"]]
        return TerrainProfile(noise_std=noise, **d)
    if kind == "spatial_switch":
        regions = tuple((Region(**r), profile_from_dict(p)) for r, p in d["regions"])
        return SpatialSwitch(regions=regions, default=profile_from_dict(d["default"]))
    raise ValueError(f"unknown uncertainty profile kind {kind!r}")


# --------------------------------------------------------------------------
# Kinematics
# --------------------------------------------------------------------------

def _nominal(x: np.ndarray, u: np.ndarray, radius: float) -> np.ndarray:
    v, q = u[0], u[1]
    return np.array([v * math.cos(x[2]), v * math.sin(x[2]), v * math.tan(q) / radius])


def _input_jacobian(x: np.ndarray, u: np.ndarray, radius: float) -> np.ndarray:
    v, q = u[0], u[1]
    c = math.cos(q)
    return np.array([
        [math.cos(x[2]), 0.0],
        [math.sin(x[2]), 0.0],
        [math.tan(q) / radius, v / (c * c * radius)],
    ])


def _as_arrays(state, cmd):
    x = state.as_array() if isinstance(state, RobotState) else np.asarray(state, dtype=float)
    u = cmd.as_array() if isinstance(cmd, CommandInput) else np.asarray(cmd, dtype=float)
    check_roll(u[1])
    return x, u


def _radius(cfg) -> float:
    return cfg.wheel_radius if isinstance(cfg, PlantConfig) else float(cfg)


def nominal_derivative(state, cmd, cfg) -> np.ndarray:
    """(v cos(yaw), v sin(yaw), v tan(q_r) / R).  ``cfg`` is a PlantConfig or R."""
    x, u = _as_arrays(state, cmd)
    return _nominal(x, u, _radius(cfg))


def input_jacobian(state, cmd, cfg) -> np.ndarray:
    """3x2 Jacobian of the nominal kinematics with respect to (v, q_r)."""
    x, u = _as_arrays(state, cmd)
    return _input_jacobian(x, u, _radius(cfg))


def true_derivative(state, cmd, profile: UncertaintyProfile, cfg,
                    noise=None) -> np.ndarray:
    x, u = _as_arrays(state, cmd)
    r = _radius(cfg)
    du = profile.evaluate(x, u, noise)
    return _nominal(x, u, r) - _input_jacobian(x, u, r) @ du


def _rk4_substep(x, u_cmd, u_exec, h, tau, profile, radius, noise):
    """One RK4 step; the executed command follows the lag in closed form."""
    def exec_at(s):
        if tau <= 0.0:
            return u_cmd
        return u_cmd + (u_exec - u_cmd) * math.exp(-s / tau)

    def rhs(xs, s):
        u = exec_at(s)
        du = profile.evaluate(xs, u, noise)
        return _nominal(xs, u, radius) - _input_jacobian(xs, u, radius) @ du

    k1 = rhs(x, 0.0)
    k2 = rhs(x + 0.5 * h * k1, 0.5 * h)
    k3 = rhs(x + 0.5 * h * k2, 0.5 * h)
    k4 = rhs(x + h * k3, h)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), exec_at(h)


def step_plant(state, commanded, profile: UncertaintyProfile, cfg: PlantConfig,
               duration: float, executed=None) -> RobotState:
    """Advance the pose by ``duration`` seconds under a held command.

    ``executed`` is the command the bottom layer is executing at the start;
    it defaults to ``commanded`` (already settled).  Noise-free.
    """
    x, u_cmd = _as_arrays(state, commanded)
    u_exec = u_cmd.copy() if executed is None else _as_arrays(state, executed)[1]
    if duration <= 0:
        raise ValueError("duration must be positive")
    n = _substep_count(duration, cfg.plant_substep)
    for _ in range(n):
        x, u_exec = _rk4_substep(x, u_cmd, u_exec, cfg.plant_substep, cfg.execution_lag,
                                 profile, cfg.wheel_radius, None)
        check_roll(u_exec[1])
    return RobotState.from_array(x)


class Plant:
    """Stateful simulated robot: pose, executed command and noise streams.

    One simulation loop owns one instance.  ``measured_input`` is what the
    on-board sensors report, the executed command minus the perturbation.
    ``noise_streams`` holds one generator per command channel; a fresh
    unit-normal pair is drawn for every substep.
    """

    def __init__(self, cfg: PlantConfig, profile: UncertaintyProfile,
                 initial_state: RobotState = RobotState(),
                 initial_command: CommandInput = CommandInput(),
                 noise_streams: Optional[Sequence[np.random.Generator]] = None):
        self.cfg = cfg
        self.profile = profile
        self.x = initial_state.as_array()
        self.u_exec = initial_command.as_array()
        self.noise_streams = noise_streams
        self._noise = self._draw()

    def _draw(self):
        if self.noise_streams is None or not self.profile.is_noisy:
            return None
        return np.array([g.standard_normal() for g in self.noise_streams])

    @property
    def state(self) -> RobotState:
        return RobotState.from_array(self.x)

    @property
    def executed_command(self) -> CommandInput:
        return CommandInput.from_array(self.u_exec)

    @property
    def true_delta_u(self) -> np.ndarray:
        return self.profile.evaluate(self.x, self.u_exec, self._noise)

    @property
    def measured_input(self) -> CommandInput:
        u = self.u_exec - self.true_delta_u
        u[1] = float(np.clip(u[1], -HALF_PI + 1e-6, HALF_PI - 1e-6))
        return CommandInput.from_array(u)

    def step(self, commanded: CommandInput, duration: Optional[float] = None) -> RobotState:
        cfg = self.cfg
        duration = cfg.planner_period if duration is None else duration
        u_cmd = commanded.as_array()
        check_roll(u_cmd[1])
        for _ in range(_substep_count(duration, cfg.plant_substep)):
            self.x, self.u_exec = _rk4_substep(self.x, u_cmd, self.u_exec, cfg.plant_substep,
                                               cfg.execution_lag, self.profile,
                                               cfg.wheel_radius, self._noise)
            self.x[2] = float(wrap_angle(self.x[2]))
            self._noise = self._draw()
        return self.state
