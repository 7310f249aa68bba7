"""Closed-loop experiment runner and built-in scenario suite."""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .planner import MODES, EstimatorConfig, OcpConfig, Planner
from .plant import (TERRAINS, CommandInput, NoUncertainty, Plant, PlantConfig,
                    ProportionalVelocity, RobotState, UncertaintyProfile, profile_from_dict,
                    varied_terrain)
from .trajectories import get_generator

SCHEMA_VERSION = 1
DIVERGENCE_BOUND = 100.0

# Fixed column order of the run log.
COLUMNS = (
    "schema_version", "time", "x", "y", "yaw", "x_ref", "y_ref", "yaw_ref",
    "v_cmd", "q_cmd", "v_meas", "q_meas", "dv_hat", "dq_hat", "dv_true", "dq_true",
    "gamma_v", "gamma_q", "zeta_bar_v", "zeta_bar_q",
    "e_e_x", "e_e_y", "e_e_yaw", "e_r_x", "e_r_y", "e_r_yaw", "distance",
    "lyapunov", "q_value", "lyapunov_rate", "clf_value", "clf_slack",
    "objective", "iterations", "kkt_residual", "max_gap", "status", "weight_norm",
)


@dataclass(frozen=True)
class Scenario:
    name: str
    profile: UncertaintyProfile = NoUncertainty()
    trajectory: str = "sine"
    duration: float = 60.0
    modes: Tuple[str, ...] = MODES
    seed: int = 0
    initial_state: Tuple[float, float, float] = (0.0, -0.5, 0.0)
    true_profile_known: bool = True

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if not self.modes:
            raise ValueError("a scenario needs at least one planner mode")
        for m in self.modes:
            if m not in MODES:
                raise ValueError(f"unknown planner mode {m!r}")
        get_generator(self.trajectory)


@dataclass(frozen=True)
class HarnessConfig:
    """Scenario construction and run-control settings.

    ``profiles`` maps a built-in scenario name to a replacement uncertainty
    profile in dictionary form; ``duration`` overrides every scenario length.
    """

    divergence_bound: float = DIVERGENCE_BOUND
    initial_state: Tuple[float, float, float] = (0.0, -0.5, 0.0)
    varied_initial_state: Tuple[float, float, float] = (0.5, -0.5, 0.0)
    varied_boundary_x: float = 0.0
    flat_xis: Tuple[float, ...] = (0.0, 0.2, 0.4)
    duration: Optional[float] = None
    profiles: Dict[str, dict] = field(default_factory=dict)

    def __post_init__(self):
        if self.divergence_bound <= 0:
            raise ValueError("divergence_bound must be positive")
        if self.duration is not None and self.duration <= 0:
            raise ValueError("duration override must be positive")
        if len(self.initial_state) != 3 or len(self.varied_initial_state) != 3:
            raise ValueError("initial states need three components (x, y, yaw)")
        for name, prof in self.profiles.items():
            if not isinstance(prof, dict):
                raise ValueError(f"profile override for {name!r} must be a mapping")
            profile_from_dict(prof)


@dataclass
class RunRecord:
    scenario: str
    mode: str
    columns: Dict[str, list] = field(default_factory=lambda: {c: [] for c in COLUMNS})
    diverged: bool = False
    true_profile_known: bool = True

    def append(self, row: dict) -> None:
        for c in COLUMNS:
            self.columns[c].append(row[c])

    def __len__(self) -> int:
        return len(self.columns["time"])

    def array(self, name: str) -> np.ndarray:
        return np.asarray(self.columns[name], dtype=float)

    @property
    def has_estimator(self) -> bool:
        return self.mode != "mpc"


def noise_streams(seed: int, scenario: str, mode: str) -> List[np.random.Generator]:
    """One counter-based (Philox) stream per command channel.

    The key ignores the planner mode so every mode of a scenario sees the same
    disturbance realisation.
    """
    tag = zlib.crc32(scenario.encode())
    return [np.random.Generator(np.random.Philox(key=[seed, tag * 4 + ch]))
            for ch in range(2)]


def run_mode(scenario: Scenario, mode: str, plant_cfg: PlantConfig = PlantConfig(),
             ocp_cfg: OcpConfig = OcpConfig(),
             est_cfg: EstimatorConfig = EstimatorConfig(),
             divergence_bound: float = DIVERGENCE_BOUND) -> RunRecord:
    if abs(ocp_cfg.dt - plant_cfg.planner_period) > 1e-12:
        raise ValueError("planner step dt must equal the plant's planner_period")
    if abs(ocp_cfg.wheel_radius - plant_cfg.wheel_radius) > 1e-12:
        raise ValueError("planner and plant disagree on the wheel radius")
    gen = get_generator(scenario.trajectory)
    plant = Plant(plant_cfg, scenario.profile, RobotState(*scenario.initial_state),
                  CommandInput(), noise_streams(scenario.seed, scenario.name, mode))
    planner = Planner(mode, ocp_cfg, est_cfg)
    rec = RunRecord(scenario.name, mode, true_profile_known=scenario.true_profile_known)
    period = plant_cfg.planner_period
    n_steps = int(round(scenario.duration / period))
    for k in range(n_steps):
        t = k * period
        x_meas = plant.state
        u_meas = plant.measured_input
        cmd, diag = planner.plan(t, x_meas, u_meas, gen)
        ref = diag["reference"].state
        errors = diag["errors"]
        du_hat = diag["delta_u_hat"]
        du_true = scenario.profile.evaluate(x_meas.as_array(), cmd.as_array())
        distance = math.hypot(x_meas.x_pos - ref.x_pos, x_meas.y_pos - ref.y_pos)
        rec.append({
            "schema_version": SCHEMA_VERSION, "time": round(t, 10),
            "x": x_meas.x_pos, "y": x_meas.y_pos, "yaw": x_meas.yaw,
            "x_ref": ref.x_pos, "y_ref": ref.y_pos, "yaw_ref": ref.yaw,
            "v_cmd": cmd.velocity, "q_cmd": cmd.roll_angle,
            "v_meas": u_meas.velocity, "q_meas": u_meas.roll_angle,
            "dv_hat": float(du_hat[0]), "dq_hat": float(du_hat[1]),
            "dv_true": float(du_true[0]), "dq_true": float(du_true[1]),
            "gamma_v": diag["gamma_v"], "gamma_q": diag["gamma_q"],
            "zeta_bar_v": diag["zeta_bar_v"], "zeta_bar_q": diag["zeta_bar_q"],
            "e_e_x": float(errors.e_e[0]), "e_e_y": float(errors.e_e[1]),
            "e_e_yaw": float(errors.e_e[2]), "e_r_x": float(errors.e_r[0]),
            "e_r_y": float(errors.e_r[1]), "e_r_yaw": float(errors.e_r[2]),
            "distance": distance,
            "lyapunov": diag["lyapunov"], "q_value": diag["q_value"],
            "lyapunov_rate": diag["lyapunov_rate"],
            "clf_value": diag["clf_value"], "clf_slack": diag["clf_slack"],
            "objective": diag["objective"], "iterations": diag["iterations"],
            "kkt_residual": diag["kkt_residual"], "max_gap": diag["max_gap"],
            "status": diag["status"], "weight_norm": diag["weight_norm"],
        })
        plant.step(cmd)
        if distance > divergence_bound:
            rec.diverged = True
            break
    return rec


def run_scenario(scenario: Scenario, plant_cfg: PlantConfig = PlantConfig(),
                 ocp_cfg: OcpConfig = OcpConfig(), est_cfg: EstimatorConfig = EstimatorConfig(),
                 modes: Optional[Sequence[str]] = None,
                 divergence_bound: float = DIVERGENCE_BOUND) -> Dict[str, RunRecord]:
    """Run every requested mode from a fresh plant and estimator."""
    modes = scenario.modes if modes is None else tuple(modes)
    return {m: run_mode(scenario, m, plant_cfg, ocp_cfg, est_cfg, divergence_bound)
            for m in modes}


def _flat_name(xi: float) -> str:
    return f"flat_xi{int(round(xi * 10)):02d}"


def artificial_uncertainty_suite(seed: int = 0,
                                 harness: HarnessConfig = HarnessConfig()) -> List[Scenario]:
    """Flat-floor proportional-velocity scenarios plus the synthetic terrains."""
    x0 = tuple(harness.initial_state)
    flat = [Scenario(_flat_name(xi), ProportionalVelocity(xi=xi) if xi else NoUncertainty(),
                     "sine", 60.0, MODES, seed, x0)
            for xi in harness.flat_xis]
    terrain = [Scenario(name, TERRAINS[name], "sine", 60.0, MODES, seed, x0)
               for name in ("rubber", "hollow_tiles", "grass")]
    varied = Scenario("varied", varied_terrain(harness.varied_boundary_x), "gerono",
                      32.0 * math.pi, MODES, seed,
                      initial_state=tuple(harness.varied_initial_state))
    suite = []
    for sc in flat + terrain + [varied]:
        if sc.name in harness.profiles:
            sc = replace(sc, profile=profile_from_dict(harness.profiles[sc.name]))
        if harness.duration is not None:
            sc = replace(sc, duration=harness.duration)
        suite.append(sc)
    return suite


def scenario_by_name(name: str, seed: int = 0,
                     harness: HarnessConfig = HarnessConfig()) -> Scenario:
    for s in artificial_uncertainty_suite(seed, harness):
        if s.name == name:
            return s
    raise KeyError(f"unknown scenario {name!r}; expected one of {SCENARIO_NAMES}")


SCENARIO_NAMES = tuple(s.name for s in artificial_uncertainty_suite())
