"""Reference trajectories and tracking errors.

Reference inputs come from inverting the unicycle kinematics along the
path: ``v_ref = |(Xdot, Ydot)|`` and ``q_ref = arctan(R * yaw_rate / v_ref)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict

import numpy as np

from .plant import CommandInput, RobotState, wrap_angle


@dataclass(frozen=True)
class ReferenceSample:
    state: RobotState
    input: CommandInput
    derivative: np.ndarray
    time: float


def _sample(t, pos, vel, acc, wheel_radius, yaw=None) -> ReferenceSample:
    xd, yd = vel
    xdd, ydd = acc
    speed2 = xd * xd + yd * yd
    speed = math.sqrt(speed2)
    yaw_rate = (xd * ydd - yd * xdd) / speed2
    if yaw is None:
        yaw = math.atan2(yd, xd)
    q_ref = math.atan(wheel_radius * yaw_rate / speed)
    return ReferenceSample(
        state=RobotState(pos[0], pos[1], yaw),
        input=CommandInput(speed, q_ref),
        derivative=np.array([xd, yd, yaw_rate]),
        time=float(t),
    )


def sine_wave(t: float, wheel_radius: float = 0.2) -> ReferenceSample:
    """X = 0.5 t, Y = 2 sin(0.25 t), yaw = arctan(cos(0.25 t))."""
    if t < 0:
        raise ValueError("t must be non-negative")
    w = 0.25
    pos = (0.5 * t, 2.0 * math.sin(w * t))
    vel = (0.5, 2.0 * w * math.cos(w * t))
    acc = (0.0, -2.0 * w * w * math.sin(w * t))
    return _sample(t, pos, vel, acc, wheel_radius, yaw=math.atan(math.cos(w * t)))


def lemniscate(t: float, wheel_radius: float = 0.2) -> ReferenceSample:
    """Lemniscate of Gerono: X = 8 sin(t/16), Y = 8 sin(t/16) cos(t/16).

    The heading ``atan2(S cos(t/8) / cos(t/16), S)`` with ``S = sgn(cos(t/16))``
    is singular where cos(t/16) = 0 (t = 8 pi, 24 pi, ...).  It equals
    ``atan2(cos(t/8), cos(t/16))`` wherever it is defined, and that form is
    the continuous extension used at the crossings.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    s, c = math.sin(t / 16.0), math.cos(t / 16.0)
    s8, c8 = math.sin(t / 8.0), math.cos(t / 8.0)
    pos = (8.0 * s, 8.0 * s * c)
    vel = (0.5 * c, 0.5 * c8)
    acc = (-s / 32.0, -s8 / 16.0)
    return _sample(t, pos, vel, acc, wheel_radius, yaw=math.atan2(c8, c))


def lemniscate_heading_raw(t: float) -> float:
    """Heading exactly as written with the sign function; undefined at the crossings."""
    c = math.cos(t / 16.0)
    sign = math.copysign(1.0, c) if c != 0.0 else 0.0
    return math.atan2(math.cos(t / 8.0) / c * sign, sign)


def constant_pose(pose: RobotState) -> Callable[[float], ReferenceSample]:
    def gen(t: float, wheel_radius: float = 0.2) -> ReferenceSample:
        return ReferenceSample(pose, CommandInput(0.0, 0.0), np.zeros(3), float(t))
    return gen


GENERATORS: Dict[str, Callable[..., ReferenceSample]] = {
    "sine": sine_wave,
    "gerono": lemniscate,
}


def get_generator(name: str) -> Callable[..., ReferenceSample]:
    try:
        return GENERATORS[name]
    except KeyError:
        raise ValueError(f"unknown trajectory {name!r}; known: {sorted(GENERATORS)}") from None


def reference_window(gen, t0: float, n: int, dt: float, wheel_radius: float):
    """States (n+1, 3), inputs (n, 2) and samples at t0 + i*dt, by direct evaluation."""
    samples = [gen(t0 + i * dt, wheel_radius) for i in range(n + 1)]
    xs = np.array([s.state.as_array() for s in samples])
    us = np.array([s.input.as_array() for s in samples[:n]])
    return xs, us, samples


def state_error(actual, other) -> np.ndarray:
    """actual - other with the yaw difference wrapped."""
    a = actual.as_array() if isinstance(actual, RobotState) else np.asarray(actual, float)
    b = other.as_array() if isinstance(other, RobotState) else np.asarray(other, float)
    e = a - b
    e[2] = wrap_angle(e[2])
    return e


@dataclass(frozen=True)
class ErrorTriple:
    """Prediction error, tracking error and their blend ``gamma*e_e + (1-gamma)*e_r``."""

    e_e: np.ndarray
    e_r: np.ndarray
    gamma: float

    @property
    def e_c(self) -> np.ndarray:
        return self.gamma * self.e_e + (1.0 - self.gamma) * self.e_r

    @classmethod
    def zero(cls, gamma: float) -> "ErrorTriple":
        return cls(np.zeros(3), np.zeros(3), gamma)


def tracking_errors(actual, ref, predicted_prev, gamma: float) -> ErrorTriple:
    ref_state = ref.state if isinstance(ref, ReferenceSample) else ref
    return ErrorTriple(state_error(actual, predicted_prev), state_error(actual, ref_state), gamma)
