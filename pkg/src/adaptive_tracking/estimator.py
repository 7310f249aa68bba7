"""Two-output RBF network estimating the command compensation ``delta_u``.

The network has 2m+1 Gaussian units on the diagonal of the normalised input
cube.  Two weighted norms split the input: the velocity output only sees the
(distance, velocity) channels and the roll output only the (yaw, roll)
channels.  Weights follow a Lyapunov-derived gradient law; the scale Gamma is
either constant or driven by a replay buffer of discretised error levels.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .plant import wrap_angle
from .trajectories import ErrorTriple


@dataclass(frozen=True)
class RbfBasisConfig:
    half_count: int = 5
    widths: Tuple[float, ...] = (0.4,)
    o_0: float = 0.5
    o_1: float = 0.5

    def __post_init__(self):
        if self.half_count < 1:
            raise ValueError("half_count must be >= 1")
        w = np.asarray(self.widths, dtype=float)
        if w.size not in (1, self.size) or np.any(w <= 0):
            raise ValueError("widths must be positive, one per center or a single value")
        if not (0 < self.o_0 < 1 and 0 < self.o_1 < 1):
            raise ValueError("o_0 and o_1 must lie in (0, 1)")

    @property
    def size(self) -> int:
        return 2 * self.half_count + 1

    @property
    def centers(self) -> np.ndarray:
        m = self.half_count
        levels = (np.arange(self.size) - m) / m
        return np.repeat(levels[:, None], 4, axis=1)

    @property
    def width_array(self) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.widths, dtype=float), (self.size,))

    @property
    def norm_weights(self) -> np.ndarray:
        """Rows are the diagonals of O_0 and O_1."""
        return np.array([[self.o_0, 1 - self.o_0, 0.0, 0.0],
                         [0.0, 0.0, self.o_1, 1 - self.o_1]])


def _weighted_sq_dist(chi, cfg: RbfBasisConfig) -> np.ndarray:
    diff2 = (np.asarray(chi, dtype=float)[None, :] - cfg.centers) ** 2   # (2m+1, 4)
    return diff2 @ cfg.norm_weights.T                                      # (2m+1, 2)


def basis_eval(chi, cfg: RbfBasisConfig) -> Tuple[np.ndarray, np.ndarray]:
    d2 = _weighted_sq_dist(chi, cfg)
    h = np.exp(-d2 / cfg.width_array[:, None] ** 2)
    return h[:, 0], h[:, 1]


def d2m(a) -> np.ndarray:
    """Diagonal of a 2x2 matrix as a 2-vector."""
    a = np.asarray(a)
    return np.array([a[0, 0], a[1, 1]])


def estimate_uncertainty(weights: np.ndarray, h_1, h_2, gains) -> np.ndarray:
    """Gamma * d2m(h W) = (Gamma_1 h_1.W_1, Gamma_2 h_2.W_2)."""
    hw = np.vstack([h_1, h_2]) @ weights
    return np.asarray(gains, dtype=float) * d2m(hw)


def project_weights(weights: np.ndarray, cap: float) -> np.ndarray:
    norm = np.linalg.norm(weights)
    if np.isfinite(cap) and norm > cap:
        return weights * (cap / norm)
    return weights


def update_weights(weights: np.ndarray, errors: ErrorTriple, jac: np.ndarray, h_1, h_2,
                   gains, dt: float, cap: float = 50.0) -> np.ndarray:
    """One Euler step of W_k' = -Gamma_k (e_c^T J[:, k]) h_k, then norm projection."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    g = np.asarray(errors.e_c) @ np.asarray(jac)          # (2,)
    gains = np.asarray(gains, dtype=float)
    w_dot = -np.column_stack([gains[0] * g[0] * np.asarray(h_1),
                              gains[1] * g[1] * np.asarray(h_2)])
    return project_weights(weights + w_dot * dt, cap)


def uncertainty_level(chi, cfg: RbfBasisConfig) -> np.ndarray:
    """Index of the nearest center per output, mapped to [-1, 1]."""
    d2 = _weighted_sq_dist(chi, cfg)
    m = cfg.half_count
    # argmin returns the first minimiser, i.e. the smaller j on ties
    return (np.argmin(d2, axis=0) - m) / m


# --------------------------------------------------------------------------
# Network input
# --------------------------------------------------------------------------

@dataclass
class InputNormalizer:
    """Running per-channel max-abs, floored at ``floor``.

    With ``forgetting`` < 1 the stored maximum decays geometrically each call,
    so one large transient does not fix the scale for the rest of the run.
    """

    floor: float = 1e-3
    forgetting: float = 1.0
    max_abs: np.ndarray = field(default_factory=lambda: np.zeros(4))

    def __post_init__(self):
        if not 0.0 < self.forgetting <= 1.0:
            raise ValueError("forgetting must lie in (0, 1]")

    def __call__(self, raw) -> np.ndarray:
        raw = np.asarray(raw, dtype=float)
        self.max_abs = np.maximum(self.forgetting * self.max_abs, np.abs(raw))
        return np.clip(raw / np.maximum(self.max_abs, self.floor), -1.0, 1.0)


def raw_input_deltas(state_now, input_now, state_prev, state_pred, input_pred, prev_estimate):
    """(d_AB - d_AC, v_meas - v_pred + dv_hat, wrapped yaw gap, q_meas - q_pred + dq_hat).

    ``state_prev`` is where the robot was when the prediction was made (A),
    ``state_pred`` the predicted pose one period later (C), ``state_now`` the
    pose actually reached (B).
    """
    a = np.asarray(state_prev, float)
    b = np.asarray(state_now, float)
    c = np.asarray(state_pred, float)
    d_ab = np.hypot(*(b[:2] - a[:2]))
    d_ac = np.hypot(*(c[:2] - a[:2]))
    u_now = np.asarray(input_now, float)
    u_pred = np.asarray(input_pred, float)
    est = np.asarray(prev_estimate, float)
    return np.array([
        d_ab - d_ac,
        u_now[0] - u_pred[0] + est[0],
        wrap_angle(b[2] - c[2]),
        u_now[1] - u_pred[1] + est[1],
    ])


def build_input(normalizer: InputNormalizer, state_now, input_now, prediction=None,
                prev_estimate=(0.0, 0.0)) -> np.ndarray:
    """Normalised network input.  ``prediction`` is (state_prev, state_pred, input_pred)
    from the previous cycle; without one the input is zero."""
    if prediction is None:
        return np.zeros(4)
    state_prev, state_pred, input_pred = prediction
    raw = raw_input_deltas(state_now, input_now, state_prev, state_pred, input_pred,
                           prev_estimate)
    return normalizer(raw)


# --------------------------------------------------------------------------
# Step size
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class StepSizeParams:
    """Gamma_k = min(a_k * zeta_bar_k**2 + b_k, c_k) for k in (v, q_r)."""

    a_v: float = 8.0
    b_v: float = 0.3
    c_v: float = 1.5
    a_qr: float = 0.3
    b_qr: float = 0.06
    c_qr: float = 0.15
    buffer_size: int = 10

    def __post_init__(self):
        if min(self.a_v, self.b_v, self.c_v, self.a_qr, self.b_qr, self.c_qr) < 0:
            raise ValueError("step-size parameters must be non-negative")
        if self.b_v > self.c_v or self.b_qr > self.c_qr:
            raise ValueError("floor b must not exceed cap c")
        if self.buffer_size < 1:
            raise ValueError("buffer_size must be >= 1")

    def gains(self, zeta_bar) -> np.ndarray:
        z = np.asarray(zeta_bar, dtype=float)
        return np.array([min(self.a_v * z[0] ** 2 + self.b_v, self.c_v),
                         min(self.a_qr * z[1] ** 2 + self.b_qr, self.c_qr)])


class StepSizeState:
    """Replay buffer of error levels and the current Gamma."""

    def __init__(self, params: StepSizeParams = StepSizeParams()):
        self.params = params
        self.buffer: deque = deque(maxlen=params.buffer_size)
        self.gains = params.gains((0.0, 0.0))

    @property
    def zeta_bar(self) -> np.ndarray:
        if not self.buffer:
            return np.zeros(2)
        return np.mean(np.asarray(self.buffer), axis=0)

    def update(self, zeta) -> np.ndarray:
        self.buffer.append(np.asarray(zeta, dtype=float))
        self.gains = self.params.gains(self.zeta_bar)
        return self.gains


def update_step_size(step: StepSizeState, zeta) -> StepSizeState:
    step.update(zeta)
    return step


# --------------------------------------------------------------------------
# Bundled estimator
# --------------------------------------------------------------------------

class RbfEstimator:
    """Network weights, input normaliser and step-size policy for one control loop.

    ``fixed_gains`` selects a constant Gamma; otherwise the variable step-size
    rule with ``step_params`` is used.
    """

    def __init__(self, basis: RbfBasisConfig = RbfBasisConfig(),
                 fixed_gains: Optional[Sequence[float]] = None,
                 step_params: StepSizeParams = StepSizeParams(),
                 weight_cap: float = 50.0, norm_floor: float = 1e-3,
                 norm_forgetting: float = 1.0):
        self.basis = basis
        self.weight_cap = weight_cap
        self.weights = np.zeros((basis.size, 2))
        self.normalizer = InputNormalizer(floor=norm_floor, forgetting=norm_forgetting)
        self.variable = fixed_gains is None
        self.step = StepSizeState(step_params)
        self._fixed = None if fixed_gains is None else np.asarray(fixed_gains, dtype=float)
        self.chi = np.zeros(4)
        self.zeta = np.zeros(2)
        self.h = basis_eval(self.chi, basis)
        self.estimate = np.zeros(2)

    @property
    def gains(self) -> np.ndarray:
        return self.step.gains if self.variable else self._fixed

    def observe(self, chi) -> None:
        """Set the network input; in variable mode also advance the step size."""
        self.chi = np.asarray(chi, dtype=float)
        self.h = basis_eval(self.chi, self.basis)
        if self.variable:
            self.zeta = uncertainty_level(self.chi, self.basis)
            self.step.update(self.zeta)

    def adapt(self, errors: ErrorTriple, jac: np.ndarray, dt: float) -> None:
        self.weights = update_weights(self.weights, errors, jac, self.h[0], self.h[1],
                                      self.gains, dt, self.weight_cap)

    def predict(self) -> np.ndarray:
        self.estimate = estimate_uncertainty(self.weights, self.h[0], self.h[1], self.gains)
        return self.estimate
