"""Instruction planners: MPC and its RBF-compensated, CLF-constrained variants.

The optimal control problem is transcribed by direct multiple shooting
(inputs and shooting states are both decision variables, linked by RK4
gap constraints) and solved with a small SQP method: Gauss-Newton Hessian
(exact here, the cost being quadratic), condensed QP subproblems and a
backtracking line search on an L1 merit function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np

from .estimator import RbfBasisConfig, RbfEstimator, StepSizeParams, build_input
from .plant import HALF_PI, CommandInput, RobotState, check_roll, input_jacobian
from .qp import QPResult, solve_qp
from .trajectories import ErrorTriple, reference_window, state_error

MODES = ("mpc", "an_small", "an_large", "van")

FIXED_GAINS = {
    "an_small": (0.5, 0.1),
    "an_large": (1.0, 0.1),
}


@dataclass(frozen=True)
class OcpConfig:
    horizon: int = 20
    dt: float = 0.1
    q_weights: Tuple[float, float, float] = (10.0, 10.0, 1.0)
    r_weights: Tuple[float, float] = (5.0, 5.0)
    k_weights: Tuple[float, float, float] = (1.0, 1.0, 1.0)
    x_min: Tuple[float, float, float] = (-math.inf, -math.inf, -math.inf)
    x_max: Tuple[float, float, float] = (math.inf, math.inf, math.inf)
    u_min: Tuple[float, float] = (-1.5, -0.6)
    u_max: Tuple[float, float] = (1.5, 0.6)
    clf_enabled: bool = True
    clf_slack_weight: float = 1e4
    wheel_radius: float = 0.2
    max_iterations: int = 50
    kkt_tolerance: float = 1e-6
    hessian_damping: float = 1e-8
    box_tolerance: float = 1e-6

    def __post_init__(self):
        if self.horizon < 2:
            raise ValueError("horizon must be >= 2")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if any(q < 0 for q in self.q_weights):
            raise ValueError("state weights Q must be >= 0")
        if any(r <= 0 for r in self.r_weights):
            raise ValueError("input weights R must be > 0")
        if any(k <= 0 for k in self.k_weights):
            raise ValueError("CLF gain K must be positive definite")
        if any(lo > hi for lo, hi in zip(self.u_min, self.u_max)):
            raise ValueError("u_min must not exceed u_max")
        if max(abs(self.u_min[1]), abs(self.u_max[1])) >= HALF_PI:
            raise ValueError("roll-angle box must lie inside (-pi/2, pi/2)")
        if self.clf_slack_weight <= 0:
            raise ValueError("clf_slack_weight must be positive")

    @property
    def Q(self) -> np.ndarray:
        return np.diag(self.q_weights)

    @property
    def R(self) -> np.ndarray:
        return np.diag(self.r_weights)

    @property
    def K(self) -> np.ndarray:
        return np.diag(self.k_weights)


@dataclass
class OcpProblem:
    x0: np.ndarray
    u0: np.ndarray
    x_ref: np.ndarray                 # (N+1, 3)
    u_ref: np.ndarray                 # (N, 2)
    delta_u: np.ndarray = field(default_factory=lambda: np.zeros(2))
    jac: Optional[np.ndarray] = None  # input Jacobian at (x0, u0)
    errors: Optional[ErrorTriple] = None
    xdot_pred_prev: np.ndarray = field(default_factory=lambda: np.zeros(3))
    xdot_ref: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, dtype=float)
        self.u0 = np.asarray(self.u0, dtype=float)
        self.x_ref = np.atleast_2d(np.asarray(self.x_ref, dtype=float))
        self.u_ref = np.atleast_2d(np.asarray(self.u_ref, dtype=float))
        self.delta_u = np.asarray(self.delta_u, dtype=float)
        if self.x_ref.shape[0] != self.u_ref.shape[0] + 1:
            raise ValueError("x_ref must have exactly one more row than u_ref")
        for arr in (self.x0, self.u0, self.x_ref, self.u_ref, self.delta_u):
            if not np.all(np.isfinite(arr)):
                raise ValueError("problem data must be finite")

    @property
    def horizon(self) -> int:
        return self.u_ref.shape[0]


@dataclass
class OcpSolution:
    states: np.ndarray        # (N+1, 3), yaw continuous (not wrapped)
    inputs: np.ndarray        # (N, 2)
    objective: float
    status: str
    iterations: int = 0
    kkt_residual: float = math.nan
    clf_value: float = math.nan
    clf_slack: float = 0.0
    max_gap: float = 0.0

    @property
    def first_input(self) -> CommandInput:
        return CommandInput.from_array(self.inputs[0])


# --------------------------------------------------------------------------
# Model
# --------------------------------------------------------------------------

def adaptive_rhs(x, u, du, radius):
    """Compensated kinematics f(x,u) - df/du(x,u) du, vectorised over leading axes,
    with its Jacobians.  Returns (f, f_x, f_u) of shapes (...,3), (...,3,3), (...,3,2)."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    phi, v, q = x[..., 2], u[..., 0], u[..., 1]
    dv, dq = du[0], du[1]
    c, s = np.cos(phi), np.sin(phi)
    tq = np.tan(q)
    sec2 = 1.0 + tq * tq
    vx = v - dv
    f = np.stack([vx * c, vx * s, (vx * tq - v * sec2 * dq) / radius], axis=-1)
    fx = np.zeros(x.shape + (3,))
    fx[..., 0, 2] = -vx * s
    fx[..., 1, 2] = vx * c
    fu = np.zeros(x.shape[:-1] + (3, 2))
    fu[..., 0, 0] = c
    fu[..., 1, 0] = s
    fu[..., 2, 0] = (tq - sec2 * dq) / radius
    fu[..., 2, 1] = (vx * sec2 - 2.0 * v * sec2 * tq * dq) / radius
    return f, fx, fu


def _rhs_only(x, u, du, radius):
    phi, v, q = x[..., 2], u[..., 0], u[..., 1]
    tq = np.tan(q)
    vx = v - du[0]
    return np.stack([vx * np.cos(phi), vx * np.sin(phi),
                     (vx * tq - v * (1.0 + tq * tq) * du[1]) / radius], axis=-1)


def rk4_step(x, u, du, dt, radius):
    """Vectorised RK4 step of the compensated kinematics (yaw not wrapped)."""
    k1 = _rhs_only(x, u, du, radius)
    k2 = _rhs_only(x + 0.5 * dt * k1, u, du, radius)
    k3 = _rhs_only(x + 0.5 * dt * k2, u, du, radius)
    k4 = _rhs_only(x + dt * k3, u, du, radius)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_step_jac(x, u, du, dt, radius):
    """RK4 step with sensitivities A = d x+/d x, B = d x+/d u."""
    eye = np.eye(3)
    h = dt
    k1, k1x, k1u = adaptive_rhs(x, u, du, radius)
    k2, fx, fu = adaptive_rhs(x + 0.5 * h * k1, u, du, radius)
    k2x = fx @ (eye + 0.5 * h * k1x)
    k2u = fx @ (0.5 * h * k1u) + fu
    k3, fx, fu = adaptive_rhs(x + 0.5 * h * k2, u, du, radius)
    k3x = fx @ (eye + 0.5 * h * k2x)
    k3u = fx @ (0.5 * h * k2u) + fu
    k4, fx, fu = adaptive_rhs(x + h * k3, u, du, radius)
    k4x = fx @ (eye + h * k3x)
    k4u = fx @ (h * k3u) + fu
    xn = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    A = eye + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
    B = (h / 6.0) * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
    return xn, A, B


def discretize_dynamics(x, u, delta_u, dt: float, wheel_radius: float = 0.2) -> RobotState:
    """One RK4 step of the compensated model, yaw wrapped."""
    xa = x.as_array() if isinstance(x, RobotState) else np.asarray(x, dtype=float)
    ua = u.as_array() if isinstance(u, CommandInput) else np.asarray(u, dtype=float)
    check_roll(ua[1])
    xn = rk4_step(xa, ua, np.asarray(delta_u, dtype=float), dt, wheel_radius)
    return RobotState.from_array(xn)


def model_derivative(x, u, delta_u, wheel_radius: float = 0.2) -> np.ndarray:
    return _rhs_only(np.asarray(x, float), np.asarray(u, float), np.asarray(delta_u, float),
                     wheel_radius)


# --------------------------------------------------------------------------
# Cost and CLF
# --------------------------------------------------------------------------

def build_cost(problem: OcpProblem, cfg: OcpConfig, states, inputs) -> float:
    """sum_i |x_i - x_ref_i|_Q^2 + sum_i |u_i - du - u_ref_i|_R^2 (no wrapping)."""
    ex = np.asarray(states) - problem.x_ref
    eu = np.asarray(inputs) - problem.delta_u - problem.u_ref
    return float(np.sum(ex * ex * np.asarray(cfg.q_weights)) +
                 np.sum(eu * eu * np.asarray(cfg.r_weights)))


def clf_bracket(problem: OcpProblem, u0, wheel_radius: float) -> np.ndarray:
    """Nominal derivative at (x_k, u0) minus the Jacobian-mapped estimate."""
    x0 = problem.x0
    v, q = float(u0[0]), float(u0[1])
    fhat = np.array([v * math.cos(x0[2]), v * math.sin(x0[2]), v * math.tan(q) / wheel_radius])
    return fhat - _problem_jac(problem, wheel_radius) @ problem.delta_u


def _problem_jac(problem: OcpProblem, wheel_radius: float) -> np.ndarray:
    if problem.jac is not None:
        return np.asarray(problem.jac)
    return input_jacobian(problem.x0, problem.u0, wheel_radius)


def clf_value_from_bracket(errors: ErrorTriple, bracket, xdot_pred_prev, xdot_ref, K) -> float:
    e_c = errors.e_c
    g = errors.gamma
    return float(-e_c @ bracket + g * errors.e_e @ xdot_pred_prev
                 + (1.0 - g) * errors.e_r @ xdot_ref - 0.5 * e_c @ np.asarray(K) @ e_c)


def clf_constraint_value(problem: OcpProblem, u0, cfg: OcpConfig) -> float:
    """H_clf at candidate first input ``u0``; the constraint is H_clf >= 0."""
    if problem.errors is None:
        return 0.0
    u0 = u0.as_array() if isinstance(u0, CommandInput) else np.asarray(u0, dtype=float)
    bracket = clf_bracket(problem, u0, cfg.wheel_radius)
    return clf_value_from_bracket(problem.errors, bracket, problem.xdot_pred_prev,
                                  problem.xdot_ref, cfg.K)


def _clf_grad(problem: OcpProblem, u0, cfg: OcpConfig) -> np.ndarray:
    x0 = problem.x0
    v, q = u0
    tq = math.tan(q)
    fu = np.array([[math.cos(x0[2]), 0.0],
                   [math.sin(x0[2]), 0.0],
                   [tq / cfg.wheel_radius, v * (1 + tq * tq) / cfg.wheel_radius]])
    return -problem.errors.e_c @ fu


def lyapunov_value(errors: ErrorTriple, weight_error=None) -> float:
    """gamma/2 |e_e|^2 + (1-gamma)/2 |e_r|^2 (+ 1/2 tr(W~'W~) when supplied)."""
    g = errors.gamma
    v = 0.5 * g * errors.e_e @ errors.e_e + 0.5 * (1 - g) * errors.e_r @ errors.e_r
    if weight_error is not None:
        v += 0.5 * float(np.sum(np.asarray(weight_error) ** 2))
    return float(v)


def lyapunov_decrement_bound(errors: ErrorTriple, K) -> float:
    """Q(e_c) = 1/2 e_c' K e_c."""
    e_c = errors.e_c
    return float(0.5 * e_c @ np.asarray(K) @ e_c)


def lyapunov_rate(errors: ErrorTriple, model_rate, xdot_pred_prev, xdot_ref) -> float:
    """dV/dt once the adaptive law has cancelled the weight-error terms:
    e_c'(model rate) - (1-gamma) e_r' xdot_ref - gamma e_e' xdot_pred_prev."""
    g = errors.gamma
    return float(errors.e_c @ model_rate - (1 - g) * errors.e_r @ xdot_ref
                 - g * errors.e_e @ xdot_pred_prev)


# --------------------------------------------------------------------------
# SQP
# --------------------------------------------------------------------------

def _align_reference(problem: OcpProblem) -> np.ndarray:
    """Unwrap the reference yaw and shift it to within pi of the initial yaw."""
    xr = problem.x_ref.copy()
    xr[:, 2] = np.unwrap(xr[:, 2])
    shift = problem.x0[2] - xr[0, 2]
    xr[:, 2] += 2.0 * math.pi * np.round(shift / (2.0 * math.pi))
    return xr


class _Workspace:
    """Per-solve data shared across SQP iterations."""

    def __init__(self, problem: OcpProblem, cfg: OcpConfig):
        self.p = problem
        self.cfg = cfg
        self.N = problem.horizon
        self.du = problem.delta_u
        self.xr = _align_reference(problem)
        self.ur = problem.u_ref
        self.qw = np.asarray(cfg.q_weights, dtype=float)
        self.rw = np.asarray(cfg.r_weights, dtype=float)
        self.lb = np.asarray(cfg.u_min) + self.du
        self.ub = np.asarray(cfg.u_max) + self.du
        self.use_clf = cfg.clf_enabled and problem.errors is not None
        self.w = cfg.clf_slack_weight
        self.x_lo = np.asarray(cfg.x_min, dtype=float)
        self.x_hi = np.asarray(cfg.x_max, dtype=float)
        self.box_rows = [(j, 1.0) for j in range(3) if np.isfinite(self.x_hi[j])] + \
                        [(j, -1.0) for j in range(3) if np.isfinite(self.x_lo[j])]

    def clf(self, U) -> float:
        return clf_constraint_value(self.p, U[0], self.cfg) if self.use_clf else 0.0

    def gaps(self, X, U) -> np.ndarray:
        return X[1:] - rk4_step(X[:-1], U, self.du, self.cfg.dt, self.cfg.wheel_radius)

    def tracking_cost(self, X, U) -> float:
        ex = X - self.xr
        eu = U - self.du - self.ur
        return float(np.sum(ex * ex * self.qw) + np.sum(eu * eu * self.rw))

    def violations(self, X, U, s) -> Tuple[float, float, float]:
        """(L1 norm of the gaps, max-norm of the gaps, softened CLF violation)."""
        c = np.abs(self.gaps(X, U))
        clf_viol = max(0.0, -(self.clf(U) + s)) if self.use_clf else 0.0
        return float(np.sum(c)), float(np.max(c)), clf_viol

    def infeasibility(self, X, U, s) -> float:
        _, c_max, clf_viol = self.violations(X, U, s)
        return max(c_max, clf_viol)

    def merit(self, X, U, s, rho, rho_clf) -> float:
        l1, _, clf_viol = self.violations(X, U, s)
        return self.tracking_cost(X, U) + self.w * s + rho * l1 + rho_clf * clf_viol


def _rollout(x0, U, du, dt, radius):
    X = np.empty((U.shape[0] + 1, 3))
    X[0] = x0
    for i in range(U.shape[0]):
        X[i + 1] = rk4_step(X[i], U[i], du, dt, radius)
    return X


def _initial_guess(ws: _Workspace, warm_start: Optional[OcpSolution]):
    N = ws.N
    if warm_start is not None and warm_start.inputs.shape == (N, 2):
        U = np.vstack([warm_start.inputs[1:], warm_start.inputs[-1:]])
    else:
        U = ws.ur + ws.du
    U = np.clip(U, ws.lb, ws.ub)
    X = _rollout(ws.p.x0, U, ws.du, ws.cfg.dt, ws.cfg.wheel_radius)
    s = max(0.0, -ws.clf(U)) if ws.use_clf else 0.0
    return X, U, s


def _unconstrained_step(P, q, G, h, nu, slack_weight):
    """Try the QP optimum with every inequality inactive (slack driven to zero).

    Returns None when that point violates a constraint.  If it is feasible it
    is the QP solution: the only active row is the slack bound, whose
    multiplier equals the slack weight.
    """
    try:
        L = np.linalg.cholesky(P[:nu, :nu])
    except np.linalg.LinAlgError:
        return None
    z = np.zeros(q.size)
    z[:nu] = -np.linalg.solve(L.T, np.linalg.solve(L, q[:nu]))
    lam = np.zeros(h.size)
    if slack_weight is not None:
        z[nu] = -h[2 * nu]              # slack row reads -ds <= s
        lam[2 * nu] = slack_weight
    if np.any(G @ z > h + 1e-12):
        return None
    return QPResult(z, lam, 0, True)


def _qp_subproblem(ws: _Workspace, X, U, s):
    """Linearise at (X, U, s), condense the shooting states out and solve the QP.

    Returns the full step (dX, dU, ds), the condensed Hessian-step product
    (stationarity measure), the equality multipliers and the CLF multiplier.
    """
    cfg = ws.cfg
    N = ws.N
    nu = 2 * N
    Xn, A, B = rk4_step_jac(X[:-1], U, ws.du, cfg.dt, cfg.wheel_radius)
    c = Xn - X[1:]                      # linearised: dX_{i+1} = A dX_i + B dU_i + c_i

    M = np.zeros((N, 3, nu))
    m = np.zeros((N, 3))
    Mi = np.zeros((3, nu))
    mi = np.zeros(3)
    for i in range(N):
        Mi = A[i] @ Mi
        Mi[:, 2 * i:2 * i + 2] += B[i]
        mi = A[i] @ mi + c[i]
        M[i] = Mi
        m[i] = mi

    Mf = M.reshape(3 * N, nu)
    qd = np.tile(ws.qw, N)
    rd = np.tile(ws.rw, N)
    ex = (X[1:] + m - ws.xr[1:]).reshape(-1)
    eu = (U - ws.du - ws.ur).reshape(-1)

    n = nu + 1 if ws.use_clf else nu
    P = np.zeros((n, n))
    P[:nu, :nu] = 2.0 * Mf.T @ (qd[:, None] * Mf) + np.diag(2.0 * rd)
    P += cfg.hessian_damping * np.eye(n)
    q = np.zeros(n)
    q[:nu] = 2.0 * Mf.T @ (qd * ex) + 2.0 * rd * eu

    Uf = U.reshape(-1)
    lbf = np.tile(ws.lb, N)
    ubf = np.tile(ws.ub, N)
    eye = np.eye(nu, n)
    G_rows = [eye, -eye]
    h_rows = [ubf - Uf, Uf - lbf]
    if ws.use_clf:
        q[nu] = ws.w
        gslack = np.zeros((1, n))
        gslack[0, nu] = -1.0
        gclf = np.zeros((1, n))
        gclf[0, :2] = -_clf_grad(ws.p, U[0], cfg)
        gclf[0, nu] = -1.0
        G_rows += [gslack, gclf]
        h_rows += [np.array([s]), np.array([ws.clf(U) + s])]
    for j, sign in ws.box_rows:
        bound = ws.x_hi[j] if sign > 0 else -ws.x_lo[j]
        rows = np.zeros((N, n))
        rows[:, :nu] = sign * M[:, j, :]
        G_rows.append(rows)
        h_rows.append(bound - sign * (X[1:, j] + m[:, j]))
    G = np.vstack(G_rows)
    h = np.concatenate(h_rows)

    res = _unconstrained_step(P, q, G, h, nu, ws.w if ws.use_clf else None)
    if res is None:
        res = solve_qp(P, q, G, h, tol=1e-13)
    z = res.z
    dU = z[:nu].reshape(N, 2)
    ds = float(z[nu]) if ws.use_clf else 0.0
    dX = np.zeros_like(X)
    dX[1:] = (Mf @ z[:nu]).reshape(N, 3) + m
    stationarity = float(np.max(np.abs(P @ z)))

    # adjoint recursion for the gap multipliers (state-box duals ignored)
    lam = np.zeros((N, 3))
    grad_x = 2.0 * ws.qw * (X[1:] + dX[1:] - ws.xr[1:])
    lam[N - 1] = -grad_x[N - 1]
    for i in range(N - 2, -1, -1):
        lam[i] = A[i + 1].T @ lam[i + 1] - grad_x[i]
    mu_clf = float(res.multipliers[2 * nu + 1]) if ws.use_clf else 0.0
    return dX, dU, ds, stationarity, float(np.max(np.abs(lam))), mu_clf


def solve_ocp(problem: OcpProblem, cfg: OcpConfig,
              warm_start: Optional[OcpSolution] = None) -> OcpSolution:
    ws = _Workspace(problem, cfg)
    x0 = problem.x0
    box_tol = cfg.box_tolerance
    if np.any(x0 > ws.x_hi + box_tol) or np.any(x0 < ws.x_lo - box_tol):
        X, U, s = _initial_guess(ws, None)
        return OcpSolution(X, U, ws.tracking_cost(X, U), "infeasible_boxes",
                           clf_value=ws.clf(U), clf_slack=s)

    X, U, s = _initial_guess(ws, warm_start)
    rho = rho_clf = 1.0
    status = "max_iterations"
    best = None
    kkt = math.inf
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        dX, dU, ds, stat, lam_max, mu_clf = _qp_subproblem(ws, X, U, s)
        kkt = max(stat, ws.infeasibility(X, U, s))
        if best is None or kkt < best[0]:
            best = (kkt, X, U, s)
        if kkt < cfg.kkt_tolerance:
            X, U, s = X + dX, U + dU, s + ds
            status = "converged"
            break
        rho = max(rho, 1.5 * lam_max + 1.0)
        rho_clf = max(rho_clf, 1.5 * mu_clf + 1.0)
        l1, _, clf_viol = ws.violations(X, U, s)
        phi0 = ws.merit(X, U, s, rho, rho_clf)
        grad = (np.sum(2.0 * ws.qw * (X - ws.xr) * dX)
                + np.sum(2.0 * ws.rw * (U - ws.du - ws.ur) * dU)
                + (ws.w * ds if ws.use_clf else 0.0))
        dphi = grad - rho * l1 - rho_clf * clf_viol
        alpha = 1.0
        while True:
            Xt, Ut, st = X + alpha * dX, U + alpha * dU, max(0.0, s + alpha * ds)
            if ws.merit(Xt, Ut, st, rho, rho_clf) <= phi0 + 1e-4 * alpha * min(dphi, 0.0) or alpha < 1e-6:
                break
            alpha *= 0.5
        X, U, s = Xt, Ut, st

    if status != "converged" and best is not None:
        _, X, U, s = best
    U = np.clip(U, ws.lb, ws.ub)
    return OcpSolution(
        states=X, inputs=U, objective=ws.tracking_cost(X, U), status=status,
        iterations=it, kkt_residual=float(kkt), clf_value=ws.clf(U),
        clf_slack=float(s) if ws.use_clf else 0.0,
        max_gap=float(np.max(np.abs(ws.gaps(X, U)))),
    )


# --------------------------------------------------------------------------
# Planner loop
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class EstimatorConfig:
    basis: RbfBasisConfig = RbfBasisConfig()
    step: StepSizeParams = StepSizeParams()
    gamma: float = 0.8
    weight_cap: float = 50.0
    norm_floor: float = 1e-3
    norm_forgetting: float = 1.0
    force_zero_estimate: bool = False

    def __post_init__(self):
        if not 0.5 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0.5, 1)")
        if self.weight_cap <= 0:
            raise ValueError("weight_cap must be positive")


def make_estimator(mode: str, cfg: EstimatorConfig) -> Optional[RbfEstimator]:
    if mode == "mpc":
        return None
    if mode == "van":
        return RbfEstimator(cfg.basis, None, cfg.step, cfg.weight_cap, cfg.norm_floor,
                            cfg.norm_forgetting)
    if mode in FIXED_GAINS:
        return RbfEstimator(cfg.basis, FIXED_GAINS[mode], cfg.step, cfg.weight_cap,
                            cfg.norm_floor, cfg.norm_forgetting)
    raise ValueError(f"unknown planner mode {mode!r}; expected one of {MODES}")


class Planner:
    """One instruction planner with its estimator state (one per control loop)."""

    def __init__(self, mode: str, ocp: OcpConfig = OcpConfig(),
                 estimator: EstimatorConfig = EstimatorConfig()):
        if mode not in MODES:
            raise ValueError(f"unknown planner mode {mode!r}; expected one of {MODES}")
        self.mode = mode
        self.est_cfg = estimator
        self.ocp = ocp if mode != "mpc" else replace(ocp, clf_enabled=False)
        self.estimator = make_estimator(mode, estimator)
        self.gamma = estimator.gamma
        self.solution: Optional[OcpSolution] = None
        self.prediction = None          # (x_k, x(1|k), u(0|k)) from the last cycle
        self.delta_u = np.zeros(2)
        self.cycles = 0

    @property
    def weights(self) -> Optional[np.ndarray]:
        return None if self.estimator is None else self.estimator.weights

    def errors(self, x_meas: RobotState, x_ref_now) -> ErrorTriple:
        if self.prediction is None:
            return ErrorTriple.zero(self.gamma)
        x_pred = self.prediction[1]
        return ErrorTriple(state_error(x_meas, x_pred), state_error(x_meas, x_ref_now),
                           self.gamma)

    def _predicted_rate(self) -> np.ndarray:
        if self.solution is None:
            return np.zeros(3)
        return model_derivative(self.solution.states[1], self.solution.inputs[1],
                                self.delta_u, self.ocp.wheel_radius)

    def plan(self, t: float, x_meas: RobotState, u_meas: CommandInput, ref_gen):
        """Run one planner cycle at time ``t``; returns (command, diagnostics)."""
        cfg = self.ocp
        N, dt, radius = cfg.horizon, cfg.dt, cfg.wheel_radius
        xr, ur, samples = reference_window(ref_gen, t, N, dt, radius)
        errors = self.errors(x_meas, xr[0])
        x = x_meas.as_array()
        u = u_meas.as_array()
        jac = input_jacobian(x, u, radius)
        xdot_prev = self._predicted_rate()
        xdot_ref = samples[0].derivative

        est = self.estimator
        if est is not None:
            chi = build_input(est.normalizer, x, u, self.prediction, self.delta_u)
            est.observe(chi)
            est.adapt(errors, jac, dt)
            delta_u = est.predict()
            if self.est_cfg.force_zero_estimate:
                delta_u = np.zeros(2)
        else:
            delta_u = np.zeros(2)

        problem = OcpProblem(x0=x, u0=u, x_ref=xr, u_ref=ur, delta_u=delta_u, jac=jac,
                             errors=errors if est is not None else None,
                             xdot_pred_prev=xdot_prev, xdot_ref=xdot_ref)
        sol = solve_ocp(problem, cfg, warm_start=self.solution)
        u_cmd = sol.inputs[0]

        bracket = clf_bracket(problem, u_cmd, radius)
        diag = {
            "objective": sol.objective,
            "iterations": sol.iterations,
            "kkt_residual": sol.kkt_residual,
            "status": sol.status,
            "max_gap": sol.max_gap,
            "clf_value": sol.clf_value if est is not None else math.nan,
            "clf_slack": sol.clf_slack if est is not None else math.nan,
            "gamma_v": math.nan if est is None else float(est.gains[0]),
            "gamma_q": math.nan if est is None else float(est.gains[1]),
            "zeta_bar_v": math.nan if est is None else float(est.step.zeta_bar[0]),
            "zeta_bar_q": math.nan if est is None else float(est.step.zeta_bar[1]),
            "delta_u_hat": np.array(delta_u),
            "weight_norm": 0.0 if est is None else float(np.linalg.norm(est.weights)),
            "errors": errors,
            "lyapunov": lyapunov_value(errors),
            "q_value": lyapunov_decrement_bound(errors, cfg.K),
            "lyapunov_rate": lyapunov_rate(errors, bracket, xdot_prev, xdot_ref),
            "reference": samples[0],
        }

        self.prediction = (x.copy(), sol.states[1].copy(), u_cmd.copy())
        self.solution = sol
        self.delta_u = np.array(delta_u)
        self.cycles += 1
        return CommandInput.from_array(u_cmd), diag
