"""Independent reference computations used by the planner tests.

Nothing here calls the package's model or cost code; the compensated
kinematics and the objective are re-coded from their definitions.
"""

import math

import numpy as np

from adaptive_tracking.planner import OcpConfig, OcpProblem


def compensated_rhs(x, u, du, radius):
    """f(x,u) - df/du(x,u) du for the unicycle, broadcast over leading axes."""
    phi, v, q = np.broadcast_arrays(x[..., 2], u[..., 0], u[..., 1])
    zero = np.zeros_like(phi)
    f = np.stack([v * np.cos(phi), v * np.sin(phi), v * np.tan(q) / radius], axis=-1)
    jv = np.stack([np.cos(phi), np.sin(phi), np.tan(q) / radius], axis=-1)
    jq = np.stack([zero, zero, v / (np.cos(q) ** 2 * radius)], axis=-1)
    return f - jv * du[0] - jq * du[1]


def rk4(x, u, du, dt, radius):
    k1 = compensated_rhs(x, u, du, radius)
    k2 = compensated_rhs(x + 0.5 * dt * k1, u, du, radius)
    k3 = compensated_rhs(x + 0.5 * dt * k2, u, du, radius)
    k4 = compensated_rhs(x + dt * k3, u, du, radius)
    return x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def resum_cost(problem: OcpProblem, cfg: OcpConfig, states, inputs) -> float:
    """Term-by-term sum of the tracking objective with plain loops."""
    total = 0.0
    for i in range(len(states)):
        for j in range(3):
            total += cfg.q_weights[j] * (states[i][j] - problem.x_ref[i][j]) ** 2
    for i in range(len(inputs)):
        for j in range(2):
            total += cfg.r_weights[j] * (inputs[i][j] - problem.delta_u[j]
                                         - problem.u_ref[i][j]) ** 2
    return total


def grid_axis(lo, hi, step=0.01):
    n = int(round((hi - lo) / step))
    return lo + step * np.arange(n + 1)


def grid_search_n2(problem: OcpProblem, cfg: OcpConfig, step=0.01):
    """Exhaustive search over both inputs of a horizon-2 problem.

    Returns (best objective, best inputs).  The input box is shifted by the
    estimate, as in the optimiser.
    """
    assert problem.horizon == 2
    du = problem.delta_u
    lo = np.asarray(cfg.u_min) + du
    hi = np.asarray(cfg.u_max) + du
    vv, qq = np.meshgrid(grid_axis(lo[0], hi[0], step), grid_axis(lo[1], hi[1], step),
                         indexing="ij")
    U = np.stack([vv.ravel(), qq.ravel()], axis=-1)              # (G, 2)
    qw, rw = np.asarray(cfg.q_weights), np.asarray(cfg.r_weights)
    xr, ur = problem.x_ref, problem.u_ref
    x0 = problem.x0
    x1 = rk4(np.broadcast_to(x0, (len(U), 3)), U, du, cfg.dt, cfg.wheel_radius)
    c0 = float(np.sum(qw * (x0 - xr[0]) ** 2))
    c1 = np.sum(qw * (x1 - xr[1]) ** 2, axis=-1) + np.sum(rw * (U - du - ur[0]) ** 2, axis=-1)
    c_u1 = np.sum(rw * (U - du - ur[1]) ** 2, axis=-1)           # (G,)
    best, arg = math.inf, None
    chunk = 256
    for s in range(0, len(U), chunk):
        x1c = x1[s:s + chunk, None, :]                           # (c, 1, 3)
        x2 = rk4(x1c, U[None, :, :], du, cfg.dt, cfg.wheel_radius)   # (c, G, 3)
        total = c1[s:s + chunk, None] + np.sum(qw * (x2 - xr[2]) ** 2, axis=-1) + c_u1[None, :]
        k = int(np.argmin(total))
        if total.flat[k] < best:
            i, j = divmod(k, len(U))
            best, arg = float(total.flat[k]), (U[s + i], U[j])
    return c0 + best, np.array(arg)


def random_n2_instance(rng):
    """Small random horizon-2 problem whose input box is a few tenths wide,
    so the 0.01 grid stays exhaustive yet affordable."""
    du = np.round(rng.uniform([-0.1, -0.02], [0.3, 0.02]), 2)
    centre = np.round(rng.uniform([0.2, -0.3], [1.0, 0.3]), 2)
    half = np.round(rng.uniform([0.15, 0.08], [0.25, 0.15]), 2)
    cfg = OcpConfig(horizon=2, u_min=tuple(centre - half), u_max=tuple(centre + half))
    x0 = np.array([rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(-0.5, 0.5)])
    u_ref = np.column_stack([rng.uniform(0.2, 1.0, 2), rng.uniform(-0.3, 0.3, 2)])
    x_ref = np.empty((3, 3))
    x_ref[0] = x0 + rng.normal(0, 0.05, 3)
    for i in range(2):
        step = rk4(x_ref[i], u_ref[i], np.zeros(2), 0.1, 0.2)
        x_ref[i + 1] = step + rng.normal(0, 0.03, 3)
    u0 = np.array([rng.uniform(0.0, 1.0), rng.uniform(-0.3, 0.3)])
    return OcpProblem(x0=x0, u0=u0, x_ref=x_ref, u_ref=u_ref, delta_u=du), cfg
