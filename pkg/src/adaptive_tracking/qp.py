"""Small dense convex QP solver (primal-dual interior point, Mehrotra steps).

    minimise    0.5 z'Pz + q'z
    subject to  G z <= h
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve


@dataclass
class QPResult:
    z: np.ndarray
    multipliers: np.ndarray
    iterations: int
    converged: bool


def _max_step(v, dv):
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    return min(1.0, float(np.min(-v[neg] / dv[neg])))


def solve_qp(P, q, G, h, tol: float = 1e-10, max_iter: int = 60) -> QPResult:
    P = np.asarray(P, dtype=float)
    q = np.asarray(q, dtype=float)
    G = np.asarray(G, dtype=float)
    h = np.asarray(h, dtype=float)
    n, m = q.size, h.size
    z = np.zeros(n)
    if m == 0:
        z = np.linalg.solve(P, -q)
        return QPResult(z, np.zeros(0), 1, True)

    s = np.maximum(h - G @ z, 1.0)
    lam = np.ones(m)
    scale_d = 1.0 + np.max(np.abs(q))
    scale_p = 1.0 + np.max(np.abs(h))
    reg = 1e-12 * np.eye(n)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        r_d = P @ z + q + G.T @ lam
        r_p = G @ z + s - h
        mu = s @ lam / m
        if (np.max(np.abs(r_d)) <= tol * scale_d and np.max(np.abs(r_p)) <= tol * scale_p
                and mu <= tol):
            converged = True
            break
        w = lam / s
        kkt = cho_factor(P + (G.T * w) @ G + reg)

        def direction(r_c):
            rhs = -r_d - G.T @ (w * r_p - r_c / s)
            dz = cho_solve(kkt, rhs)
            dlam = w * (G @ dz + r_p) - r_c / s
            ds = (-r_c - s * dlam) / lam
            return dz, ds, dlam

        # predictor
        dz, ds, dlam = direction(s * lam)
        alpha = min(_max_step(s, ds), _max_step(lam, dlam))
        mu_aff = (s + alpha * ds) @ (lam + alpha * dlam) / m
        sigma = (mu_aff / mu) ** 3
        # corrector
        dz, ds, dlam = direction(s * lam + ds * dlam - sigma * mu)
        alpha = 0.99 * min(_max_step(s, ds), _max_step(lam, dlam))
        z = z + alpha * dz
        s = s + alpha * ds
        lam = lam + alpha * dlam
    return QPResult(z, lam, it, converged)
