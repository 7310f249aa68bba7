"""Tracking and estimation metrics computed from a run log."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

RISE_THRESHOLD = 0.2
SMOOTH_WINDOW = 5


@dataclass(frozen=True)
class MetricReport:
    """Scalar summary of one run.  ``None`` marks an undefined metric."""

    t_r: Optional[float]        # first time the distance drops below 0.2 m
    d_m: float                  # mean distance
    d_mr: Optional[float]       # mean distance from t_r on
    d_fp: float                 # first peak of the distance curve
    e_rmsv: Optional[float]     # RMSE of the velocity compensation estimate
    e_rmsq: Optional[float]     # RMSE of the roll compensation estimate
    t_re: Optional[float]       # first zero crossing of the relative estimate error
    e_rmser: Optional[float]    # RMS relative error from t_re on

    def to_dict(self) -> dict:
        return asdict(self)


def rise_index(distance, threshold: float = RISE_THRESHOLD) -> Optional[int]:
    below = np.flatnonzero(np.asarray(distance, dtype=float) < threshold)
    return int(below[0]) if below.size else None


def moving_average(x, window: int = SMOOTH_WINDOW) -> np.ndarray:
    """Centered moving average; the window shrinks at the ends."""
    x = np.asarray(x, dtype=float)
    half = window // 2
    c = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(x.size)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half + 1, x.size)
    return (c[hi] - c[lo]) / (hi - lo)


def first_peak(distance, window: int = SMOOTH_WINDOW) -> float:
    """Raw maximum around the first strict local maximum of the smoothed curve.

    A curve without an interior peak reports its smoothed maximum.
    """
    d = np.asarray(distance, dtype=float)
    if d.size == 0:
        raise ValueError("empty distance series")
    s = moving_average(d, window)
    for i in range(1, s.size - 1):
        if s[i] > s[i - 1] and s[i] > s[i + 1]:
            half = window // 2
            return float(np.max(d[max(i - half, 0):i + half + 1]))
    if s.size > 1 and s[0] > s[1]:
        return float(np.max(d[:window // 2 + 1]))
    return float(np.max(s))


def relative_error(estimate, truth) -> np.ndarray:
    """estimate / truth - 1, NaN where the truth is zero."""
    est = np.asarray(estimate, dtype=float)
    tru = np.asarray(truth, dtype=float)
    out = np.full(est.shape, np.nan)
    ok = tru != 0
    out[ok] = est[ok] / tru[ok] - 1.0
    return out


def first_zero_crossing(r) -> Optional[int]:
    """Index where the series first reaches zero or changes sign (NaNs skipped)."""
    r = np.asarray(r, dtype=float)
    prev = None
    for i, v in enumerate(r):
        if not np.isfinite(v):
            continue
        if v == 0.0:
            return i
        if prev is not None and np.sign(v) != np.sign(prev):
            return i
        prev = v
    return None


def compute_metrics(time, distance, dv_hat=None, dq_hat=None, dv_true=None, dq_true=None,
                    has_estimator: bool = True, profile_known: bool = True) -> MetricReport:
    """Metrics of one run.  The relative error is taken on the velocity channel."""
    time = np.asarray(time, dtype=float)
    distance = np.asarray(distance, dtype=float)
    if time.shape != distance.shape or time.size == 0:
        raise ValueError("time and distance must be equal-length non-empty series")
    k_r = rise_index(distance)
    t_r = None if k_r is None else float(time[k_r])
    d_mr = None if k_r is None else float(np.mean(distance[k_r:]))

    e_rmsv = e_rmsq = t_re = e_rmser = None
    if has_estimator and profile_known and dv_hat is not None:
        dv_hat = np.asarray(dv_hat, dtype=float)
        dq_hat = np.asarray(dq_hat, dtype=float)
        dv_true = np.asarray(dv_true, dtype=float)
        dq_true = np.asarray(dq_true, dtype=float)
        e_rmsv = float(np.sqrt(np.mean((dv_hat - dv_true) ** 2)))
        e_rmsq = float(np.sqrt(np.mean((dq_hat - dq_true) ** 2)))
        rel = relative_error(dv_hat, dv_true)
        k_re = first_zero_crossing(rel)
        if k_re is not None:
            t_re = float(time[k_re])
            tail = rel[k_re:]
            tail = tail[np.isfinite(tail)]
            e_rmser = float(np.sqrt(np.mean(tail ** 2))) if tail.size else None

    return MetricReport(t_r=t_r, d_m=float(np.mean(distance)), d_mr=d_mr,
                        d_fp=first_peak(distance), e_rmsv=e_rmsv, e_rmsq=e_rmsq,
                        t_re=t_re, e_rmser=e_rmser)


def metrics_for_record(rec) -> MetricReport:
    return compute_metrics(rec.array("time"), rec.array("distance"),
                           rec.array("dv_hat"), rec.array("dq_hat"),
                           rec.array("dv_true"), rec.array("dq_true"),
                           has_estimator=rec.has_estimator,
                           profile_known=rec.true_profile_known)
