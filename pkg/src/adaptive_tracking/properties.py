"""Closed-loop properties checked by ``verify`` and the acceptance tests.

Each check takes the records of the scenarios it needs and returns a
``PropertyResult`` with a one-line explanation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Mapping

import numpy as np

from .harness import RunRecord
from .metrics import metrics_for_record, relative_error

Records = Mapping[str, Mapping[str, RunRecord]]     # scenario -> mode -> record

AUDIT_TOLERANCE = 1e-6
AUDIT_FRACTION = 0.95


@dataclass(frozen=True)
class PropertyResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def _fmt(v) -> str:
    return "none" if v is None else f"{v:.4g}"


def lyapunov_audit_fraction(rec: RunRecord, tol: float = AUDIT_TOLERANCE):
    """(fraction of zero-slack steps with V' <= -Q + tol, number of such steps)."""
    slack = rec.array("clf_slack")
    rate = rec.array("lyapunov_rate")
    q = rec.array("q_value")
    mask = slack <= 0.0
    n = int(mask.sum())
    if n == 0:
        return 1.0, 0
    return float(np.mean(rate[mask] <= -q[mask] + tol)), n


def check_energy_sanity(records: Records, scenario: str = "flat_xi00") -> PropertyResult:
    """Without uncertainty every mode rises below 0.2 m and holds d_mr < 0.1 m."""
    parts, ok = [], True
    for mode, rec in records[scenario].items():
        m = metrics_for_record(rec)
        good = m.t_r is not None and m.d_mr is not None and m.d_mr < 0.1
        ok &= good
        parts.append(f"{mode} t_r={_fmt(m.t_r)} d_mr={_fmt(m.d_mr)}")
    return PropertyResult("energy sanity (no uncertainty)", ok, "; ".join(parts))


def check_mpc_largest_mean(records: Records, scenario: str) -> PropertyResult:
    d_m = {mode: metrics_for_record(rec).d_m for mode, rec in records[scenario].items()}
    others = [v for k, v in d_m.items() if k != "mpc"]
    ok = "mpc" in d_m and all(d_m["mpc"] > v for v in others)
    detail = ", ".join(f"{k}={v:.4g}" for k, v in d_m.items())
    return PropertyResult(f"MPC has the largest d_m ({scenario})", ok, detail)


def check_t_re_ordering(records: Records, scenario: str = "flat_xi02") -> PropertyResult:
    """t_re(van) < t_re(an_large) < t_re(an_small); missing values fail."""
    t = {m: metrics_for_record(records[scenario][m]).t_re for m in ("van", "an_large", "an_small")}
    ok = (None not in t.values()) and t["van"] < t["an_large"] < t["an_small"]
    detail = ", ".join(f"{k}={_fmt(v)}" for k, v in t.items())
    return PropertyResult(f"t_re ordering van < an_large < an_small ({scenario})", ok, detail)


def check_van_t_re_smallest(records: Records, scenario: str = "flat_xi02") -> PropertyResult:
    """VAN's relative error crosses zero, strictly before both AN variants'."""
    t = {m: metrics_for_record(records[scenario][m]).t_re for m in ("van", "an_large", "an_small")}
    ok = t["van"] is not None and all(t[m] is None or t["van"] < t[m]
                                      for m in ("an_large", "an_small"))
    detail = ", ".join(f"{k}={_fmt(v)}" for k, v in t.items())
    return PropertyResult(f"VAN t_re smallest ({scenario})", ok, detail)


def check_van_e_rmser_smallest(records: Records, scenario: str = "flat_xi02") -> PropertyResult:
    e = {m: metrics_for_record(records[scenario][m]).e_rmser for m in ("van", "an_large", "an_small")}
    ok = e["van"] is not None and all(e[m] is None or e["van"] < e[m]
                                      for m in ("an_large", "an_small"))
    detail = ", ".join(f"{k}={_fmt(v)}" for k, v in e.items())
    return PropertyResult(f"VAN e_rmser smallest ({scenario})", ok, detail)


def check_baseline_failure(records: Records, scenario: str = "flat_xi04") -> PropertyResult:
    """Plain MPC never rises below 0.2 m while every adaptive mode does."""
    t_r = {mode: metrics_for_record(rec).t_r for mode, rec in records[scenario].items()}
    ok = t_r.get("mpc", 0.0) is None and all(v is not None for k, v in t_r.items() if k != "mpc")
    detail = ", ".join(f"{k} t_r={_fmt(v)}" for k, v in t_r.items())
    return PropertyResult(f"MPC never rises, adaptive modes do ({scenario})", ok, detail)


def check_relative_error_convergence(records: Records, scenario: str = "flat_xi02",
                                     mode: str = "van") -> PropertyResult:
    """|rel| falls below 0.1 at some step and stays below 0.25 over the final third."""
    rec = records[scenario][mode]
    rel = np.abs(relative_error(rec.array("dv_hat"), rec.array("dv_true")))
    finite = np.isfinite(rel)
    reached = bool(np.any(rel[finite] < 0.1))
    tail = rel[2 * len(rel) // 3:]
    tail = tail[np.isfinite(tail)]
    tail_max = float(np.max(tail)) if tail.size else float("inf")
    ok = reached and tail_max < 0.25
    return PropertyResult(f"{mode} relative-error convergence ({scenario})", ok,
                          f"min |rel|={np.min(rel[finite]):.4g}, final-third max={tail_max:.4g}")


def check_lyapunov_audit(records: Records) -> PropertyResult:
    parts, ok = [], True
    for scenario, by_mode in records.items():
        for mode, rec in by_mode.items():
            if not rec.has_estimator:
                continue
            frac, n = lyapunov_audit_fraction(rec)
            ok &= frac >= AUDIT_FRACTION
            if frac < 1.0:
                parts.append(f"{scenario}/{mode}={frac:.3f} of {n}")
    detail = "; ".join(parts) if parts else "all zero-slack steps satisfy the bound"
    return PropertyResult("Lyapunov audit (>= 95% of zero-slack steps)", ok, detail)


def check_step_size_envelope(records: Records, lo=(0.3, 0.06), hi=(1.5, 0.15)) -> PropertyResult:
    worst: List[str] = []
    ok = True
    for scenario, by_mode in records.items():
        rec = by_mode.get("van")
        if rec is None:
            continue
        g1, g2 = rec.array("gamma_v"), rec.array("gamma_q")
        good = (np.all(g1 >= lo[0]) and np.all(g1 <= hi[0])
                and np.all(g2 >= lo[1]) and np.all(g2 <= hi[1]))
        ok &= bool(good)
        worst.append(f"{scenario}: G1 in [{g1.min():.4g}, {g1.max():.4g}], "
                     f"G2 in [{g2.min():.4g}, {g2.max():.4g}]")
    return PropertyResult("VAN step-size envelope", ok, "; ".join(worst))


def switch_index(rec: RunRecord, boundary_x: float = 0.0) -> int:
    """First step at which the robot crosses from x > boundary to x <= boundary."""
    x = rec.array("x")
    side = x > boundary_x
    for k in range(1, len(x)):
        if side[k - 1] and not side[k]:
            return k
    return len(x)


def check_varied_terrain(records: Records, scenario: str = "varied",
                         boundary_x: float = 0.0) -> PropertyResult:
    """VAN has the smallest mean distance and a lower post-switch peak than MPC."""
    by_mode = records[scenario]
    d_m = {m: metrics_for_record(r).d_m for m, r in by_mode.items()}
    peaks: Dict[str, float] = {}
    for m in ("van", "mpc"):
        rec = by_mode[m]
        k = switch_index(rec, boundary_x)
        d = rec.array("distance")[k:]
        peaks[m] = float(np.max(d)) if d.size else float("nan")
    ok = (all(d_m["van"] < v for k, v in d_m.items() if k != "van")
          and peaks["van"] < peaks["mpc"])
    detail = (", ".join(f"{k} d_m={v:.4g}" for k, v in d_m.items())
              + f"; post-switch peak van={peaks['van']:.4g} mpc={peaks['mpc']:.4g}")
    return PropertyResult("varied terrain: VAN best mean, lower post-switch peak", ok, detail)


def verify_properties(records: Records) -> List[PropertyResult]:
    """Ordering, convergence and Lyapunov-audit properties over the full suite."""
    out = [
        check_energy_sanity(records),
        check_mpc_largest_mean(records, "flat_xi02"),
        check_mpc_largest_mean(records, "flat_xi04"),
        check_t_re_ordering(records),
        check_van_e_rmser_smallest(records),
        check_baseline_failure(records),
        check_relative_error_convergence(records),
        check_lyapunov_audit(records),
        check_step_size_envelope(records),
    ]
    if "varied" in records:
        out.append(check_varied_terrain(records))
    return out
