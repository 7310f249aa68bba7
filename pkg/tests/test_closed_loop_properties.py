"""Closed-loop invariants of the harness beyond the numbered acceptance
criteria.  They reuse the session's cached runs."""

import numpy as np
import pytest

from adaptive_tracking.metrics import metrics_for_record
from adaptive_tracking.properties import (
    check_mpc_largest_mean, check_relative_error_convergence, check_t_re_ordering,
)

pytestmark = pytest.mark.slow


def test_van_relative_error_converges(suite):
    res = check_relative_error_convergence({"flat_xi02": suite.scenario("flat_xi02")})
    print(res.line())
    assert res.passed


def test_t_re_ordering_at_xi_02(suite):
    res = check_t_re_ordering({"flat_xi02": suite.scenario("flat_xi02")})
    print(res.line())
    assert res.passed


def test_mpc_has_the_largest_mean_distance_at_xi_04(suite):
    res = check_mpc_largest_mean({"flat_xi04": suite.scenario("flat_xi04")}, "flat_xi04")
    print(res.line())
    assert res.passed


def test_run_logs_are_well_formed(suite):
    for (scenario, mode), rec in suite.records.items():
        t = rec.array("time")
        assert np.all(np.diff(t) > 0)
        if not rec.diverged:
            assert len(rec) == int(round(t[-1] / 0.1)) + 1
        m = metrics_for_record(rec)
        for v in m.to_dict().values():
            assert v is None or v >= 0
        # shooting gaps of converged solves stay below the tolerance
        status = np.array(rec.columns["status"])
        assert np.all(rec.array("max_gap")[status == "converged"] < 1e-6)
