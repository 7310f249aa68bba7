"""Compare the four planners on the flat floor with a 20 % velocity loss.

Plain MPC does not know the robot rolls slower than commanded, so it lags the
reference for the whole run.  The adaptive planners learn the missing
velocity and close the gap within a few seconds.

    python3 demos/compare_modes.py [duration_seconds]
"""

import sys

from adaptive_tracking.harness import HarnessConfig, run_scenario, scenario_by_name
from adaptive_tracking.metrics import metrics_for_record


def fmt(v):
    return "none" if v is None else f"{v:.3f}"


def main(duration=30.0):
    sc = scenario_by_name("flat_xi02", harness=HarnessConfig(duration=duration))
    print(f"scenario {sc.name}: sine reference, {duration:.0f} s, dv = 0.2 v")
    print(f"{'mode':>9} {'t_r':>7} {'d_m':>7} {'d_mr':>7} {'t_re':>7} {'e_rmser':>8}")
    for mode, rec in run_scenario(sc).items():
        m = metrics_for_record(rec)
        print(f"{mode:>9} {fmt(m.t_r):>7} {fmt(m.d_m):>7} {fmt(m.d_mr):>7} "
              f"{fmt(m.t_re):>7} {fmt(m.e_rmser):>8}")


if __name__ == "__main__":
    main(float(sys.argv[1]) if len(sys.argv) > 1 else 30.0)
