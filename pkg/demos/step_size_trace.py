"""Watch the variable step size react to the velocity loss.

Prints, once per simulated second, the estimated and true velocity
compensation together with Gamma_1 and the buffered error level.  Gamma
climbs while the error level is high and decays to its floor once the
buffered level settles.  The estimate is Gamma times the network output, so
dv_hat sags with it and the weights have to grow to make up the difference.

    python3 demos/step_size_trace.py
"""

from adaptive_tracking.harness import HarnessConfig, run_mode, scenario_by_name


def main(duration=15.0):
    sc = scenario_by_name("flat_xi02", harness=HarnessConfig(duration=duration))
    rec = run_mode(sc, "van")
    t = rec.array("time")
    print(f"{'t':>5} {'dv_hat':>8} {'dv_true':>8} {'gamma_v':>8} {'zeta_v':>7} {'dist':>6}")
    for k in range(0, len(rec), 10):
        print(f"{t[k]:5.1f} {rec.columns['dv_hat'][k]:8.4f} {rec.columns['dv_true'][k]:8.4f} "
              f"{rec.columns['gamma_v'][k]:8.3f} {rec.columns['zeta_bar_v'][k]:7.2f} "
              f"{rec.columns['distance'][k]:6.3f}")


if __name__ == "__main__":
    main()
