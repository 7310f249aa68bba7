"""One planner cycle by hand: build the optimal control problem, solve it,
and push the first command through the simulated robot.

Useful for seeing what the optimiser returns before any learning happens.

    python3 demos/single_cycle.py
"""

import numpy as np

from adaptive_tracking.planner import OcpConfig, OcpProblem, solve_ocp
from adaptive_tracking.plant import CommandInput, Plant, PlantConfig, ProportionalVelocity, RobotState
from adaptive_tracking.trajectories import reference_window, sine_wave


def main():
    cfg = OcpConfig()
    x0 = RobotState(0.0, -0.5, 0.0)
    xr, ur, _ = reference_window(sine_wave, 0.0, cfg.horizon, cfg.dt, cfg.wheel_radius)
    for du in ((0.0, 0.0), (0.2, 0.0)):
        problem = OcpProblem(x0=x0.as_array(), u0=np.zeros(2), x_ref=xr, u_ref=ur,
                             delta_u=np.array(du))
        sol = solve_ocp(problem, cfg)
        print(f"estimate {du}: status={sol.status} iterations={sol.iterations} "
              f"objective={sol.objective:.4f} first command={np.round(sol.inputs[0], 4)}")

    plant = Plant(PlantConfig(), ProportionalVelocity(xi=0.2), x0)
    after = plant.step(CommandInput.from_array(sol.inputs[0]))
    print(f"robot after one period: ({after.x_pos:.4f}, {after.y_pos:.4f}, {after.yaw:.4f})")
    print(f"measured velocity {plant.measured_input.velocity:.4f} "
          f"vs executed {plant.executed_command.velocity:.4f}")


if __name__ == "__main__":
    main()
