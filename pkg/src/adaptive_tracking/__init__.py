"""Adaptive MPC trajectory tracking for a rolling spherical robot.

Modules: ``plant`` (kinematics and simulated robot), ``trajectories``
(references and errors), ``estimator`` (RBF uncertainty network),
``planner`` (optimal control problem and SQP), ``harness`` (closed-loop
runs), ``metrics``, ``config``, ``results`` and ``cli``.
"""

__version__ = "0.1.0"
