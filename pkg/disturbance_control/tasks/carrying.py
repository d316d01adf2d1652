"""
Carrying scenario: pick balls from a table and carry them while trotting.
"""

import math

import numpy as np

from disturbance_control.base import TaskScenario
from disturbance_control.controller import TROT
from disturbance_control.errors import ConfigError
from disturbance_control.state import TrajectoryPoint

PICK_POSE = (0.0, 0.7, 0.6, 0.2)
LIFT_POSE = (0.0, -0.5, 0.9, -0.4)
CYCLE = 2.0


class CarryingTask(TaskScenario):
    """
    Each cycle the arm lowers to the table, grasps one ball (adding
    ``payload_mass`` to the gripper) and lifts it. Cycles repeat until
    ``ball_count`` balls are held; the robot trots at ``walk_speed`` once the
    first ball is lifted. A higher ``table_height`` raises the pick pose.
    """

    name = "carrying"
    description = "Lift balls from a table and carry them"

    def validate(self) -> None:
        if float(self.param("payload_mass", 0.3)) < 0:
            raise ConfigError("tasks.payload_mass must be non-negative")
        if int(self.param("ball_count", 1)) < 1:
            raise ConfigError("tasks.ball_count must be at least 1")
        if float(self.param("table_height", 0.0)) < 0:
            raise ConfigError("tasks.table_height must be non-negative")

    @property
    def gait_mode(self) -> str:
        return TROT

    def _balls_held(self, t: float) -> int:
        return min(int(self.param("ball_count", 1)), int((t + 0.5 * CYCLE) // CYCLE))

    def desired(self, t: float) -> TrajectoryPoint:
        speed = float(self.param("walk_speed", 0.1)) if t >= CYCLE else 0.0
        return TrajectoryPoint(desired_linear_velocity=[speed, 0.0], desired_height=self.nominal_height)

    def _pose(self, values) -> np.ndarray:
        pose = np.zeros(self.arm_model.dof)
        count = min(self.arm_model.dof, len(values))
        pose[:count] = values[:count]
        return pose

    def arm_target(self, t: float) -> np.ndarray:
        if self.arm_model is None:
            return np.zeros(0)
        pick = self._pose(PICK_POSE)
        if self.arm_model.dof > 1:
            pick[1] -= 2.0 * float(self.param("table_height", 0.0))
        lift = self._pose(LIFT_POSE)
        if t >= int(self.param("ball_count", 1)) * CYCLE:
            single = lift
        else:
            # Down to the table in the first half of the cycle, back up in the second.
            local = (t % CYCLE) / CYCLE
            blend = 0.5 - 0.5 * math.cos(2.0 * math.pi * local)
            single = lift + blend * (pick - lift)
        return self.arm_model.clip(np.tile(single, self.arm_model.arm_count))

    def payload_mass(self, t: float) -> float:
        return float(self.param("payload_mass", 0.3)) * self._balls_held(t)
