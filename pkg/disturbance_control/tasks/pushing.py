"""
Pushing scenario: trot forward with the arm extended against a box.
"""

import numpy as np

from disturbance_control.base import TaskScenario
from disturbance_control.controller import TROT
from disturbance_control.errors import ConfigError
from disturbance_control.state import TrajectoryPoint, rotation_z

EXTENDED_POSE = (0.0, 0.2, 0.4, -0.6)
CONTACT_START = 0.5


class PushingTask(TaskScenario):
    """
    Trot at ``walk_speed`` with the arm extended forward. From the moment the
    gripper touches the box, the box pushes back with a constant horizontal
    force of ``push_force`` along the heading.
    """

    name = "pushing"
    description = "Push a box forward while trotting"

    def validate(self) -> None:
        if float(self.param("push_force", 15.0)) < 0:
            raise ConfigError("tasks.push_force must be non-negative")

    @property
    def gait_mode(self) -> str:
        return TROT

    def desired(self, t: float) -> TrajectoryPoint:
        return TrajectoryPoint(desired_linear_velocity=[float(self.param("walk_speed", 0.1)), 0.0],
                               desired_height=self.nominal_height)

    def arm_target(self, t: float) -> np.ndarray:
        if self.arm_model is None:
            return np.zeros(0)
        pose = np.zeros(self.arm_model.dof)
        count = min(self.arm_model.dof, len(EXTENDED_POSE))
        pose[:count] = EXTENDED_POSE[:count]
        return self.arm_model.clip(np.tile(pose, self.arm_model.arm_count))

    def tip_force(self, t: float, yaw: float) -> np.ndarray:
        force = super().tip_force(t, yaw)
        if t >= CONTACT_START:
            force = force + rotation_z(yaw) @ np.array([-float(self.param("push_force", 15.0)), 0.0, 0.0])
        return force
