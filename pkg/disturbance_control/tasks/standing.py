"""
Standing scenario: hold the nominal pose with the arm folded.
"""

import numpy as np

from disturbance_control.base import TaskScenario
from disturbance_control.state import TrajectoryPoint


class StandingTask(TaskScenario):
    """All four feet in stance, zero velocity command, arm at its home pose."""

    name = "standing"
    description = "Stand still with the arm folded"

    def desired(self, t: float) -> TrajectoryPoint:
        return TrajectoryPoint(desired_height=self.nominal_height)

    def arm_target(self, t: float) -> np.ndarray:
        if self.arm_model is None:
            return np.zeros(0)
        return self.arm_model.home_pose()
