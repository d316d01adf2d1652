"""
Reaching scenario: the gripper moves between random targets while random
force pulses push on it. This is the scenario the estimator is trained on.
"""

import math
from typing import List, Optional

import numpy as np

from disturbance_control.arm import ArmModel
from disturbance_control.base import TaskScenario
from disturbance_control.errors import ConfigError
from disturbance_control.state import TrajectoryPoint


class ReachingTask(TaskScenario):
    """Standing robot, arm reaching a new random pose every ``reach_hold`` seconds."""

    name = "reaching"
    description = "Move the gripper to random targets under random tip force pulses"
    uses_pulses = True

    def validate(self) -> None:
        if float(self.param("reach_hold", 3.0)) <= 0:
            raise ConfigError("tasks.reach_hold must be positive")

    def reset(self, arm_model: Optional[ArmModel], rng: np.random.Generator, nominal_height: float) -> None:
        super().reset(arm_model, rng, nominal_height)
        self.rng = rng
        self.hold = float(self.param("reach_hold", 3.0))
        self.waypoints: List[np.ndarray] = []
        if arm_model is not None:
            self.waypoints.append(arm_model.home_pose())

    def _waypoint(self, index: int) -> np.ndarray:
        while len(self.waypoints) <= index:
            self.waypoints.append(self.arm_model.random_pose(self.rng))
        return self.waypoints[index]

    def desired(self, t: float) -> TrajectoryPoint:
        return TrajectoryPoint(desired_height=self.nominal_height)

    def arm_target(self, t: float) -> np.ndarray:
        if self.arm_model is None:
            return np.zeros(0)
        segment = int(t // self.hold)
        # Move during the first half of each segment, then hold.
        progress = min(1.0, (t - segment * self.hold) / (0.5 * self.hold))
        blend = 0.5 - 0.5 * math.cos(math.pi * progress)
        start, goal = self._waypoint(segment), self._waypoint(segment + 1)
        return start + blend * (goal - start)
