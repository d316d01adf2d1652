"""
Base classes for the disturbance control experiments.

This module provides the task scenario plugin interface, the random force
pulse schedule applied to the gripper, and the experiment manager that owns
logging, the task registry and output directories.
"""

import abc
import importlib
import logging
import math
import os
import pkgutil
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Type

import numpy as np

from disturbance_control.arm import ArmModel
from disturbance_control.controller import STAND
from disturbance_control.errors import ConfigError, InvalidArgumentError
from disturbance_control.state import TrajectoryPoint
from disturbance_control.utils import PACKAGE_LOGGER, ensure_directory, get_logger, write_json

logger = get_logger("TaskRegistry")


@dataclass
class TaskSpec:
    """Task kind with its parameters and random force schedule settings."""

    kind: str
    parameters: Dict[str, Any] = field(default_factory=dict)
    disturbance: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_config(cls, kind: str, config: Dict[str, Any]) -> "TaskSpec":
        """
        Build a TaskSpec from the harness config sections.

        Args:
            kind: Registered task name
            config: Full harness configuration dictionary

        Returns:
            TaskSpec instance
        """
        return cls(kind=kind, parameters=dict(config.get("tasks", {})),
                   disturbance=dict(config.get("disturbance", {})))


class ForcePulseSchedule:
    """
    Random horizontal force pulses on the gripper: uniform magnitude, uniform
    direction, fixed duration and exponential gaps between pulses.
    """

    def __init__(self, max_force: float = 20.0, duration: float = 0.5, mean_interval: float = 2.0):
        if max_force < 0 or duration <= 0 or mean_interval <= 0:
            raise InvalidArgumentError("Force pulses need max_force >= 0 and positive duration and interval")
        self.max_force = max_force
        self.duration = duration
        self.mean_interval = mean_interval
        self.rng: Optional[np.random.Generator] = None
        self.start = math.inf
        self.vector = np.zeros(3)

    def reset(self, rng: np.random.Generator) -> None:
        self.rng = rng
        self.start = 0.0
        self.vector = np.zeros(3)
        self._schedule_next(0.0)

    def _schedule_next(self, after: float) -> None:
        self.start = after + self.rng.exponential(self.mean_interval)
        magnitude = self.rng.uniform(0.0, self.max_force)
        angle = self.rng.uniform(0.0, 2.0 * math.pi)
        self.vector = np.array([magnitude * math.cos(angle), magnitude * math.sin(angle), 0.0])

    def force(self, t: float) -> np.ndarray:
        """World-frame pulse force at time t (queried with non-decreasing t)."""
        if self.rng is None:
            return np.zeros(3)
        while t >= self.start + self.duration:
            self._schedule_next(self.start + self.duration)
        if t >= self.start:
            return np.array(self.vector)
        return np.zeros(3)


class TaskScenario(abc.ABC):
    """Abstract base class for task scenarios."""

    name = ""
    description = ""
    uses_pulses = False

    def __init__(self, spec: TaskSpec):
        """
        Initialize the TaskScenario.

        Args:
            spec: Task parameters and disturbance settings
        """
        self.spec = spec
        self.parameters = spec.parameters
        self.logger = get_logger(self.__class__.__name__)
        self.arm_model: Optional[ArmModel] = None
        self.nominal_height = 0.28
        self.pulses: Optional[ForcePulseSchedule] = None
        if self.uses_pulses and spec.disturbance.get("enabled", False):
            self.pulses = ForcePulseSchedule(
                max_force=float(spec.disturbance.get("max_force", 20.0)),
                duration=float(spec.disturbance.get("duration", 0.5)),
                mean_interval=float(spec.disturbance.get("mean_interval", 2.0)),
            )
        self.validate()

    def validate(self) -> None:
        """Check kind-specific parameters; raise ConfigError on bad values."""
        pass

    def param(self, key: str, default: Any) -> Any:
        return self.parameters.get(key, default)

    @property
    def gait_mode(self) -> str:
        return STAND

    def reset(self, arm_model: Optional[ArmModel], rng: np.random.Generator, nominal_height: float) -> None:
        """
        Prepare a new episode.

        Args:
            arm_model: Arm carried by the robot (None for no arm)
            rng: Episode random generator
            nominal_height: Trunk height to hold
        """
        self.arm_model = arm_model
        self.nominal_height = nominal_height
        if self.pulses is not None:
            self.pulses.reset(rng)

    @abc.abstractmethod
    def desired(self, t: float) -> TrajectoryPoint:
        """
        Desired body motion at time t.

        Args:
            t: Time since episode start in seconds

        Returns:
            TrajectoryPoint
        """
        pass

    @abc.abstractmethod
    def arm_target(self, t: float) -> np.ndarray:
        """
        Commanded arm joint positions at time t.

        Args:
            t: Time since episode start in seconds

        Returns:
            Joint positions for all arms
        """
        pass

    def tip_force(self, t: float, yaw: float) -> np.ndarray:
        """World-frame external force on the first gripper."""
        if self.pulses is None:
            return np.zeros(3)
        return self.pulses.force(t)

    def payload_mass(self, t: float) -> float:
        """Mass held in each gripper at time t."""
        return 0.0


def discover_tasks() -> Dict[str, Type[TaskScenario]]:
    """
    Import every module in the tasks package and collect TaskScenario subclasses.

    Returns:
        Mapping of task name to class
    """
    from disturbance_control import tasks

    registry: Dict[str, Type[TaskScenario]] = {}
    for _, module_name, _ in pkgutil.iter_modules(tasks.__path__):
        try:
            module = importlib.import_module(f"disturbance_control.tasks.{module_name}")
        except ImportError as e:
            logger.error(f"Error loading task module {module_name}: {e}", exc_info=True)
            continue
        for attr_name in dir(module):
            attr = getattr(module, attr_name)
            if isinstance(attr, type) and issubclass(attr, TaskScenario) and attr is not TaskScenario and attr.name:
                registry[attr.name] = attr
    if not registry:
        logger.warning("No task scenarios were registered! Check the tasks package.")
    return registry


def create_task(spec: TaskSpec) -> TaskScenario:
    """Instantiate the registered scenario for a TaskSpec."""
    registry = discover_tasks()
    if spec.kind not in registry:
        raise ConfigError(f"Unknown task '{spec.kind}'. Available: {', '.join(sorted(registry))}")
    return registry[spec.kind](spec)


class ExperimentManager:
    """Manager class for experiment runs: logging, task registry and outputs."""

    def __init__(self, config: Dict[str, Any], output_directory: Optional[str] = None):
        """
        Initialize the ExperimentManager.

        Args:
            config: Effective (merged) harness configuration
            output_directory: Overrides config["output_directory"]
        """
        self.config = config
        self.output_directory = output_directory or config.get("output_directory", "./output")
        ensure_directory(self.output_directory)
        self.logger = self._setup_logger()
        self.tasks = discover_tasks()
        self.logger.debug(f"Registered tasks: {', '.join(sorted(self.tasks))}")

    def _setup_logger(self) -> logging.Logger:
        """
        Set up logging.

        Handlers go on the package logger and replace those of a previous manager.

        Returns:
            Configured logger
        """
        level_name = str(self.config.get("log_level", "INFO")).upper()
        log_level = getattr(logging, level_name, logging.INFO)
        package_logger = logging.getLogger(PACKAGE_LOGGER)
        package_logger.setLevel(log_level)

        for handler in list(package_logger.handlers):
            if getattr(handler, "_dpc_handler", False):
                package_logger.removeHandler(handler)
                handler.close()

        file_handler = logging.FileHandler(os.path.join(self.output_directory, "dpc.log"))
        console_handler = logging.StreamHandler()

        formatter = logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')
        for handler in (file_handler, console_handler):
            handler.setFormatter(formatter)
            handler._dpc_handler = True
            package_logger.addHandler(handler)
        return get_logger("ExperimentManager")

    def task_names(self) -> List[str]:
        return sorted(self.tasks)

    def output_path(self, *parts: str) -> str:
        path = os.path.join(self.output_directory, *parts)
        ensure_directory(os.path.dirname(path))
        return path

    def save_config(self, directory: Optional[str] = None) -> str:
        """
        Echo the effective configuration into an output directory.

        Args:
            directory: Target directory (defaults to the output directory)

        Returns:
            Path of the written config_used.json
        """
        path = os.path.join(directory or self.output_directory, "config_used.json")
        write_json(path, self.config)
        self.logger.info(f"Saved effective configuration to {path}")
        return path
