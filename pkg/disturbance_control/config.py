"""
Harness configuration: documented defaults, JSON loading with deep merge,
validation and typed views onto each section.
"""

import copy
import json
import os
from typing import Any, Dict, List, Optional

from disturbance_control.arm import ArmModel
from disturbance_control.controller import LowLevelController
from disturbance_control.errors import ConfigError, DpcError
from disturbance_control.estimator import SacConfig
from disturbance_control.sim import SimConfig
from disturbance_control.state import RobotParams
from disturbance_control.utils import get_logger

NO_ARM = "none"
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")

_JOINT_LIMITS = [[-3.1, 3.1], [-1.8, 1.9], [-1.7, 2.1], [-1.7, 1.9]]


def _arm_entry(biceps: float, gripper: float, arm_count: int = 1) -> Dict[str, Any]:
    return {
        "link_lengths": [0.06, biceps, 0.14, 0.07],
        "link_masses": [0.12, biceps, 0.12, 0.05],
        "gripper_mass": gripper,
        "mount_offset": [0.1, 0.0, 0.06],
        "joint_limits": copy.deepcopy(_JOINT_LIMITS),
        "joint_axes": ["z", "y", "y", "y"],
        "arm_count": arm_count,
        "arm_spacing": 0.16,
    }


DEFAULT_CONFIG: Dict[str, Any] = {
    "output_directory": "./output",
    "log_level": "INFO",
    "seed": 0,
    "robot": {
        "mass": 12.0,
        "trunk_inertia": [[0.07, 0.0, 0.0], [0.0, 0.26, 0.0], [0.0, 0.0, 0.242]],
        "hip_offsets": [[0.183, -0.13, 0.0], [0.183, 0.13, 0.0], [-0.183, -0.13, 0.0], [-0.183, 0.13, 0.0]],
        "leg_lengths": [0.08, 0.2, 0.2],
        "friction_coefficient": 0.6,
        "min_normal_force": 5.0,
        "max_normal_force": 200.0,
        "nominal_height": 0.28,
    },
    "arms": {
        "regular": _arm_entry(0.14, 0.1),
        "longer": _arm_entry(0.28, 0.1),
        "heavier": _arm_entry(0.14, 0.5),
        "double": _arm_entry(0.14, 0.1, arm_count=2),
    },
    "controller": {
        "kp_pose": [0.0, 0.0, 100.0, 250.0, 250.0, 0.0],
        "kd_pose": [10.0, 10.0, 10.0, 10.0, 10.0, 10.0],
        "kp_swing": [300.0, 300.0, 300.0],
        "kd_swing": [10.0, 10.0, 10.0],
        "q_weights": [1.0, 1.0, 10.0, 20.0, 20.0, 10.0],
        "r_weight": 1e-4,
        "swing_duration": 0.3,
        "swing_height": 0.06,
        "qp_tolerance": 1e-8,
        "qp_max_iter": 100,
    },
    "sac": {
        "gamma": 0.99,
        "polyak": 0.005,
        "learning_rate": 3e-4,
        "batch_size": 256,
        "replay_capacity": 100000,
        "target_entropy": -6.0,
        "warmup_steps": 1000,
        "initial_alpha": 0.2,
        "hidden_sizes": [128, 128],
        "f_max": 30.0,
        "t_max": 10.0,
        "obs_warmup": 1000,
    },
    "adapter": {
        "hidden_sizes": [128, 128],
        "epochs": 20,
        "learning_rate": 1e-3,
        "batch_size": 256,
        "holdout_fraction": 0.1,
        "migration_budget": 30000,
    },
    "sim": {
        "physics_dt": 0.001,
        "lowlevel_period": 0.002,
        "highlevel_period": 0.02,
        "episode_length": 10.0,
        "gravity": 9.81,
        "arm_time_constant": 0.05,
        "foot_mass": 0.1,
        "fall_height": 0.05,
        "fall_angle": 0.8,
    },
    "tasks": {
        "push_force": 15.0,
        "payload_mass": 0.3,
        "table_height": 0.0,
        "ball_count": 1,
        "walk_speed": 0.1,
        "reach_hold": 3.0,
    },
    "disturbance": {
        "enabled": True,
        "max_force": 20.0,
        "duration": 0.5,
        "mean_interval": 2.0,
    },
    "compare": {
        "seeds": 5,
        "workers": 1,
    },
}

# Keys whose value may be null in a user file (null means "unbounded").
NULLABLE_KEYS = {"robot.max_normal_force"}
REQUIRED_ARM_KEYS = ("link_lengths", "link_masses", "gripper_mass", "mount_offset", "joint_limits")

logger = get_logger("DpcConfig")


def _kind(value: Any) -> str:
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, (int, float)):
        return "number"
    if isinstance(value, str):
        return "string"
    if isinstance(value, list):
        return "list"
    if isinstance(value, dict):
        return "object"
    if value is None:
        return "null"
    return type(value).__name__


def _merge(defaults: Dict[str, Any], overrides: Dict[str, Any], prefix: str, errors: List[str]) -> Dict[str, Any]:
    """Deep-merge overrides into a copy of defaults, recording unknown keys and type mismatches."""
    merged = copy.deepcopy(defaults)
    for key, value in overrides.items():
        dotted = f"{prefix}{key}"
        if dotted == "arms":
            merged[key] = _merge_arms(defaults[key], value, errors)
            continue
        if key not in defaults:
            errors.append(f"Unknown configuration key: {dotted}")
            continue
        expected = _kind(defaults[key])
        actual = _kind(value)
        if actual == "null" and dotted in NULLABLE_KEYS:
            merged[key] = None
        elif expected == "object" and actual == "object":
            merged[key] = _merge(defaults[key], value, f"{dotted}.", errors)
        elif expected != actual:
            errors.append(f"{dotted} must be a {expected}, got {actual}")
        elif isinstance(defaults[key], int) and not isinstance(defaults[key], bool) and isinstance(value, float):
            if not value.is_integer():
                errors.append(f"{dotted} must be an integer, got {value}")
            else:
                merged[key] = int(value)
        else:
            merged[key] = value
    return merged


def _merge_arms(defaults: Dict[str, Any], overrides: Any, errors: List[str]) -> Dict[str, Any]:
    if not isinstance(overrides, dict):
        errors.append(f"arms must be a object, got {_kind(overrides)}")
        return copy.deepcopy(defaults)
    template = defaults["regular"]
    merged = copy.deepcopy(defaults)
    for name, entry in overrides.items():
        if name == NO_ARM:
            errors.append(f"arms.{name} is reserved for running without an arm")
            continue
        if not isinstance(entry, dict):
            errors.append(f"arms.{name} must be a object, got {_kind(entry)}")
            continue
        if name not in defaults:
            missing = [key for key in REQUIRED_ARM_KEYS if key not in entry]
            if missing:
                errors.append(f"arms.{name} is missing {', '.join(missing)}")
                continue
        base = defaults.get(name, template)
        merged[name] = _merge(base, entry, f"arms.{name}.", errors)
    return merged


class HarnessConfig:
    """Validated harness configuration with typed views."""

    def __init__(self, data: Dict[str, Any]):
        errors: List[str] = []
        if not isinstance(data, dict):
            raise ConfigError("Configuration must be a JSON object")
        self.data = _merge(DEFAULT_CONFIG, data, "", errors)
        level = str(self.data["log_level"]).upper()
        if level not in LOG_LEVELS:
            errors.append(f"log_level must be one of {', '.join(LOG_LEVELS)}, got {self.data['log_level']}")
        if errors:
            raise ConfigError("; ".join(errors))
        self._check_views()

    @classmethod
    def load(cls, path: Optional[str] = None) -> "HarnessConfig":
        """
        Load configuration from a JSON file.

        Args:
            path: Path to the configuration file; None uses the defaults

        Returns:
            HarnessConfig
        """
        if path is None:
            return cls({})
        if not os.path.exists(path):
            raise ConfigError(f"Configuration file not found: {path}")
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"Invalid JSON in {path}: {e}") from e
        logger.debug(f"Loaded configuration from {path}")
        return cls(data)

    def _check_views(self) -> None:
        """Build every typed view once so value errors surface at load time."""
        try:
            params = self.robot_params()
            for name in self.arm_names():
                self.arm_model(name)
            self.controller(params)
            self.sac_config()
            self.sim_config()
        except ConfigError:
            raise
        except (DpcError, KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"Invalid configuration value: {e}") from e
        if self.data["compare"]["seeds"] < 1 or self.data["compare"]["workers"] < 1:
            raise ConfigError("compare.seeds and compare.workers must be at least 1")
        adapter = self.data["adapter"]
        if not 0.0 <= adapter["holdout_fraction"] < 1.0:
            raise ConfigError("adapter.holdout_fraction must lie in [0, 1)")

    def to_dict(self) -> Dict[str, Any]:
        return copy.deepcopy(self.data)

    def section(self, name: str) -> Dict[str, Any]:
        return self.data[name]

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    @property
    def output_directory(self) -> str:
        return self.data["output_directory"]

    @property
    def log_level(self) -> str:
        return str(self.data["log_level"]).upper()

    def robot_params(self) -> RobotParams:
        robot = self.data["robot"]
        max_force = robot["max_normal_force"]
        return RobotParams(
            mass=robot["mass"],
            trunk_inertia=robot["trunk_inertia"],
            hip_offsets=robot["hip_offsets"],
            friction_coefficient=robot["friction_coefficient"],
            min_normal_force=robot["min_normal_force"],
            max_normal_force=float("inf") if max_force is None else max_force,
            leg_lengths=robot["leg_lengths"],
            nominal_height=robot["nominal_height"],
        )

    def arm_names(self) -> List[str]:
        return sorted(self.data["arms"])

    def arm_model(self, name: str) -> Optional[ArmModel]:
        """Catalog arm by name; ``none`` means no arm."""
        if name == NO_ARM:
            return None
        if name not in self.data["arms"]:
            raise ConfigError(f"Unknown arm '{name}'. Available: {', '.join(self.arm_names() + [NO_ARM])}")
        return ArmModel.from_dict(name, self.data["arms"][name])

    def controller(self, params: Optional[RobotParams] = None) -> LowLevelController:
        return LowLevelController.from_config(params or self.robot_params(), self.data["controller"])

    def sac_config(self) -> SacConfig:
        return SacConfig.from_config(self.data["sac"])

    def sim_config(self, seed: Optional[int] = None) -> SimConfig:
        return SimConfig.from_config(self.data["sim"], self.seed if seed is None else seed)
