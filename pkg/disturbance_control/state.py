"""
Shared domain types, units and frame conventions.

Frames: the world frame is z-up, the body frame is x-forward. Generalized
accelerations are ordered (linear xyz, angular xyz). Orientation is stored as
roll-pitch-yaw; the gimbal-lock region is excluded by construction.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence

import numpy as np
from scipy.spatial.transform import Rotation

from disturbance_control.errors import DimensionError, InvalidArgumentError, ParameterError

GRAVITY = 9.81
LATENT_DIM = 2
NUM_LEGS = 4

# Default estimator action limits, N and N m per component.
F_MAX = 30.0
T_MAX = 10.0
LEG_NAMES = ("FR", "FL", "RR", "RL")


def as_vector(value: Any, size: Optional[int], name: str) -> np.ndarray:
    """
    Convert a value to a read-only finite float64 vector.

    Args:
        value: Array-like input
        size: Required length, or None for any length
        name: Field name used in error messages

    Returns:
        A read-only copy of the input as a 1-D float64 array
    """
    array = np.array(value, dtype=np.float64).reshape(-1)
    if size is not None and array.shape != (size,):
        raise DimensionError(f"{name} must have {size} entries, got {array.size}")
    if not np.all(np.isfinite(array)):
        raise InvalidArgumentError(f"{name} must be finite, got {array}")
    array.setflags(write=False)
    return array


def as_matrix(value: Any, shape: Sequence[int], name: str) -> np.ndarray:
    """Convert a value to a read-only finite float64 matrix of the given shape."""
    array = np.array(value, dtype=np.float64)
    if array.shape != tuple(shape):
        raise DimensionError(f"{name} must have shape {tuple(shape)}, got {array.shape}")
    if not np.all(np.isfinite(array)):
        raise InvalidArgumentError(f"{name} must be finite")
    array.setflags(write=False)
    return array


def _check_finite_scalar(value: float, name: str) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise InvalidArgumentError(f"{name} must be finite, got {value}")
    return value


def wrap_angle(angle: float) -> float:
    """Wrap an angle into [-pi, pi)."""
    return (angle + math.pi) % (2.0 * math.pi) - math.pi


def rotation_z(yaw: float) -> np.ndarray:
    """
    Rotation matrix about the world z axis.

    Args:
        yaw: Rotation angle in radians

    Returns:
        3x3 proper rotation matrix
    """
    yaw = float(yaw)
    if not math.isfinite(yaw):
        raise InvalidArgumentError(f"yaw must be finite, got {yaw}")
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def skew(v: Any) -> np.ndarray:
    """
    Cross-product matrix, so that skew(v) @ w == cross(v, w).

    Args:
        v: 3-vector

    Returns:
        3x3 antisymmetric matrix
    """
    x, y, z = as_vector(v, 3, "v")
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def rotation_rpy(rpy: Any) -> np.ndarray:
    """Body-to-world rotation for roll-pitch-yaw angles (R = Rz Ry Rx)."""
    roll, pitch, yaw = as_vector(rpy, 3, "rpy")
    return Rotation.from_euler("ZYX", [yaw, pitch, roll]).as_matrix()


def rpy_rate_matrix(rpy: Any) -> np.ndarray:
    """Map from body angular velocity to roll-pitch-yaw rates."""
    roll, pitch, _ = as_vector(rpy, 3, "rpy")
    sr, cr = math.sin(roll), math.cos(roll)
    cp, tp = math.cos(pitch), math.tan(pitch)
    return np.array([
        [1.0, sr * tp, cr * tp],
        [0.0, cr, -sr],
        [0.0, sr / cp, cr / cp],
    ])


@dataclass(frozen=True, eq=False)
class BodyState:
    """Trunk pose and velocities."""

    position: np.ndarray
    orientation_rpy: np.ndarray
    linear_velocity: np.ndarray
    angular_velocity: np.ndarray
    timestamp: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", as_vector(self.position, 3, "position"))
        rpy = np.array(as_vector(self.orientation_rpy, 3, "orientation_rpy"))
        if abs(rpy[0]) >= math.pi / 2 or abs(rpy[1]) >= math.pi / 2:
            raise InvalidArgumentError(f"roll and pitch must lie in (-pi/2, pi/2), got {rpy[:2]}")
        rpy[2] = wrap_angle(rpy[2])
        object.__setattr__(self, "orientation_rpy", as_vector(rpy, 3, "orientation_rpy"))
        object.__setattr__(self, "linear_velocity", as_vector(self.linear_velocity, 3, "linear_velocity"))
        object.__setattr__(self, "angular_velocity", as_vector(self.angular_velocity, 3, "angular_velocity"))
        object.__setattr__(self, "timestamp", _check_finite_scalar(self.timestamp, "timestamp"))

    @classmethod
    def standing(cls, height: float, yaw: float = 0.0) -> "BodyState":
        """Create a motionless level state at the given trunk height."""
        return cls(
            position=[0.0, 0.0, height],
            orientation_rpy=[0.0, 0.0, yaw],
            linear_velocity=np.zeros(3),
            angular_velocity=np.zeros(3),
        )

    @property
    def roll(self) -> float:
        return float(self.orientation_rpy[0])

    @property
    def pitch(self) -> float:
        return float(self.orientation_rpy[1])

    @property
    def yaw(self) -> float:
        return float(self.orientation_rpy[2])

    @property
    def height(self) -> float:
        return float(self.position[2])

    @property
    def drp(self) -> np.ndarray:
        """Roll and pitch rates as measured by the IMU gyro."""
        return np.array(self.angular_velocity[:2])

    @property
    def heading_velocity(self) -> np.ndarray:
        """Linear velocity expressed in the yaw-aligned frame."""
        return rotation_z(self.yaw).T @ self.linear_velocity

    def to_dict(self) -> Dict[str, Any]:
        """
        Convert the BodyState to a dictionary.

        Returns:
            Dictionary representation with plain lists
        """
        return {
            "position": self.position.tolist(),
            "orientation_rpy": self.orientation_rpy.tolist(),
            "linear_velocity": self.linear_velocity.tolist(),
            "angular_velocity": self.angular_velocity.tolist(),
            "timestamp": self.timestamp,
        }


@dataclass(frozen=True, eq=False)
class ArmState:
    """Measured arm joint angles (all arms concatenated)."""

    joint_angles: np.ndarray
    timestamp: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "joint_angles", as_vector(self.joint_angles, None, "joint_angles"))
        object.__setattr__(self, "timestamp", _check_finite_scalar(self.timestamp, "timestamp"))


@dataclass(frozen=True, eq=False)
class ArmCommand:
    """Desired arm joint positions."""

    desired_joint_positions: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "desired_joint_positions",
            as_vector(self.desired_joint_positions, None, "desired_joint_positions"),
        )


@dataclass(frozen=True, eq=False)
class DisturbanceParams:
    """
    Arm wrench (f_a, tau_a) at the COM in the body frame.

    Construction does not clip, because the true arm wrench may exceed the
    estimator limits. Estimates fed to the controller are built with
    bounded() and checked with within_limits() where they enter the
    environment.
    """

    force: np.ndarray
    torque: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "force", as_vector(self.force, 3, "force"))
        object.__setattr__(self, "torque", as_vector(self.torque, 3, "torque"))

    @classmethod
    def zero(cls) -> "DisturbanceParams":
        return cls(force=np.zeros(3), torque=np.zeros(3))

    @classmethod
    def from_vector(cls, wrench: Any) -> "DisturbanceParams":
        wrench = as_vector(wrench, 6, "wrench")
        return cls(force=wrench[:3], torque=wrench[3:])

    @classmethod
    def bounded(cls, wrench: Any, f_max: float, t_max: float) -> "DisturbanceParams":
        """Create a wrench, clipping each component to the configured limits."""
        wrench = np.array(as_vector(wrench, 6, "wrench"))
        wrench[:3] = np.clip(wrench[:3], -f_max, f_max)
        wrench[3:] = np.clip(wrench[3:], -t_max, t_max)
        return cls.from_vector(wrench)

    def within_limits(self, f_max: float = F_MAX, t_max: float = T_MAX) -> bool:
        return bool(np.max(np.abs(self.force)) <= f_max and np.max(np.abs(self.torque)) <= t_max)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.force, self.torque])


@dataclass(frozen=True, eq=False)
class TrajectoryPoint:
    """Desired body motion at one instant (heading-frame velocities)."""

    desired_linear_velocity: np.ndarray = field(default_factory=lambda: np.zeros(2))
    desired_yaw_rate: float = 0.0
    desired_roll: float = 0.0
    desired_pitch: float = 0.0
    desired_height: float = 0.28

    def __post_init__(self):
        object.__setattr__(
            self, "desired_linear_velocity",
            as_vector(self.desired_linear_velocity, 2, "desired_linear_velocity"),
        )
        for name in ("desired_yaw_rate", "desired_roll", "desired_pitch", "desired_height"):
            object.__setattr__(self, name, _check_finite_scalar(getattr(self, name), name))
        if self.desired_height <= 0:
            raise InvalidArgumentError(f"desired_height must be positive, got {self.desired_height}")


@dataclass(frozen=True, eq=False)
class LatentState:
    """Two-dimensional latent summary of the arm's influence."""

    z: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "z", as_vector(self.z, LATENT_DIM, "z"))


@dataclass(frozen=True, eq=False)
class RobotParams:
    """Rigid-body and contact parameters of the quadruped trunk."""

    mass: float
    trunk_inertia: np.ndarray
    hip_offsets: np.ndarray
    friction_coefficient: float = 0.6
    min_normal_force: float = 5.0
    max_normal_force: float = math.inf
    leg_lengths: np.ndarray = field(default_factory=lambda: np.array([0.08, 0.2, 0.2]))
    nominal_height: float = 0.28

    def __post_init__(self):
        mass = _check_finite_scalar(self.mass, "mass")
        if mass <= 0:
            raise ParameterError(f"mass must be positive, got {mass}")
        object.__setattr__(self, "mass", mass)

        inertia = as_matrix(self.trunk_inertia, (3, 3), "trunk_inertia")
        if not np.allclose(inertia, inertia.T, atol=1e-12):
            raise ParameterError("trunk_inertia must be symmetric")
        if np.min(np.linalg.eigvalsh(inertia)) <= 0:
            raise ParameterError("trunk_inertia must be positive definite")
        object.__setattr__(self, "trunk_inertia", inertia)

        object.__setattr__(self, "hip_offsets", as_matrix(self.hip_offsets, (NUM_LEGS, 3), "hip_offsets"))
        object.__setattr__(self, "leg_lengths", as_vector(self.leg_lengths, 3, "leg_lengths"))

        mu = _check_finite_scalar(self.friction_coefficient, "friction_coefficient")
        if not 0.0 < mu <= 2.0:
            raise ParameterError(f"friction_coefficient must lie in (0, 2], got {mu}")
        object.__setattr__(self, "friction_coefficient", mu)

        fz_min = _check_finite_scalar(self.min_normal_force, "min_normal_force")
        if fz_min < 0:
            raise ParameterError(f"min_normal_force must be non-negative, got {fz_min}")
        object.__setattr__(self, "min_normal_force", fz_min)
        if math.isnan(float(self.max_normal_force)):
            raise ParameterError("max_normal_force must not be NaN")
        object.__setattr__(self, "max_normal_force", float(self.max_normal_force))
        object.__setattr__(self, "nominal_height", _check_finite_scalar(self.nominal_height, "nominal_height"))

    @classmethod
    def default(cls) -> "RobotParams":
        """A1-class trunk parameters at desk scale."""
        return cls(
            mass=12.0,
            trunk_inertia=np.diag([0.07, 0.26, 0.242]),
            hip_offsets=np.array([
                [0.183, -0.13, 0.0],
                [0.183, 0.13, 0.0],
                [-0.183, -0.13, 0.0],
                [-0.183, 0.13, 0.0],
            ]),
            friction_coefficient=0.6,
            min_normal_force=5.0,
            max_normal_force=200.0,
        )

    @property
    def weight(self) -> float:
        return self.mass * GRAVITY
