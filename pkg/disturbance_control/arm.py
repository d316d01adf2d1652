"""
Serial-link arm description and kinematics.

Each arm starts at its mount point on the trunk. A joint about "z" is followed
by a link along the local z axis; a joint about "y" is followed by a link
along the local x axis. Link masses sit at link midpoints and the gripper mass
at the tip.
"""

import math
from dataclasses import dataclass
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from disturbance_control.errors import DimensionError, InvalidArgumentError
from disturbance_control.state import as_matrix, as_vector

JOINT_TOLERANCE = 1e-9


def _axis_rotation(axis: str, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    if axis == "z":
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    if axis == "y":
        return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
    raise InvalidArgumentError(f"Unsupported joint axis: {axis}")


_LINK_DIRECTION = {"z": np.array([0.0, 0.0, 1.0]), "y": np.array([1.0, 0.0, 0.0])}


@dataclass(frozen=True, eq=False)
class ArmModel:
    """Geometry and mass distribution of one arm type (one or two copies)."""

    name: str
    link_lengths: np.ndarray
    link_masses: np.ndarray
    gripper_mass: float
    mount_offset: np.ndarray
    joint_limits: np.ndarray
    joint_axes: Tuple[str, ...] = ("z", "y", "y", "y")
    arm_count: int = 1
    arm_spacing: float = 0.16

    def __post_init__(self):
        lengths = as_vector(self.link_lengths, None, "link_lengths")
        dof = lengths.size
        if dof == 0 or np.any(lengths <= 0):
            raise InvalidArgumentError("link_lengths must be positive and non-empty")
        masses = as_vector(self.link_masses, dof, "link_masses")
        if np.any(masses < 0):
            raise InvalidArgumentError("link_masses must be non-negative")
        if len(self.joint_axes) != dof or any(axis not in _LINK_DIRECTION for axis in self.joint_axes):
            raise InvalidArgumentError(f"joint_axes must name {dof} axes from {sorted(_LINK_DIRECTION)}")
        limits = as_matrix(self.joint_limits, (dof, 2), "joint_limits")
        if np.any(limits[:, 0] > limits[:, 1]):
            raise InvalidArgumentError("joint_limits lower bounds must not exceed upper bounds")
        if self.arm_count not in (1, 2):
            raise InvalidArgumentError(f"arm_count must be 1 or 2, got {self.arm_count}")
        if self.gripper_mass < 0:
            raise InvalidArgumentError("gripper_mass must be non-negative")
        object.__setattr__(self, "link_lengths", lengths)
        object.__setattr__(self, "link_masses", masses)
        object.__setattr__(self, "joint_limits", limits)
        object.__setattr__(self, "joint_axes", tuple(self.joint_axes))
        object.__setattr__(self, "mount_offset", as_vector(self.mount_offset, 3, "mount_offset"))
        object.__setattr__(self, "gripper_mass", float(self.gripper_mass))
        object.__setattr__(self, "arm_spacing", float(self.arm_spacing))

    @classmethod
    def from_dict(cls, name: str, data: Dict[str, Any]) -> "ArmModel":
        """
        Build an ArmModel from a catalog entry.

        Args:
            name: Catalog name of the arm
            data: Dictionary with the dataclass field names as keys

        Returns:
            ArmModel instance
        """
        return cls(
            name=name,
            link_lengths=data["link_lengths"],
            link_masses=data["link_masses"],
            gripper_mass=data["gripper_mass"],
            mount_offset=data["mount_offset"],
            joint_limits=data["joint_limits"],
            joint_axes=tuple(data.get("joint_axes", ("z", "y", "y", "y"))),
            arm_count=int(data.get("arm_count", 1)),
            arm_spacing=float(data.get("arm_spacing", 0.16)),
        )

    @property
    def dof(self) -> int:
        """Joints per arm."""
        return int(self.link_lengths.size)

    @property
    def joint_count(self) -> int:
        """Joints over all arms."""
        return self.dof * self.arm_count

    @property
    def total_mass(self) -> float:
        return float(self.arm_count * (self.link_masses.sum() + self.gripper_mass))

    def mount_points(self) -> List[np.ndarray]:
        """Mount point of each arm in the body frame."""
        if self.arm_count == 1:
            return [np.array(self.mount_offset)]
        half = 0.5 * self.arm_spacing
        return [self.mount_offset + np.array([0.0, -half, 0.0]), self.mount_offset + np.array([0.0, half, 0.0])]

    def split(self, joint_angles: Sequence[float]) -> List[np.ndarray]:
        """Split concatenated joint angles into one vector per arm."""
        angles = np.asarray(joint_angles, dtype=np.float64)
        if angles.shape != (self.joint_count,):
            raise DimensionError(f"Expected {self.joint_count} arm joint angles, got {angles.shape}")
        return [angles[k * self.dof:(k + 1) * self.dof] for k in range(self.arm_count)]

    def lower_limits(self) -> np.ndarray:
        return np.tile(self.joint_limits[:, 0], self.arm_count)

    def upper_limits(self) -> np.ndarray:
        return np.tile(self.joint_limits[:, 1], self.arm_count)

    def clip(self, joint_angles: Sequence[float]) -> np.ndarray:
        return np.clip(np.asarray(joint_angles, dtype=np.float64), self.lower_limits(), self.upper_limits())

    def within_limits(self, joint_angles: Sequence[float]) -> bool:
        angles = np.asarray(joint_angles, dtype=np.float64)
        return bool(np.all(angles >= self.lower_limits() - JOINT_TOLERANCE)
                    and np.all(angles <= self.upper_limits() + JOINT_TOLERANCE))

    def home_pose(self) -> np.ndarray:
        """Folded pose, clipped into the joint limits."""
        single = np.zeros(self.dof)
        pattern = [0.0, -0.9, 1.8, -0.9]
        for j in range(self.dof):
            single[j] = pattern[j] if j < len(pattern) else 0.0
        return self.clip(np.tile(single, self.arm_count))

    def random_pose(self, rng: np.random.Generator, margin: float = 0.1) -> np.ndarray:
        """Uniform random pose inside the joint limits, shrunk by a margin."""
        lower = self.lower_limits() + margin
        upper = np.maximum(self.upper_limits() - margin, lower)
        return rng.uniform(lower, upper)

    def with_payload(self, payload_mass: float) -> "ArmModel":
        """Copy of the arm with payload mass added to each gripper."""
        return ArmModel(
            name=self.name,
            link_lengths=self.link_lengths,
            link_masses=self.link_masses,
            gripper_mass=self.gripper_mass + float(payload_mass),
            mount_offset=self.mount_offset,
            joint_limits=self.joint_limits,
            joint_axes=self.joint_axes,
            arm_count=self.arm_count,
            arm_spacing=self.arm_spacing,
        )


def forward_kinematics(arm_model: ArmModel, joint_angles: Sequence[float],
                       mount: Sequence[float]) -> Tuple[List[np.ndarray], np.ndarray]:
    """
    Link mass positions and tip position of a single arm in the body frame.

    Args:
        arm_model: Arm description
        joint_angles: Joint angles of this arm (dof entries)
        mount: Mount point of this arm

    Returns:
        Tuple of (link midpoint positions, tip position)
    """
    rotation = np.eye(3)
    point = np.array(mount, dtype=np.float64)
    midpoints = []
    for axis, length, angle in zip(arm_model.joint_axes, arm_model.link_lengths, joint_angles):
        rotation = rotation @ _axis_rotation(axis, float(angle))
        link = rotation @ (_LINK_DIRECTION[axis] * length)
        midpoints.append(point + 0.5 * link)
        point = point + link
    return midpoints, point
