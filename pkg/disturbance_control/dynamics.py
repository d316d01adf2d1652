"""
Linearized rigid-body dynamics of the trunk with an arm disturbance wrench.

    q_ddot = M f - g_tilde + A f_a + B tau_a

q_ddot is ordered (linear xyz, angular xyz). Arm mass never enters m or I_B;
it acts on the trunk only through the disturbance wrench.
"""

from dataclasses import dataclass
from typing import Any

import numpy as np

from disturbance_control.arm import ArmModel, forward_kinematics
from disturbance_control.errors import DimensionError, InvalidArgumentError, NoStanceError, ParameterError
from disturbance_control.state import (
    GRAVITY,
    NUM_LEGS,
    ArmState,
    BodyState,
    DisturbanceParams,
    RobotParams,
    as_matrix,
    as_vector,
    rotation_z,
    skew,
)

GROUND_TOLERANCE = 0.02


@dataclass(frozen=True, eq=False)
class FootGeometry:
    """World-frame foot positions and which feet carry ground force."""

    foot_positions: np.ndarray
    stance_mask: np.ndarray
    ground_height: float = 0.0

    def __post_init__(self):
        positions = as_matrix(self.foot_positions, (NUM_LEGS, 3), "foot_positions")
        mask = np.array(self.stance_mask, dtype=bool).reshape(-1)
        if mask.shape != (NUM_LEGS,):
            raise DimensionError(f"stance_mask must have {NUM_LEGS} entries")
        for leg in np.flatnonzero(mask):
            if abs(positions[leg, 2] - self.ground_height) > GROUND_TOLERANCE:
                raise InvalidArgumentError(
                    f"Stance foot {leg} is {positions[leg, 2]:.3f} m from the ground plane"
                )
        mask.setflags(write=False)
        object.__setattr__(self, "foot_positions", positions)
        object.__setattr__(self, "stance_mask", mask)


@dataclass(frozen=True, eq=False)
class DynamicsMatrices:
    """M (6x12), A (6x3), B (6x3) and the gravity vector g_tilde."""

    M: np.ndarray
    A: np.ndarray
    B: np.ndarray
    gravity_vec: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "M", as_matrix(self.M, (6, 3 * NUM_LEGS), "M"))
        object.__setattr__(self, "A", as_matrix(self.A, (6, 3), "A"))
        object.__setattr__(self, "B", as_matrix(self.B, (6, 3), "B"))
        object.__setattr__(self, "gravity_vec", as_vector(self.gravity_vec, 6, "gravity_vec"))


def build_matrices(params: RobotParams, body: BodyState, feet: FootGeometry,
                   gravity: float = GRAVITY) -> DynamicsMatrices:
    """
    Build the dynamics matrices for the current stance.

    Args:
        params: Trunk parameters
        body: Current trunk state (COM at the trunk position)
        feet: Foot positions and stance mask
        gravity: Gravitational acceleration magnitude

    Returns:
        DynamicsMatrices with swing-foot columns zeroed
    """
    if not np.any(feet.stance_mask):
        raise NoStanceError("At least one foot must be in stance")
    try:
        inertia_inv = np.linalg.inv(params.trunk_inertia)
    except np.linalg.LinAlgError as e:
        raise ParameterError(f"Trunk inertia is singular: {e}") from e

    angular_map = rotation_z(body.yaw).T @ inertia_inv
    m_matrix = np.zeros((6, 3 * NUM_LEGS))
    for leg in range(NUM_LEGS):
        if not feet.stance_mask[leg]:
            continue
        r = feet.foot_positions[leg] - body.position
        cols = slice(3 * leg, 3 * leg + 3)
        m_matrix[:3, cols] = np.eye(3) / params.mass
        m_matrix[3:, cols] = angular_map @ skew(r)

    a_matrix = np.vstack([np.eye(3) / params.mass, np.zeros((3, 3))])
    b_matrix = np.vstack([np.zeros((3, 3)), angular_map])
    gravity_vec = np.array([0.0, 0.0, gravity, 0.0, 0.0, 0.0])
    return DynamicsMatrices(M=m_matrix, A=a_matrix, B=b_matrix, gravity_vec=gravity_vec)


def body_acceleration(dyn: DynamicsMatrices, f: Any, dist: DisturbanceParams) -> np.ndarray:
    """
    Evaluate q_ddot = M f - g_tilde + A f_a + B tau_a.

    Args:
        dyn: Dynamics matrices
        f: Stacked foot forces (12,), zero on swing feet
        dist: Disturbance wrench

    Returns:
        Generalized acceleration (6,)
    """
    forces = np.asarray(f, dtype=np.float64).reshape(-1)
    if forces.shape != (3 * NUM_LEGS,):
        raise DimensionError(f"Foot force vector must have {3 * NUM_LEGS} entries, got {forces.size}")
    return dyn.M @ forces - dyn.gravity_vec + dyn.A @ dist.force + dyn.B @ dist.torque


def arm_reaction_wrench(arm_model: ArmModel, arm_state: ArmState, external_tip_force: Any,
                        gravity: float = GRAVITY) -> np.ndarray:
    """
    Quasi-static wrench the arm(s) exert on the trunk at the mount reference point.

    The external tip force acts on the gripper of the first arm. Torques are
    taken about ``arm_model.mount_offset`` and expressed in the body frame.

    Args:
        arm_model: Arm description
        arm_state: Current joint angles (all arms)
        external_tip_force: Force applied at the gripper (3,)
        gravity: Gravitational acceleration magnitude

    Returns:
        Wrench (force, torque) as a 6-vector
    """
    tip_force = as_vector(external_tip_force, 3, "external_tip_force")
    if not arm_model.within_limits(arm_state.joint_angles):
        raise InvalidArgumentError("Arm joint angles are outside the joint limits")
    g_vec = np.array([0.0, 0.0, -gravity])
    reference = arm_model.mount_offset
    force = np.zeros(3)
    torque = np.zeros(3)
    arms = zip(arm_model.split(arm_state.joint_angles), arm_model.mount_points())
    for index, (angles, mount) in enumerate(arms):
        midpoints, tip = forward_kinematics(arm_model, angles, mount)
        point_masses = list(zip(midpoints, arm_model.link_masses)) + [(tip, arm_model.gripper_mass)]
        for point, mass in point_masses:
            weight = mass * g_vec
            force += weight
            torque += np.cross(point - reference, weight)
        if index == 0:
            force += tip_force
            torque += np.cross(tip - reference, tip_force)
    return np.concatenate([force, torque])


def wrench_at_com(arm_model: ArmModel, mount_wrench: Any) -> np.ndarray:
    """Re-reference a mount wrench to the trunk COM (body origin)."""
    wrench = as_vector(mount_wrench, 6, "mount_wrench")
    force = wrench[:3]
    torque = wrench[3:] + np.cross(arm_model.mount_offset, force)
    return np.concatenate([force, torque])
