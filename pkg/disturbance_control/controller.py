"""
Low-level controller: target acceleration PD, disturbance-aware stance force
QP, swing-leg PD, torque mapping and a trot gait scheduler.

Legs are ordered FR, FL, RR, RL. Trot swings the diagonal pairs (FR, RL) and
(FL, RR) alternately.
"""

import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np
import scipy.linalg

from disturbance_control.dynamics import DynamicsMatrices, FootGeometry, build_matrices
from disturbance_control.errors import ControllerFault, DimensionError, InvalidArgumentError
from disturbance_control.qp import INFEASIBLE, QpProblem, QpSolver
from disturbance_control.state import (
    NUM_LEGS,
    BodyState,
    DisturbanceParams,
    RobotParams,
    TrajectoryPoint,
    as_matrix,
    as_vector,
    rotation_rpy,
    rotation_z,
    wrap_angle,
)
from disturbance_control.utils import get_logger

STAND = "stand"
TROT = "trot"
GAIT_MODES = (STAND, TROT)
DIAGONAL_PAIRS = ((0, 3), (1, 2))
LEG_SIDES = (-1.0, 1.0, -1.0, 1.0)


@dataclass(frozen=True, eq=False)
class ControllerGains:
    """Diagonal gains of the pose PD, swing PD and QP weights."""

    kp_pose: np.ndarray
    kd_pose: np.ndarray
    kp_swing: np.ndarray
    kd_swing: np.ndarray
    q_weights: np.ndarray
    r_weights: np.ndarray

    def __post_init__(self):
        sizes = {"kp_pose": 6, "kd_pose": 6, "kp_swing": 3, "kd_swing": 3, "q_weights": 6, "r_weights": 12}
        for name, size in sizes.items():
            value = np.asarray(getattr(self, name), dtype=np.float64)
            if value.ndim == 0:
                value = np.full(size, float(value))
            value = as_vector(value, size, name)
            if np.any(value < 0):
                raise InvalidArgumentError(f"{name} must be non-negative")
            object.__setattr__(self, name, value)
        if not np.any(self.q_weights > 0):
            raise InvalidArgumentError("q_weights must not be all zero")

    @classmethod
    def default(cls) -> "ControllerGains":
        return cls(
            kp_pose=[0.0, 0.0, 100.0, 250.0, 250.0, 0.0],
            kd_pose=[10.0] * 6,
            kp_swing=300.0,
            kd_swing=10.0,
            q_weights=[1.0, 1.0, 10.0, 20.0, 20.0, 10.0],
            r_weights=1e-4,
        )

    @classmethod
    def from_config(cls, section: Dict[str, Any]) -> "ControllerGains":
        """Build gains from the controller section of the harness config."""
        return cls(
            kp_pose=section["kp_pose"],
            kd_pose=section["kd_pose"],
            kp_swing=section["kp_swing"],
            kd_swing=section["kd_swing"],
            q_weights=section["q_weights"],
            r_weights=section["r_weight"],
        )


@dataclass(frozen=True, eq=False)
class GaitState:
    """Gait phase, contact schedule and swing foot targets."""

    phase: float
    swing_duration: float
    stance_mask: np.ndarray
    swing_targets: np.ndarray
    mode: str = TROT
    liftoff_positions: Optional[np.ndarray] = None

    def __post_init__(self):
        if not 0.0 <= self.phase < 1.0:
            raise InvalidArgumentError(f"phase must lie in [0, 1), got {self.phase}")
        if self.swing_duration <= 0:
            raise InvalidArgumentError("swing_duration must be positive")
        if self.mode not in GAIT_MODES:
            raise InvalidArgumentError(f"Unknown gait mode: {self.mode}")
        mask = np.array(self.stance_mask, dtype=bool).reshape(-1)
        if mask.shape != (NUM_LEGS,):
            raise DimensionError(f"stance_mask must have {NUM_LEGS} entries")
        if mask.sum() < 2:
            raise InvalidArgumentError("At least two feet must be in stance")
        for a, b in DIAGONAL_PAIRS:
            if mask[a] != mask[b]:
                raise InvalidArgumentError("Diagonal feet must share their contact state")
        mask.setflags(write=False)
        targets = as_matrix(self.swing_targets, (NUM_LEGS, 3), "swing_targets")
        liftoff = targets if self.liftoff_positions is None else self.liftoff_positions
        object.__setattr__(self, "stance_mask", mask)
        object.__setattr__(self, "swing_targets", targets)
        object.__setattr__(self, "liftoff_positions", as_matrix(liftoff, (NUM_LEGS, 3), "liftoff_positions"))
        object.__setattr__(self, "phase", float(self.phase))
        object.__setattr__(self, "swing_duration", float(self.swing_duration))

    @property
    def swing_progress(self) -> float:
        """Fraction of the current swing that has elapsed."""
        return (self.phase % 0.5) / 0.5

    @classmethod
    def initial(cls, params: RobotParams, body: BodyState, mode: str = TROT,
                swing_duration: float = 0.3) -> "GaitState":
        targets = hip_ground_projection(params, body)
        return cls(phase=0.0, swing_duration=swing_duration, stance_mask=schedule_mask(0.0, mode),
                   swing_targets=targets, mode=mode, liftoff_positions=targets)


@dataclass(frozen=True, eq=False)
class LegCommand:
    """Joint torques for all legs and the contact schedule they were computed for."""

    torques: np.ndarray
    stance_mask: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "torques", as_vector(self.torques, 3 * NUM_LEGS, "torques"))
        mask = np.array(self.stance_mask, dtype=bool).reshape(NUM_LEGS)
        mask.setflags(write=False)
        object.__setattr__(self, "stance_mask", mask)


# Leg kinematics. Joint order per leg: abduction, hip, knee. Positions are
# relative to the hip, in the body frame.

def leg_forward_kinematics(joint_angles: Any, leg_lengths: Any, side: float) -> np.ndarray:
    """
    Foot position of one leg relative to its hip.

    Args:
        joint_angles: (abduction, hip, knee) angles
        leg_lengths: (abduction offset, thigh, calf)
        side: +1 for left legs, -1 for right legs

    Returns:
        Foot position in the body frame (3,)
    """
    q1, q2, q3 = joint_angles
    l1, l2, l3 = leg_lengths
    x = -l2 * math.sin(q2) - l3 * math.sin(q2 + q3)
    z = -l2 * math.cos(q2) - l3 * math.cos(q2 + q3)
    y = side * l1
    c1, s1 = math.cos(q1), math.sin(q1)
    return np.array([x, c1 * y - s1 * z, s1 * y + c1 * z])


def leg_inverse_kinematics(foot_position: Any, leg_lengths: Any, side: float) -> np.ndarray:
    """
    Joint angles placing a foot at a position relative to its hip (knee bent backwards).

    Args:
        foot_position: Target relative to the hip, body frame
        leg_lengths: (abduction offset, thigh, calf)
        side: +1 for left legs, -1 for right legs

    Returns:
        (abduction, hip, knee) angles
    """
    px, py, pz = foot_position
    l1, l2, l3 = leg_lengths
    offset = side * l1
    plane = max(py * py + pz * pz - offset * offset, 0.0)
    z_leg = -math.sqrt(plane)
    q1 = wrap_angle(math.atan2(pz, py) - math.atan2(z_leg, offset))
    reach_sq = px * px + z_leg * z_leg
    cos_knee = np.clip((reach_sq - l2 * l2 - l3 * l3) / (2.0 * l2 * l3), -1.0, 1.0)
    q3 = -math.acos(cos_knee)
    q2 = math.atan2(-px, -z_leg) - math.atan2(l3 * math.sin(q3), l2 + l3 * math.cos(q3))
    return np.array([q1, q2, q3])


def leg_jacobian(joint_angles: Any, leg_lengths: Any, side: float) -> np.ndarray:
    """Analytic 3x3 foot Jacobian of one leg in the body frame."""
    q1, q2, q3 = joint_angles
    l1, l2, l3 = leg_lengths
    s2, c2 = math.sin(q2), math.cos(q2)
    s23, c23 = math.sin(q2 + q3), math.cos(q2 + q3)
    c1, s1 = math.cos(q1), math.sin(q1)
    rot = np.array([[1.0, 0.0, 0.0], [0.0, c1, -s1], [0.0, s1, c1]])
    d_rot = np.array([[0.0, 0.0, 0.0], [0.0, -s1, -c1], [0.0, c1, -s1]])
    planar = np.array([-l2 * s2 - l3 * s23, side * l1, -l2 * c2 - l3 * c23])
    jac = np.zeros((3, 3))
    jac[:, 0] = d_rot @ planar
    jac[:, 1] = rot @ np.array([-l2 * c2 - l3 * c23, 0.0, l2 * s2 + l3 * s23])
    jac[:, 2] = rot @ np.array([-l3 * c23, 0.0, l3 * s23])
    return jac


def hip_positions(params: RobotParams, body: BodyState) -> np.ndarray:
    """World positions of the four hips."""
    rotation = rotation_rpy(body.orientation_rpy)
    return body.position + params.hip_offsets @ rotation.T


def hip_ground_projection(params: RobotParams, body: BodyState) -> np.ndarray:
    """Hips projected onto the ground plane, shifted out by the abduction offset."""
    rotation_yaw = rotation_z(body.yaw)
    lateral = np.array([[0.0, side * params.leg_lengths[0], 0.0] for side in LEG_SIDES])
    points = body.position + (params.hip_offsets + lateral) @ rotation_yaw.T
    points[:, 2] = 0.0
    return points


def leg_joint_angles(params: RobotParams, body: BodyState, foot_positions: Any) -> np.ndarray:
    """Joint angles of all legs (12,) from world foot positions."""
    feet = as_matrix(foot_positions, (NUM_LEGS, 3), "foot_positions")
    rotation = rotation_rpy(body.orientation_rpy)
    relative = (feet - body.position) @ rotation - params.hip_offsets
    return np.concatenate([
        leg_inverse_kinematics(relative[leg], params.leg_lengths, LEG_SIDES[leg]) for leg in range(NUM_LEGS)
    ])


def leg_jacobian_matrix(params: RobotParams, body: BodyState, joint_angles: Any) -> np.ndarray:
    """12x12 block-diagonal foot Jacobian, each block rotated into the world frame."""
    angles = as_vector(joint_angles, 3 * NUM_LEGS, "joint_angles")
    rotation = rotation_rpy(body.orientation_rpy)
    blocks = [
        rotation @ leg_jacobian(angles[3 * leg:3 * leg + 3], params.leg_lengths, LEG_SIDES[leg])
        for leg in range(NUM_LEGS)
    ]
    return scipy.linalg.block_diag(*blocks)


# Control laws

def target_acceleration(gains: ControllerGains, desired: TrajectoryPoint, body: BodyState) -> np.ndarray:
    """
    PD target acceleration (linear world, angular heading frame).

    Pose error covers height, roll and pitch. Velocity error covers the heading
    frame (vx, vy, yaw rate) and damps vertical, roll and pitch rates to zero.

    Args:
        gains: Controller gains
        desired: Desired trajectory point
        body: Current trunk state

    Returns:
        q_ddot_d (6,)
    """
    pose_error = np.array([
        0.0,
        0.0,
        desired.desired_height - body.height,
        desired.desired_roll - body.roll,
        desired.desired_pitch - body.pitch,
        0.0,
    ])
    heading_velocity = body.heading_velocity
    omega = body.angular_velocity
    velocity_error = np.array([
        desired.desired_linear_velocity[0] - heading_velocity[0],
        desired.desired_linear_velocity[1] - heading_velocity[1],
        -heading_velocity[2],
        -omega[0],
        -omega[1],
        desired.desired_yaw_rate - omega[2],
    ])
    acceleration = gains.kp_pose * pose_error + gains.kd_pose * velocity_error
    acceleration[:3] = rotation_z(body.yaw) @ acceleration[:3]
    return acceleration


def build_stance_qp(dyn: DynamicsMatrices, qdd_desired: Any, dist: DisturbanceParams,
                    gains: ControllerGains, params: RobotParams,
                    stance_mask: Any) -> Tuple[QpProblem, np.ndarray]:
    """
    Build the force QP over stance-foot variables only.

    Returns:
        Tuple of (QP problem, indices of the 12-vector entries it optimizes)
    """
    qdd = as_vector(qdd_desired, 6, "qdd_desired")
    mask = np.array(stance_mask, dtype=bool).reshape(NUM_LEGS)
    if mask.sum() < 2:
        raise InvalidArgumentError("The stance force QP needs at least two stance feet")
    stance_legs = np.flatnonzero(mask)
    columns = np.concatenate([np.arange(3 * leg, 3 * leg + 3) for leg in stance_legs])

    m_stance = dyn.M[:, columns]
    weight = np.diag(gains.q_weights)
    target = dyn.gravity_vec + qdd - dyn.A @ dist.force - dyn.B @ dist.torque
    hessian = m_stance.T @ weight @ m_stance + np.diag(gains.r_weights[columns])
    hessian = 0.5 * (hessian + hessian.T)
    linear = -m_stance.T @ weight @ target

    mu = params.friction_coefficient
    rows, lower, upper = [], [], []
    for local, _ in enumerate(stance_legs):
        base = 3 * local
        n = 3 * len(stance_legs)

        def row(coeffs: Tuple[float, float, float]) -> np.ndarray:
            r = np.zeros(n)
            r[base:base + 3] = coeffs
            return r

        rows.append(row((0.0, 0.0, 1.0)))
        lower.append(params.min_normal_force)
        upper.append(np.inf)
        if math.isfinite(params.max_normal_force):
            rows.append(row((0.0, 0.0, 1.0)))
            lower.append(-np.inf)
            upper.append(params.max_normal_force)
        for tangential in ((1.0, 0.0), (0.0, 1.0)):
            rows.append(row((tangential[0], tangential[1], -mu)))
            lower.append(-np.inf)
            upper.append(0.0)
            rows.append(row((tangential[0], tangential[1], mu)))
            lower.append(0.0)
            upper.append(np.inf)

    problem = QpProblem(hessian=hessian, linear_term=linear, ineq_matrix=np.array(rows),
                        ineq_lower=np.array(lower), ineq_upper=np.array(upper))
    return problem, columns


def stance_force_qp(dyn: DynamicsMatrices, qdd_desired: Any, dist: DisturbanceParams,
                    gains: ControllerGains, params: RobotParams, stance_mask: Any,
                    solver: Optional[QpSolver] = None, warm_start: Optional[Any] = None) -> np.ndarray:
    """
    Solve the disturbance-aware stance force QP.

    Args:
        dyn: Dynamics matrices for the current stance
        qdd_desired: Target acceleration (6,)
        dist: Estimated disturbance wrench
        gains: Controller gains (Q and R weights)
        params: Robot parameters (friction and normal force bounds)
        stance_mask: Contact flags of the four feet
        solver: Optional solver instance to reuse
        warm_start: Optional previous force vector (12,)

    Returns:
        Foot forces (12,), zero on swing feet
    """
    problem, columns = build_stance_qp(dyn, qdd_desired, dist, gains, params, stance_mask)
    solver = solver or QpSolver()
    x0 = None if warm_start is None else np.asarray(warm_start, dtype=np.float64)[columns]
    solution = solver.solve(problem, x0=x0)
    if solution.status == INFEASIBLE:
        raise ControllerFault("Stance force QP is infeasible", solution=solution)
    forces = np.zeros(3 * NUM_LEGS)
    forces[columns] = solution.x
    return forces


def swing_force(gains: ControllerGains, desired_pos: Any, pos: Any, vel: Any) -> np.ndarray:
    """Swing PD force, damping the absolute foot velocity."""
    return (gains.kp_swing * (as_vector(desired_pos, 3, "desired_pos") - as_vector(pos, 3, "pos"))
            - gains.kd_swing * as_vector(vel, 3, "vel"))


def forces_to_torques(jacobian: Any, f: Any) -> np.ndarray:
    """Joint torques tau = J^T f for the 12x12 leg Jacobian."""
    jac = as_matrix(jacobian, (3 * NUM_LEGS, 3 * NUM_LEGS), "jacobian")
    return jac.T @ as_vector(f, 3 * NUM_LEGS, "f")


# Gait

def schedule_mask(phase: float, mode: str) -> np.ndarray:
    """Stance flags for a gait phase."""
    mask = np.ones(NUM_LEGS, dtype=bool)
    if mode == TROT:
        swinging = DIAGONAL_PAIRS[0] if phase < 0.5 else DIAGONAL_PAIRS[1]
        mask[list(swinging)] = False
    return mask


def gait_step(gait: GaitState, dt: float, desired: TrajectoryPoint, body: BodyState,
              params: RobotParams, foot_positions: Optional[Any] = None) -> GaitState:
    """
    Advance the gait and refresh swing targets with the Raibert heuristic.

    Args:
        gait: Current gait state
        dt: Time step in seconds
        desired: Desired trajectory point (heading frame velocity)
        body: Current trunk state
        params: Robot parameters (hip geometry)
        foot_positions: Current world foot positions, recorded at liftoff

    Returns:
        Updated GaitState
    """
    if dt <= 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    if not isinstance(params, RobotParams):
        raise InvalidArgumentError(f"gait_step needs RobotParams, got {type(params).__name__}")
    phase = (gait.phase + dt / (2.0 * gait.swing_duration)) % 1.0
    mask = schedule_mask(phase, gait.mode)

    stance_duration = gait.swing_duration
    velocity = np.append(desired.desired_linear_velocity, 0.0)
    shift = rotation_z(body.yaw) @ (0.5 * stance_duration * velocity)
    targets = hip_ground_projection(params, body) + shift
    targets[:, 2] = 0.0

    liftoff = np.array(gait.liftoff_positions)
    lifting = gait.stance_mask & ~mask
    if np.any(lifting):
        source = gait.swing_targets if foot_positions is None else as_matrix(foot_positions, (NUM_LEGS, 3),
                                                                             "foot_positions")
        liftoff[lifting] = source[lifting]
    return GaitState(phase=phase, swing_duration=gait.swing_duration, stance_mask=mask,
                     swing_targets=targets, mode=gait.mode, liftoff_positions=liftoff)


def swing_trajectory(gait: GaitState, leg: int, swing_height: float = 0.06) -> np.ndarray:
    """Desired swing foot position: liftoff to target with a sine height bump."""
    progress = gait.swing_progress
    start = gait.liftoff_positions[leg]
    point = start + progress * (gait.swing_targets[leg] - start)
    point[2] += swing_height * math.sin(math.pi * progress)
    return point


class LowLevelController:
    """
    Stateful low-level controller for one robot: gait, QP warm start and the
    last valid stance forces.
    """

    def __init__(self, params: RobotParams, gains: Optional[ControllerGains] = None,
                 swing_duration: float = 0.3, swing_height: float = 0.06,
                 qp_tolerance: float = 1e-8, qp_max_iter: int = 100):
        self.params = params
        self.gains = gains or ControllerGains.default()
        self.swing_duration = swing_duration
        self.swing_height = swing_height
        self.solver = QpSolver(tolerance=qp_tolerance, max_iter=qp_max_iter)
        self.logger = get_logger(self.__class__.__name__)
        self.gait: Optional[GaitState] = None
        self.last_forces = np.zeros(3 * NUM_LEGS)
        self.fault_count = 0

    @classmethod
    def from_config(cls, params: RobotParams, section: Dict[str, Any]) -> "LowLevelController":
        return cls(params, ControllerGains.from_config(section),
                   swing_duration=section["swing_duration"], swing_height=section["swing_height"],
                   qp_tolerance=section["qp_tolerance"], qp_max_iter=section["qp_max_iter"])

    def reset(self, body: BodyState, mode: str = STAND) -> None:
        """Restart the gait in the given mode and drop held forces."""
        self.gait = GaitState.initial(self.params, body, mode=mode, swing_duration=self.swing_duration)
        weight_share = self.params.weight / NUM_LEGS
        self.last_forces = np.tile([0.0, 0.0, weight_share], NUM_LEGS)
        self.fault_count = 0

    def compute(self, body: BodyState, foot_positions: Any, foot_velocities: Any,
                desired: TrajectoryPoint, dist: DisturbanceParams, dt: float) -> LegCommand:
        """
        Run one control period.

        Args:
            body: Current trunk state
            foot_positions: World foot positions (4x3)
            foot_velocities: World foot velocities (4x3)
            desired: Desired trajectory point
            dist: Disturbance wrench estimate
            dt: Control period in seconds

        Returns:
            LegCommand with joint torques and the stance mask used
        """
        if self.gait is None:
            self.reset(body)
        feet = as_matrix(foot_positions, (NUM_LEGS, 3), "foot_positions")
        velocities = as_matrix(foot_velocities, (NUM_LEGS, 3), "foot_velocities")
        self.gait = gait_step(self.gait, dt, desired, body, self.params, feet)
        mask = self.gait.stance_mask

        contact = np.array(feet)
        contact[mask, 2] = 0.0
        dyn = build_matrices(self.params, body, FootGeometry(contact, mask))
        qdd = target_acceleration(self.gains, desired, body)
        try:
            forces = stance_force_qp(dyn, qdd, dist, self.gains, self.params, mask,
                                     solver=self.solver, warm_start=self.last_forces)
            self.last_forces = forces
        except ControllerFault as e:
            self.fault_count += 1
            self.logger.warning(f"{e}; holding last valid stance forces")
            forces = np.array(self.last_forces)
            for leg in np.flatnonzero(~mask):
                forces[3 * leg:3 * leg + 3] = 0.0

        total = np.array(forces)
        for leg in np.flatnonzero(~mask):
            desired_pos = swing_trajectory(self.gait, leg, self.swing_height)
            total[3 * leg:3 * leg + 3] = swing_force(self.gains, desired_pos, feet[leg], velocities[leg])

        jacobian = leg_jacobian_matrix(self.params, body, leg_joint_angles(self.params, body, feet))
        return LegCommand(torques=forces_to_torques(jacobian, total), stance_mask=mask)
