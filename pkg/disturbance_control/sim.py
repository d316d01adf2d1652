"""
Trunk-centric simulator and the environment built on it.

The plant integrates the same linearized trunk dynamics the controller uses,
with the stance forces recovered from the commanded joint torques and the
TRUE arm wrench in place of the estimate. Stance feet are pinned, swing feet
are light point masses driven by their commanded force, and the arm joints
follow their commands through a first-order lag.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.interpolate import CubicSpline
from tqdm import tqdm

from disturbance_control.adapter import AdapterDataset, AdapterModel, AdapterSample, encode, encoder_features
from disturbance_control.arm import ArmModel
from disturbance_control.base import TaskScenario
from disturbance_control.controller import (
    STAND,
    TROT,
    LegCommand,
    LowLevelController,
    hip_ground_projection,
    leg_jacobian_matrix,
    leg_joint_angles,
)
from disturbance_control.dynamics import (
    DynamicsMatrices,
    FootGeometry,
    arm_reaction_wrench,
    body_acceleration,
    build_matrices,
    wrench_at_com,
)
from disturbance_control.errors import InvalidArgumentError
from disturbance_control.estimator import HighLevelPolicy, Observation, reward
from disturbance_control.state import (
    F_MAX,
    GRAVITY,
    NUM_LEGS,
    T_MAX,
    ArmCommand,
    ArmState,
    BodyState,
    DisturbanceParams,
    RobotParams,
    TrajectoryPoint,
    rotation_rpy,
    rotation_z,
    rpy_rate_matrix,
)
from disturbance_control.utils import get_logger, make_rng, write_csv

ANGLE_LIMIT = math.pi / 2 - 1e-3

logger = get_logger("DpcSim")


@dataclass
class SimConfig:
    """Simulation rates, episode length and plant constants."""

    physics_dt: float = 0.001
    lowlevel_period: float = 0.002
    highlevel_period: float = 0.02
    episode_length: float = 10.0
    gravity: float = GRAVITY
    seed: int = 0
    arm_time_constant: float = 0.05
    foot_mass: float = 0.1
    fall_height: float = 0.05
    fall_angle: float = 0.8

    def __post_init__(self):
        if self.physics_dt <= 0 or self.episode_length <= 0:
            raise InvalidArgumentError("physics_dt and episode_length must be positive")
        if self.arm_time_constant <= 0 or self.foot_mass <= 0:
            raise InvalidArgumentError("arm_time_constant and foot_mass must be positive")
        for name in ("lowlevel_period", "highlevel_period"):
            ratio = getattr(self, name) / self.physics_dt
            if ratio < 1 - 1e-9 or abs(ratio - round(ratio)) > 1e-6:
                raise InvalidArgumentError(f"{name} must be an integer multiple of physics_dt")
        ratio = self.highlevel_period / self.lowlevel_period
        if abs(ratio - round(ratio)) > 1e-6:
            raise InvalidArgumentError("highlevel_period must be an integer multiple of lowlevel_period")

    @classmethod
    def from_config(cls, section: Dict[str, Any], seed: int = 0) -> "SimConfig":
        values = {key: section[key] for key in cls.__dataclass_fields__ if key in section}
        values["seed"] = seed
        return cls(**values)

    @property
    def physics_per_lowlevel(self) -> int:
        return int(round(self.lowlevel_period / self.physics_dt))

    @property
    def lowlevel_per_highlevel(self) -> int:
        return int(round(self.highlevel_period / self.lowlevel_period))

    @property
    def highlevel_steps(self) -> int:
        return int(round(self.episode_length / self.highlevel_period))


@dataclass
class SimState:
    """Mutable plant state."""

    body: BodyState
    foot_positions: np.ndarray
    foot_velocities: np.ndarray
    stance_mask: np.ndarray
    arm_angles: np.ndarray
    time: float = 0.0
    fell: bool = False


class Simulator:
    """Trunk-centric plant for one robot with an optional arm."""

    def __init__(self, params: RobotParams, arm_model: Optional[ArmModel] = None,
                 config: Optional[SimConfig] = None):
        self.params = params
        self.arm_model = arm_model
        self.config = config or SimConfig()
        self.logger = get_logger(self.__class__.__name__)
        self.state: Optional[SimState] = None
        self.last_wrench = DisturbanceParams.zero()

    def reset(self, body: Optional[BodyState] = None, arm_angles: Optional[np.ndarray] = None) -> SimState:
        """
        Place the robot standing with its feet under the hips.

        Args:
            body: Initial trunk state (standing at nominal height by default)
            arm_angles: Initial arm joint angles (home pose by default)

        Returns:
            The new SimState
        """
        body = body or BodyState.standing(self.params.nominal_height)
        feet = hip_ground_projection(self.params, body)
        if self.arm_model is None:
            angles = np.zeros(0)
        elif arm_angles is None:
            angles = self.arm_model.home_pose()
        else:
            angles = self.arm_model.clip(arm_angles)
        self.state = SimState(body=body, foot_positions=feet, foot_velocities=np.zeros((NUM_LEGS, 3)),
                              stance_mask=np.ones(NUM_LEGS, dtype=bool), arm_angles=angles)
        self.last_wrench = DisturbanceParams.zero()
        return self.state

    @property
    def arm_state(self) -> ArmState:
        return ArmState(joint_angles=self.state.arm_angles, timestamp=self.state.time)

    def true_wrench(self, tip_force: Optional[np.ndarray] = None, payload_mass: float = 0.0) -> DisturbanceParams:
        """
        Arm wrench at the COM in the body frame for the current state.

        Args:
            tip_force: World-frame external force on the first gripper
            payload_mass: Mass held in each gripper

        Returns:
            DisturbanceParams
        """
        if self.arm_model is None:
            return DisturbanceParams.zero()
        model = self.arm_model.with_payload(payload_mass) if payload_mass > 0 else self.arm_model
        world_force = np.zeros(3) if tip_force is None else np.asarray(tip_force, dtype=np.float64)
        body_force = rotation_rpy(self.state.body.orientation_rpy).T @ world_force
        mount = arm_reaction_wrench(model, self.arm_state, body_force, self.config.gravity)
        return DisturbanceParams.from_vector(wrench_at_com(model, mount))

    def _foot_forces(self, command: LegCommand) -> np.ndarray:
        angles = leg_joint_angles(self.params, self.state.body, self.state.foot_positions)
        jacobian = leg_jacobian_matrix(self.params, self.state.body, angles)
        forces = np.zeros(3 * NUM_LEGS)
        for leg in range(NUM_LEGS):
            block = jacobian[3 * leg:3 * leg + 3, 3 * leg:3 * leg + 3]
            forces[3 * leg:3 * leg + 3] = np.linalg.lstsq(block.T, command.torques[3 * leg:3 * leg + 3],
                                                          rcond=None)[0]
        return forces

    def _dynamics(self, mask: np.ndarray) -> DynamicsMatrices:
        body = self.state.body
        if np.any(mask):
            return build_matrices(self.params, body, FootGeometry(self.state.foot_positions, mask),
                                  self.config.gravity)
        angular_map = rotation_z(body.yaw).T @ np.linalg.inv(self.params.trunk_inertia)
        return DynamicsMatrices(M=np.zeros((6, 3 * NUM_LEGS)),
                                A=np.vstack([np.eye(3) / self.params.mass, np.zeros((3, 3))]),
                                B=np.vstack([np.zeros((3, 3)), angular_map]),
                                gravity_vec=[0.0, 0.0, self.config.gravity, 0.0, 0.0, 0.0])

    def step(self, command: LegCommand, arm_command: Optional[ArmCommand] = None, dt: Optional[float] = None,
             tip_force: Optional[np.ndarray] = None, payload_mass: float = 0.0) -> SimState:
        """
        Advance the plant by one physics step.

        Velocities are updated first and poses move with the average of the old
        and new velocity.

        Args:
            command: Leg joint torques and the stance mask they were computed for
            arm_command: Desired arm joint positions (held if None)
            dt: Step length (physics_dt by default)
            tip_force: World-frame external force on the first gripper
            payload_mass: Mass held in each gripper

        Returns:
            The updated SimState
        """
        if self.state is None:
            self.reset()
        dt = self.config.physics_dt if dt is None else float(dt)
        if dt <= 0:
            raise InvalidArgumentError(f"dt must be positive, got {dt}")
        state = self.state
        mask = np.array(command.stance_mask, dtype=bool)

        # Stance feet are pinned; a foot touching down lands on the ground plane.
        touchdown = mask & ~state.stance_mask
        state.foot_positions[touchdown, 2] = 0.0
        state.foot_velocities[mask] = 0.0
        state.foot_velocities[state.stance_mask & ~mask] = 0.0
        state.stance_mask = mask

        forces = self._foot_forces(command)
        wrench = self.true_wrench(tip_force, payload_mass)
        self.last_wrench = wrench
        stance_forces = np.array(forces)
        for leg in np.flatnonzero(~mask):
            stance_forces[3 * leg:3 * leg + 3] = 0.0
        qdd = body_acceleration(self._dynamics(mask), stance_forces, wrench)

        body = state.body
        velocity = body.linear_velocity + dt * qdd[:3]
        position = body.position + 0.5 * dt * (body.linear_velocity + velocity)
        omega = body.angular_velocity + dt * qdd[3:]
        rpy = body.orientation_rpy + 0.5 * dt * rpy_rate_matrix(body.orientation_rpy) @ (body.angular_velocity + omega)
        if abs(rpy[0]) > ANGLE_LIMIT or abs(rpy[1]) > ANGLE_LIMIT:
            state.fell = True
            rpy[:2] = np.clip(rpy[:2], -ANGLE_LIMIT, ANGLE_LIMIT)
        state.time += dt
        state.body = BodyState(position=position, orientation_rpy=rpy, linear_velocity=velocity,
                               angular_velocity=omega, timestamp=state.time)

        # Swing feet are point masses driven by their commanded forces.
        for leg in np.flatnonzero(~mask):
            accel = forces[3 * leg:3 * leg + 3] / self.config.foot_mass
            old = np.array(state.foot_velocities[leg])
            state.foot_velocities[leg] = old + dt * accel
            state.foot_positions[leg] += 0.5 * dt * (old + state.foot_velocities[leg])
            if state.foot_positions[leg, 2] < 0.0:
                state.foot_positions[leg, 2] = 0.0
                state.foot_velocities[leg, 2] = max(state.foot_velocities[leg, 2], 0.0)

        if self.arm_model is not None and arm_command is not None:
            target = self.arm_model.clip(arm_command.desired_joint_positions)
            # First-order lag toward the clipped target.
            blend = 1.0 - math.exp(-dt / self.config.arm_time_constant)
            state.arm_angles = self.arm_model.clip(state.arm_angles + blend * (target - state.arm_angles))

        if self.has_fallen():
            state.fell = True
        return state

    def has_fallen(self) -> bool:
        """Height or tilt beyond the termination thresholds."""
        body = self.state.body
        return bool(body.height <= self.config.fall_height
                    or abs(body.roll) >= self.config.fall_angle
                    or abs(body.pitch) >= self.config.fall_angle)


class DisturbanceEnv:
    """
    Reset/step interface at the high-level rate over the simulator, the
    low-level controller, the latent adapter and a task scenario.
    """

    def __init__(self, params: RobotParams, arm_model: Optional[ArmModel], task: TaskScenario,
                 controller: LowLevelController, config: Optional[SimConfig] = None,
                 adapter: Optional[AdapterModel] = None, seed: int = 0,
                 action_limits: Tuple[float, float] = (F_MAX, T_MAX)):
        self.params = params
        self.arm_model = arm_model
        self.task = task
        self.controller = controller
        self.config = config or SimConfig(seed=seed)
        self.adapter = adapter
        self.seed = seed
        self.action_limits = action_limits
        self.sim = Simulator(params, arm_model, self.config)
        self.logger = get_logger(self.__class__.__name__)
        self.episode = 0
        self.steps = 0
        self.info: Dict[str, Any] = {}
        self.observation: Optional[Observation] = None
        self.arm_command: Optional[ArmCommand] = None
        if adapter is not None and arm_model is not None:
            expected = 4 + 2 * arm_model.joint_count
            if adapter.encoder.input_size != expected:
                raise InvalidArgumentError(
                    f"Adapter expects {adapter.encoder.input_size} features, arm '{arm_model.name}' gives {expected}"
                )

    def _arm_command(self, t: float) -> ArmCommand:
        return ArmCommand(desired_joint_positions=self.task.arm_target(t))

    def _observe(self) -> Observation:
        body = self.sim.state.body
        latent = None
        if self.adapter is not None:
            arm = self.sim.arm_state if self.arm_model is not None else ArmState(joint_angles=np.zeros(0))
            latent = encode(self.adapter, body, arm, self.arm_command)
        return Observation.build(body, latent)

    def predicted_drp(self) -> np.ndarray:
        """Adapter prediction of the next roll and pitch rates (NaN without an adapter)."""
        if self.adapter is None:
            return np.full(2, np.nan)
        features = encoder_features(self.sim.state.body, self.sim.arm_state, self.arm_command)
        return self.adapter.predict_drp(features)

    def reset(self, seed: Optional[int] = None) -> np.ndarray:
        """
        Start a new episode.

        Args:
            seed: Episode seed; defaults to a stream derived from the env seed and episode count

        Returns:
            Observation vector
        """
        rng = make_rng(self.seed, "episode", self.episode) if seed is None else make_rng(seed)
        self.episode += 1
        self.steps = 0
        self.task.reset(self.arm_model, rng, self.params.nominal_height)
        state = self.sim.reset()
        self.controller.reset(state.body, mode=self.task.gait_mode)
        self.arm_command = self._arm_command(0.0)
        self.observation = self._observe()
        tip = self.task.tip_force(0.0, state.body.yaw)
        self.info = {"true_wrench": self.sim.true_wrench(tip, self.task.payload_mass(0.0)).as_vector(),
                     "fell": False, "truncated": False, "time": 0.0}
        return self.observation.as_vector()

    def step(self, wrench: DisturbanceParams) -> Tuple[np.ndarray, float, bool, Dict[str, Any]]:
        """
        Hold a wrench estimate for one high-level period.

        Args:
            wrench: Disturbance estimate fed to the low-level controller

        Returns:
            Tuple of (observation vector, r_total, done, info)
        """
        if not wrench.within_limits(*self.action_limits):
            raise InvalidArgumentError(
                f"Wrench {wrench.as_vector()} exceeds the action limits {self.action_limits}; use DisturbanceParams.bounded"
            )
        cfg = self.config
        desired = self.task.desired(self.sim.state.time)
        for _ in range(cfg.lowlevel_per_highlevel):
            state = self.sim.state
            desired = self.task.desired(state.time)
            self.arm_command = self._arm_command(state.time)
            command = self.controller.compute(state.body, state.foot_positions, state.foot_velocities,
                                              desired, wrench, cfg.lowlevel_period)
            for _ in range(cfg.physics_per_lowlevel):
                t = self.sim.state.time
                self.sim.step(command, self.arm_command, cfg.physics_dt,
                              tip_force=self.task.tip_force(t, self.sim.state.body.yaw),
                              payload_mass=self.task.payload_mass(t))
                if self.sim.state.fell:
                    break
            if self.sim.state.fell:
                break

        self.steps += 1
        body = self.sim.state.body
        terms = reward(desired, body)
        fell = self.sim.state.fell
        truncated = not fell and self.steps >= cfg.highlevel_steps
        self.observation = self._observe()
        if fell:
            self.logger.warning(f"Episode {self.episode} terminated by a fall at t={self.sim.state.time:.3f}s")
        self.info = {"true_wrench": self.sim.last_wrench.as_vector(), "fell": fell, "truncated": truncated,
                     "time": self.sim.state.time, "r_vel": terms.r_vel, "r_orn": terms.r_orn,
                     "faults": self.controller.fault_count}
        return self.observation.as_vector(), terms.r_total, fell or truncated, self.info


EPISODE_COLUMNS = (
    "time", "roll", "pitch", "roll_rate", "pitch_rate", "vx", "vy", "yaw_rate", "height", "z0", "z1",
    "act_fx", "act_fy", "act_fz", "act_tx", "act_ty", "act_tz",
    "true_fx", "true_fy", "true_fz", "true_tx", "true_ty", "true_tz",
    "r_vel", "r_orn", "r_total", "pred_roll_rate", "pred_pitch_rate",
)


@dataclass
class EpisodeLog:
    """Per high-level step record of one closed-loop rollout."""

    task: str
    arm: str
    policy: str
    seed: int
    rows: List[List[float]] = field(default_factory=list)
    total_return: float = 0.0
    fell: bool = False

    @property
    def steps(self) -> int:
        return len(self.rows)

    @property
    def file_name(self) -> str:
        return f"{self.task}_{self.arm}_{self.policy}_{self.seed}.csv"

    def column(self, name: str) -> np.ndarray:
        index = EPISODE_COLUMNS.index(name)
        return np.array([row[index] for row in self.rows])

    def summary(self) -> Dict[str, Any]:
        return {"task": self.task, "arm": self.arm, "policy": self.policy, "seed": self.seed,
                "return": self.total_return, "fell": self.fell, "steps": self.steps}

    def save_csv(self, path: str) -> int:
        return write_csv(path, EPISODE_COLUMNS, self.rows)


def run_episode(env: DisturbanceEnv, policy: HighLevelPolicy, seed: int = 0, arm_name: str = "none",
                max_steps: Optional[int] = None) -> EpisodeLog:
    """
    Closed-loop rollout of one episode.

    Args:
        env: Environment (task, arm, controller and adapter already wired)
        policy: High-level policy
        seed: Episode seed
        arm_name: Arm label for the log
        max_steps: Optional cap on high-level steps

    Returns:
        EpisodeLog with one row per high-level step
    """
    log = EpisodeLog(task=env.task.name, arm=arm_name, policy=policy.name, seed=seed)
    env.reset(seed=seed)
    limit = env.config.highlevel_steps if max_steps is None else min(max_steps, env.config.highlevel_steps)
    for _ in range(limit):
        obs = env.observation
        action = policy.act(obs, env.info)
        predicted = env.predicted_drp()
        _, r_total, done, info = env.step(action)
        body = env.sim.state.body
        heading = body.heading_velocity
        log.rows.append([
            info["time"], body.roll, body.pitch, body.angular_velocity[0], body.angular_velocity[1],
            heading[0], heading[1], body.angular_velocity[2], body.height, *obs.latent.tolist(),
            *action.as_vector().tolist(), *info["true_wrench"].tolist(),
            info["r_vel"], info["r_orn"], r_total, *predicted.tolist(),
        ])
        log.total_return += r_total
        if done:
            log.fell = bool(info["fell"])
            break
    return log


class RandomMotion:
    """Random velocity commands and a smooth random arm spline for data collection."""

    def __init__(self, arm_model: Optional[ArmModel], rng: np.random.Generator, duration: float,
                 nominal_height: float, command_period: float = 1.0, max_speed: float = 0.3,
                 max_yaw_rate: float = 0.3):
        self.rng = rng
        self.command_period = command_period
        segments = int(math.ceil(duration / command_period)) + 1
        self.commands = [
            TrajectoryPoint(desired_linear_velocity=rng.uniform(-max_speed, max_speed, 2),
                            desired_yaw_rate=rng.uniform(-max_yaw_rate, max_yaw_rate),
                            desired_height=nominal_height)
            for _ in range(segments)
        ]
        self.arm_model = arm_model
        self.spline: Optional[CubicSpline] = None
        if arm_model is not None:
            knots = [arm_model.home_pose()] + [arm_model.random_pose(rng) for _ in range(segments)]
            times = np.arange(len(knots)) * command_period
            self.spline = CubicSpline(times, np.array(knots), bc_type="clamped")

    def desired(self, t: float) -> TrajectoryPoint:
        return self.commands[min(int(t // self.command_period), len(self.commands) - 1)]

    def arm_target(self, t: float) -> np.ndarray:
        if self.spline is None:
            return np.zeros(0)
        return self.arm_model.clip(self.spline(t))


def collect_random_motion(arm_model: Optional[ArmModel], n_samples: int, seed: int = 0,
                          params: Optional[RobotParams] = None, controller: Optional[LowLevelController] = None,
                          config: Optional[SimConfig] = None, progress: bool = True) -> AdapterDataset:
    """
    Collect forward-model samples from random robot and arm motion.

    The robot trots under random heading-frame velocity commands resampled
    every second while the arm tracks a random spline. One sample is emitted
    per low-level period. Falls and the end of each trajectory restart the
    robot under a new trajectory id.

    Args:
        arm_model: Arm carried by the robot (None for no arm)
        n_samples: Number of samples
        seed: Random seed
        params: Robot parameters
        controller: Low-level controller (default gains if None)
        config: Simulation config
        progress: Show a progress bar

    Returns:
        AdapterDataset in collection order
    """
    if n_samples < 1:
        raise InvalidArgumentError(f"n_samples must be at least 1, got {n_samples}")
    params = params or RobotParams.default()
    config = config or SimConfig(seed=seed)
    controller = controller or LowLevelController(params)
    sim = Simulator(params, arm_model, config)
    joint_count = 0 if arm_model is None else arm_model.joint_count

    samples: List[AdapterSample] = []
    trajectory_ids: List[int] = []
    trajectory = -1
    motion: Optional[RandomMotion] = None
    bar = tqdm(total=n_samples, desc=f"collect {arm_model.name if arm_model else 'none'}",
               leave=False, disable=not progress)
    while len(samples) < n_samples:
        if motion is None or sim.state.fell or sim.state.time >= config.episode_length:
            if motion is not None and sim.state.fell:
                logger.warning(f"Trajectory {trajectory} fell at t={sim.state.time:.3f}s; restarting")
            trajectory += 1
            rng = make_rng(seed, "collect", trajectory)
            motion = RandomMotion(arm_model, rng, config.episode_length, params.nominal_height)
            state = sim.reset()
            controller.reset(state.body, mode=TROT)

        state = sim.state
        desired = motion.desired(state.time)
        arm_cmd = ArmCommand(desired_joint_positions=motion.arm_target(state.time))
        arm = ArmState(joint_angles=state.arm_angles, timestamp=state.time)
        body = state.body
        command = controller.compute(state.body, state.foot_positions, state.foot_velocities, desired,
                                     DisturbanceParams.zero(), config.lowlevel_period)
        for _ in range(config.physics_per_lowlevel):
            sim.step(command, arm_cmd, config.physics_dt)
            if sim.state.fell:
                break
        if sim.state.fell:
            continue
        samples.append(AdapterSample(body=body, arm=arm, arm_cmd=arm_cmd, next_drp=sim.state.body.drp))
        trajectory_ids.append(trajectory)
        bar.update(1)
    bar.close()
    logger.info(f"Collected {n_samples} samples over {trajectory + 1} trajectories")
    return AdapterDataset.from_samples(samples, trajectory_ids, joint_count=joint_count)


def standing_controller_check(params: RobotParams, controller: LowLevelController, duration: float,
                              config: Optional[SimConfig] = None) -> Dict[str, float]:
    """
    Stand with no arm and report the worst tilt and friction violation.

    Args:
        params: Robot parameters
        controller: Low-level controller
        duration: Seconds to simulate
        config: Simulation config

    Returns:
        Dictionary with max_abs_roll, max_abs_pitch and max_friction_violation
    """
    config = config or SimConfig()
    sim = Simulator(params, None, config)
    state = sim.reset()
    controller.reset(state.body, mode=STAND)
    desired = TrajectoryPoint(desired_height=params.nominal_height)
    mu = params.friction_coefficient
    worst = {"max_abs_roll": 0.0, "max_abs_pitch": 0.0, "max_friction_violation": 0.0}
    steps = int(round(duration / config.lowlevel_period))
    for _ in range(steps):
        state = sim.state
        command = controller.compute(state.body, state.foot_positions, state.foot_velocities, desired,
                                     DisturbanceParams.zero(), config.lowlevel_period)
        forces = np.reshape(controller.last_forces, (NUM_LEGS, 3))
        violation = np.maximum(np.abs(forces[:, :2]) - mu * forces[:, 2:3], 0.0).max()
        worst["max_friction_violation"] = max(worst["max_friction_violation"], float(violation))
        for _ in range(config.physics_per_lowlevel):
            sim.step(command, None, config.physics_dt)
        body = sim.state.body
        worst["max_abs_roll"] = max(worst["max_abs_roll"], abs(body.roll))
        worst["max_abs_pitch"] = max(worst["max_abs_pitch"], abs(body.pitch))
        if sim.state.fell:
            break
    return worst
