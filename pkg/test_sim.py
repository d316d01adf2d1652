#!/usr/bin/env python3
"""
Tests for the simulator, the environment, the task scenarios and data
collection.
"""

import logging
import math
import sys

import numpy as np

from disturbance_control.arm import ArmModel
from disturbance_control.base import ForcePulseSchedule, TaskSpec, create_task, discover_tasks
from disturbance_control.config import DEFAULT_CONFIG
from disturbance_control.controller import LegCommand, LowLevelController
from disturbance_control.errors import ConfigError, InvalidArgumentError
from disturbance_control.estimator import MbcPolicy, OraclePolicy
from disturbance_control.sim import (
    EPISODE_COLUMNS,
    DisturbanceEnv,
    SimConfig,
    Simulator,
    collect_random_motion,
    run_episode,
    standing_controller_check,
)
from disturbance_control.state import GRAVITY, ArmCommand, BodyState, DisturbanceParams, RobotParams
from disturbance_control.tasks.standing import StandingTask


def _arm(name: str = "regular") -> ArmModel:
    return ArmModel.from_dict(name, DEFAULT_CONFIG["arms"][name])


def _idle(stance: bool) -> LegCommand:
    return LegCommand(torques=np.zeros(12), stance_mask=[stance] * 4)


def _moving_body(height: float = 0.28) -> BodyState:
    return BodyState(position=[0.0, 0.0, height], orientation_rpy=np.zeros(3),
                     linear_velocity=[0.5, 0.0, 1.0], angular_velocity=np.zeros(3))


def test_sim_config_rates():
    """Test that periods must be integer multiples of each other."""
    print("\n=== Testing SimConfig ===")
    config = SimConfig()
    assert (config.physics_per_lowlevel, config.lowlevel_per_highlevel, config.highlevel_steps) == (2, 10, 500)
    for bad in (dict(lowlevel_period=0.0025), dict(highlevel_period=0.005), dict(physics_dt=0.0)):
        try:
            SimConfig(**bad)
            raise AssertionError(f"accepted {bad}")
        except InvalidArgumentError:
            pass
    print("✅ 1 ms physics, 2 ms low level, 20 ms high level")


def test_zero_gravity_rest():
    """Test that nothing moves without gravity, torques or velocity."""
    print("\n=== Testing zero gravity ===")
    sim = Simulator(RobotParams.default(), None, SimConfig(gravity=0.0))
    start = sim.reset()
    position = start.body.position.copy()
    feet = start.foot_positions.copy()
    for _ in range(200):
        sim.step(_idle(stance=True))
    assert np.allclose(sim.state.body.position, position)
    assert np.allclose(sim.state.body.linear_velocity, 0.0)
    assert np.array_equal(sim.state.foot_positions, feet)
    print("✅ State is constant")


def test_free_fall():
    """Test the closed-form ballistic height and exact energy conservation."""
    print("\n=== Testing free fall ===")
    sim = Simulator(RobotParams.default(), None, SimConfig())
    sim.reset(BodyState.standing(0.28))
    for _ in range(100):
        sim.step(_idle(stance=False))
    t = sim.state.time
    assert abs(t - 0.1) < 1e-12
    assert abs(sim.state.body.height - (0.28 - 0.5 * GRAVITY * t * t)) < 1e-9
    assert abs(sim.state.body.linear_velocity[2] + GRAVITY * t) < 1e-9

    sim.reset(_moving_body())

    def energy() -> float:
        body = sim.state.body
        return 0.5 * float(body.linear_velocity @ body.linear_velocity) + GRAVITY * body.height

    initial = energy()
    for _ in range(150):
        sim.step(_idle(stance=False))
    assert abs(energy() - initial) < 1e-9, (energy(), initial)
    print(f"✅ Height after {t:.2f}s: {sim.state.body.height:.4f}; energy drift below 1e-9")


def test_fall_detection():
    """Test the height and tilt thresholds."""
    print("\n=== Testing fall detection ===")
    sim = Simulator(RobotParams.default(), None, SimConfig())
    sim.reset(BodyState.standing(0.04))
    assert sim.has_fallen()
    for angle, fallen in ((0.85, True), (0.5, False)):
        sim.reset(BodyState(position=[0, 0, 0.28], orientation_rpy=[angle, 0.0, 0.0],
                            linear_velocity=np.zeros(3), angular_velocity=np.zeros(3)))
        assert sim.has_fallen() == fallen
        sim.reset(BodyState(position=[0, 0, 0.28], orientation_rpy=[0.0, -angle, 0.0],
                            linear_velocity=np.zeros(3), angular_velocity=np.zeros(3)))
        assert sim.has_fallen() == fallen
    print("✅ Falls flagged at height 0.05 m and tilt 0.8 rad")


def test_standing_keeps_feet_and_level():
    """Test that the standing controller pins feet and keeps the trunk level."""
    print("\n=== Testing standing controller ===")
    params = RobotParams.default()
    worst = standing_controller_check(params, LowLevelController(params), duration=0.5)
    assert worst["max_abs_roll"] < 1e-2 and worst["max_abs_pitch"] < 1e-2, worst
    assert worst["max_friction_violation"] <= 1e-6, worst

    controller = LowLevelController(params)
    sim = Simulator(params, None, SimConfig())
    state = sim.reset()
    controller.reset(state.body)
    feet = state.foot_positions.copy()
    env_desired = create_task(TaskSpec("standing")).desired(0.0)
    for _ in range(50):
        command = controller.compute(sim.state.body, sim.state.foot_positions, sim.state.foot_velocities,
                                     env_desired, DisturbanceParams.zero(), 0.002)
        sim.step(command)
        sim.step(command)
    assert np.array_equal(sim.state.foot_positions, feet)
    print(f"✅ Max |roll| {worst['max_abs_roll']:.2e}, max |pitch| {worst['max_abs_pitch']:.2e}, feet pinned")


def test_arm_wrench_and_lag():
    """Test the true wrench of a folded arm and the first-order joint lag."""
    print("\n=== Testing arm plant ===")
    arm = _arm()
    sim = Simulator(RobotParams.default(), arm, SimConfig())
    sim.reset()
    wrench = sim.true_wrench()
    assert abs(wrench.force[2] + arm.total_mass * GRAVITY) < 1e-9
    assert np.allclose(wrench.force[:2], 0.0)
    heavier = sim.true_wrench(payload_mass=0.3)
    assert abs(heavier.force[2] - wrench.force[2] + 0.3 * GRAVITY) < 1e-9

    assert np.allclose(Simulator(RobotParams.default(), None).true_wrench().as_vector(), 0.0)

    start = sim.state.arm_angles.copy()
    target = start.copy()
    target[0] += 0.1
    sim.step(_idle(stance=True), ArmCommand(desired_joint_positions=target), 0.001)
    expected = start[0] + (1.0 - math.exp(-0.001 / 0.05)) * 0.1
    assert abs(sim.state.arm_angles[0] - expected) < 1e-12
    print(f"✅ Arm weight {-wrench.force[2]:.3f} N, lag step {sim.state.arm_angles[0] - start[0]:.5f} rad")


def test_task_registry():
    """Test that every scenario is discovered and unknown names are refused."""
    print("\n=== Testing task registry ===")
    tasks = discover_tasks()
    assert {"standing", "reaching", "pushing", "carrying"} <= set(tasks)
    try:
        create_task(TaskSpec("dancing"))
        raise AssertionError("unknown task accepted")
    except ConfigError:
        pass
    try:
        create_task(TaskSpec("carrying", parameters={"ball_count": 0}))
        raise AssertionError("zero balls accepted")
    except ConfigError:
        pass

    carrying = create_task(TaskSpec("carrying", parameters={"payload_mass": 0.3, "ball_count": 2}))
    carrying.reset(_arm(), np.random.default_rng(0), 0.28)
    assert carrying.payload_mass(0.5) == 0.0
    assert abs(carrying.payload_mass(1.5) - 0.3) < 1e-12
    assert abs(carrying.payload_mass(10.0) - 0.6) < 1e-12

    pushing = create_task(TaskSpec("pushing", parameters={"push_force": 15.0}))
    pushing.reset(_arm(), np.random.default_rng(0), 0.28)
    assert np.allclose(pushing.tip_force(0.0, 0.0), 0.0)
    assert np.allclose(pushing.tip_force(1.0, 0.0), [-15.0, 0.0, 0.0])
    print(f"✅ Registered: {', '.join(sorted(tasks))}")


def test_force_pulses():
    """Test pulse magnitude bounds and determinism."""
    print("\n=== Testing force pulses ===")
    forces = []
    for _ in range(2):
        schedule = ForcePulseSchedule(max_force=20.0, duration=0.5, mean_interval=2.0)
        schedule.reset(np.random.default_rng(3))
        forces.append(np.array([schedule.force(t) for t in np.arange(0.0, 20.0, 0.01)]))
    assert np.array_equal(forces[0], forces[1])
    norms = np.linalg.norm(forces[0], axis=1)
    assert norms.max() <= 20.0 and np.any(norms > 0.0)
    assert np.allclose(forces[0][:, 2], 0.0)
    print(f"✅ Pulses active {np.mean(norms > 0):.0%} of the time, max {norms.max():.2f} N")


def test_episode_rollout():
    """Test a short closed-loop rollout with the baseline and the oracle."""
    print("\n=== Testing episode rollout ===")
    params = RobotParams.default()
    arm = _arm()
    config = SimConfig(episode_length=0.1)
    for policy in (MbcPolicy(), OraclePolicy()):
        task = create_task(TaskSpec("standing"))
        env = DisturbanceEnv(params, arm, task, LowLevelController(params), config, seed=0)
        log = run_episode(env, policy, seed=0, arm_name="regular")
        assert log.steps == 5 and not log.fell
        assert all(len(row) == len(EPISODE_COLUMNS) for row in log.rows)
        assert 0.0 < log.total_return <= 5 * 0.34 + 1e-9
        assert np.allclose(log.column("true_fz"), -arm.total_mass * GRAVITY, atol=0.5)
        assert log.file_name == f"standing_regular_{policy.name}_0.csv"
    print("✅ Five high-level steps logged for both policies")


class _LateralPushStanding(StandingTask):
    """Standing with a constant 10 N sideways force on the gripper."""

    name = "lateral_push_standing"

    def tip_force(self, t: float, yaw: float) -> np.ndarray:
        return np.array([0.0, 10.0, 0.0])


def test_oracle_compensates_tip_force():
    """Test that the true wrench cuts roll and pitch error to a fifth of the baseline's."""
    print("\n=== Testing oracle compensation ===")
    params = RobotParams.default()
    arm = _arm()
    config = SimConfig(episode_length=5.0)
    rms = {}
    for policy in (MbcPolicy(), OraclePolicy()):
        task = _LateralPushStanding(TaskSpec("standing"))
        env = DisturbanceEnv(params, arm, task, LowLevelController(params), config, seed=0)
        log = run_episode(env, policy, seed=0, arm_name="regular")
        assert not log.fell, policy.name
        tilt = np.concatenate([log.column("roll"), log.column("pitch")])
        rms[policy.name] = float(np.sqrt(np.mean(tilt ** 2)))
    assert rms["mbc"] > 0.0
    assert rms["oracle"] <= 0.2 * rms["mbc"], rms
    print(f"✅ RMS roll+pitch: mbc {rms['mbc']:.2e}, oracle {rms['oracle']:.2e}")


def test_step_rejects_unbounded_wrench():
    """Test that the environment refuses a wrench outside the action limits."""
    print("\n=== Testing action limits at the environment ===")
    params = RobotParams.default()
    task = create_task(TaskSpec("standing"))
    env = DisturbanceEnv(params, _arm(), task, LowLevelController(params), SimConfig(episode_length=0.1), seed=0)
    env.reset()
    for wrench in ([40.0, 0.0, 0.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0, -10.5, 0.0]):
        try:
            env.step(DisturbanceParams.from_vector(wrench))
            raise AssertionError(f"accepted {wrench}")
        except InvalidArgumentError:
            pass
    assert env.steps == 0
    _, _, _, info = env.step(DisturbanceParams.bounded([40.0, 0.0, 0.0, 0.0, -10.5, 0.0], 30.0, 10.0))
    assert env.steps == 1 and not info["fell"]

    narrow = DisturbanceEnv(params, _arm(), create_task(TaskSpec("standing")), LowLevelController(params),
                            SimConfig(episode_length=0.1), seed=0, action_limits=(5.0, 1.0))
    narrow.reset()
    try:
        narrow.step(DisturbanceParams.from_vector([6.0, 0.0, 0.0, 0.0, 0.0, 0.0]))
        raise AssertionError("accepted 6 N with a 5 N limit")
    except InvalidArgumentError:
        pass
    print("✅ Out-of-range wrenches raise, bounded() wrenches pass")


def test_collection_is_seeded():
    """Test that random-motion collection is reproducible."""
    print("\n=== Testing data collection ===")
    arm = _arm()
    a = collect_random_motion(arm, 40, seed=0, progress=False)
    b = collect_random_motion(arm, 40, seed=0, progress=False)
    assert a.inputs.shape == (40, 4 + 2 * arm.joint_count)
    assert np.array_equal(a.inputs, b.inputs) and np.array_equal(a.targets, b.targets)
    c = collect_random_motion(arm, 40, seed=1, progress=False)
    assert not np.array_equal(a.inputs, c.inputs)
    print("✅ Same seed, same samples")


def main():
    """Run all tests."""
    logging.basicConfig(level=logging.WARNING)

    tests = [
        ("SimConfig rates", test_sim_config_rates),
        ("Zero gravity", test_zero_gravity_rest),
        ("Free fall", test_free_fall),
        ("Fall detection", test_fall_detection),
        ("Standing controller", test_standing_keeps_feet_and_level),
        ("Arm plant", test_arm_wrench_and_lag),
        ("Task registry", test_task_registry),
        ("Force pulses", test_force_pulses),
        ("Episode rollout", test_episode_rollout),
        ("Oracle compensation", test_oracle_compensates_tip_force),
        ("Action limits", test_step_rejects_unbounded_wrench),
        ("Data collection", test_collection_is_seeded),
    ]

    results = []
    for name, test_func in tests:
        try:
            test_func()
            results.append((name, True))
        except Exception as e:
            print(f"❌ {name} failed: {e}")
            results.append((name, False))

    print("\n" + "=" * 50)
    print("TEST SUMMARY")
    print("=" * 50)
    passed = sum(1 for _, ok in results if ok)
    for name, ok in results:
        status = "✅ PASSED" if ok else "❌ FAILED"
        print(f"{name}: {status}")
    print(f"\nPassed: {passed}/{len(results)}")
    return 0 if passed == len(results) else 1


if __name__ == "__main__":
    sys.exit(main())
