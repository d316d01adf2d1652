#!/usr/bin/env python3
"""
Tests for the low-level controller: PD targets, stance force QP, swing PD,
torque mapping, leg kinematics and the gait scheduler.
"""

import dataclasses
import logging
import sys

import numpy as np

from disturbance_control.controller import (
    STAND,
    TROT,
    ControllerGains,
    GaitState,
    LowLevelController,
    forces_to_torques,
    gait_step,
    hip_ground_projection,
    leg_forward_kinematics,
    leg_inverse_kinematics,
    leg_jacobian,
    schedule_mask,
    stance_force_qp,
    swing_force,
    swing_trajectory,
    target_acceleration,
)
from disturbance_control.dynamics import FootGeometry, build_matrices
from disturbance_control.errors import ControllerFault, InvalidArgumentError
from disturbance_control.state import GRAVITY, BodyState, DisturbanceParams, RobotParams, TrajectoryPoint


def _standing_problem(params: RobotParams):
    body = BodyState.standing(params.nominal_height)
    feet = hip_ground_projection(params, body)
    dyn = build_matrices(params, body, FootGeometry(foot_positions=feet, stance_mask=[True] * 4))
    return body, feet, dyn


def test_target_acceleration():
    """Test the pose and velocity PD."""
    print("\n=== Testing target acceleration ===")
    gains = ControllerGains.default()
    desired = TrajectoryPoint(desired_height=0.28)
    at_rest = BodyState.standing(0.28)
    assert np.allclose(target_acceleration(gains, desired, at_rest), 0.0)

    high = BodyState.standing(0.38)
    qdd = target_acceleration(gains, desired, high)
    assert abs(qdd[2] - (-0.1 * gains.kp_pose[2])) < 1e-9, qdd
    assert np.allclose(np.delete(qdd, 2), 0.0)

    moving = BodyState(position=[0, 0, 0.28], orientation_rpy=np.zeros(3),
                       linear_velocity=[0.5, 0, 0], angular_velocity=np.zeros(3))
    qdd = target_acceleration(gains, desired, moving)
    assert abs(qdd[0] - (-0.5 * gains.kd_pose[0])) < 1e-9
    print("✅ Target acceleration is proportional to the errors")


def test_swing_force_and_torques():
    """Test the swing PD and the transpose Jacobian map."""
    print("\n=== Testing swing force and torque map ===")
    gains = ControllerGains.default()
    force = swing_force(gains, [0.1, 0.0, 0.0], np.zeros(3), np.zeros(3))
    assert np.allclose(force, [30.0, 0.0, 0.0])
    force = swing_force(gains, np.zeros(3), np.zeros(3), [0.0, 0.0, 1.0])
    assert np.allclose(force, [0.0, 0.0, -10.0])

    f = np.arange(12, dtype=float)
    assert np.allclose(forces_to_torques(np.eye(12), f), f)
    jac = np.diag(np.full(12, 2.0))
    assert np.allclose(forces_to_torques(jac, f), 2.0 * f)
    print("✅ Swing PD and torque mapping match their formulas")


def test_standing_force_qp():
    """Test that a level standing robot shares its weight evenly."""
    print("\n=== Testing standing force QP ===")
    params = RobotParams.default()
    _, _, dyn = _standing_problem(params)
    forces = stance_force_qp(dyn, np.zeros(6), DisturbanceParams.zero(), ControllerGains.default(),
                             params, [True] * 4)
    normal = forces.reshape(4, 3)[:, 2]
    quarter = params.mass * GRAVITY / 4.0
    assert np.allclose(normal, quarter, rtol=1e-2), normal
    assert np.max(np.abs(forces.reshape(4, 3)[:, :2])) < 1e-3
    print(f"✅ Normal forces {np.round(normal, 3)} (quarter weight {quarter:.3f})")


def test_disturbance_shifts_forces():
    """Test that a known downward arm force is carried by the feet."""
    print("\n=== Testing disturbance-aware QP ===")
    params = RobotParams.default()
    _, _, dyn = _standing_problem(params)
    gains = ControllerGains.default()
    extra = DisturbanceParams(force=[0.0, 0.0, -20.0], torque=np.zeros(3))
    base = stance_force_qp(dyn, np.zeros(6), DisturbanceParams.zero(), gains, params, [True] * 4)
    loaded = stance_force_qp(dyn, np.zeros(6), extra, gains, params, [True] * 4)
    added = loaded.reshape(4, 3)[:, 2].sum() - base.reshape(4, 3)[:, 2].sum()
    assert abs(added - 20.0) < 0.5, added
    print(f"✅ Feet carry an extra {added:.2f} N")


def test_friction_and_bounds():
    """Test friction cone and normal force bounds on a sideways target."""
    print("\n=== Testing friction cone ===")
    params = RobotParams.default()
    _, _, dyn = _standing_problem(params)
    qdd = np.array([20.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    forces = stance_force_qp(dyn, qdd, DisturbanceParams.zero(), ControllerGains.default(),
                             params, [True] * 4).reshape(4, 3)
    mu = params.friction_coefficient
    assert np.all(np.abs(forces[:, 0]) <= mu * forces[:, 2] + 1e-6)
    assert np.all(np.abs(forces[:, 1]) <= mu * forces[:, 2] + 1e-6)
    assert np.all(forces[:, 2] >= params.min_normal_force - 1e-6)
    assert np.all(forces[:, 2] <= params.max_normal_force + 1e-6)
    print("✅ Forces stay inside the friction pyramid")


def test_infeasible_bounds_fault():
    """Test that crossed normal force bounds raise and the controller holds forces."""
    print("\n=== Testing controller fault ===")
    params = dataclasses.replace(RobotParams.default(), min_normal_force=50.0, max_normal_force=10.0)
    _, feet, dyn = _standing_problem(params)
    try:
        stance_force_qp(dyn, np.zeros(6), DisturbanceParams.zero(), ControllerGains.default(),
                        params, [True] * 4)
        raise AssertionError("infeasible QP did not raise")
    except ControllerFault as e:
        assert e.solution is not None

    controller = LowLevelController(params)
    body = BodyState.standing(params.nominal_height)
    controller.reset(body, mode=STAND)
    held = np.array(controller.last_forces)
    controller.compute(body, feet, np.zeros((4, 3)), TrajectoryPoint(), DisturbanceParams.zero(), 0.002)
    assert controller.fault_count == 1
    assert np.allclose(controller.last_forces, held)
    print("✅ Fault raised and last valid forces held")


def test_leg_kinematics():
    """Test IK against FK and the Jacobian against finite differences."""
    print("\n=== Testing leg kinematics ===")
    lengths = RobotParams.default().leg_lengths
    for side in (-1.0, 1.0):
        for angles in ([0.1, 0.7, -1.4], [-0.2, 0.3, -0.9]):
            foot = leg_forward_kinematics(angles, lengths, side)
            recovered = leg_inverse_kinematics(foot, lengths, side)
            assert np.allclose(recovered, angles, atol=1e-9), (recovered, angles)

            jac = leg_jacobian(angles, lengths, side)
            eps = 1e-6
            for j in range(3):
                step = np.array(angles, dtype=float)
                step[j] += eps
                numeric = (leg_forward_kinematics(step, lengths, side) - foot) / eps
                assert np.allclose(jac[:, j], numeric, atol=1e-5)
    print("✅ IK inverts FK and the Jacobian matches finite differences")


def test_gait_schedule():
    """Test trot phase flips and the stand schedule."""
    print("\n=== Testing gait schedule ===")
    assert list(schedule_mask(0.49, TROT)) == [False, True, True, False]
    assert list(schedule_mask(0.5, TROT)) == [True, False, False, True]
    assert list(schedule_mask(0.7, STAND)) == [True] * 4

    params = RobotParams.default()
    body = BodyState.standing(params.nominal_height)
    gait = GaitState.initial(params, body, mode=TROT, swing_duration=0.3)
    desired = TrajectoryPoint(desired_linear_velocity=[0.2, 0.0])
    for _ in range(151):
        gait = gait_step(gait, 0.002, desired, body, params)
    assert 0.5 < gait.phase < 0.51
    assert list(gait.stance_mask) == [True, False, False, True]
    # Raibert shift: half the stance duration times the desired speed.
    assert np.allclose(gait.swing_targets[:, 0] - hip_ground_projection(params, body)[:, 0], 0.5 * 0.3 * 0.2)

    apex = GaitState(phase=0.25, swing_duration=0.3, stance_mask=schedule_mask(0.25, TROT),
                     swing_targets=gait.swing_targets, mode=TROT)
    point = swing_trajectory(apex, 0, swing_height=0.06)
    assert abs(point[2] - 0.06) < 1e-9

    try:
        gait_step(gait, 0.002, desired, body)
        raise AssertionError("gait_step ran without robot parameters")
    except TypeError:
        pass
    try:
        gait_step(gait, 0.002, desired, body, None)
        raise AssertionError("gait_step accepted None for robot parameters")
    except InvalidArgumentError:
        pass
    print("✅ Trot alternates diagonal pairs and plans Raibert footholds")


def main():
    """Run all tests."""
    logging.basicConfig(level=logging.WARNING)

    tests = [
        ("Target acceleration", test_target_acceleration),
        ("Swing force and torques", test_swing_force_and_torques),
        ("Standing force QP", test_standing_force_qp),
        ("Disturbance-aware QP", test_disturbance_shifts_forces),
        ("Friction cone", test_friction_and_bounds),
        ("Infeasible bounds fault", test_infeasible_bounds_fault),
        ("Leg kinematics", test_leg_kinematics),
        ("Gait schedule", test_gait_schedule),
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
