#!/usr/bin/env python3
"""
Configuration validation and sanity checks.
Loads config.json, builds every configured component and runs a short
standing check with the configured robot and controller.
"""

import argparse
import logging
import sys

from disturbance_control.base import TaskSpec, create_task, discover_tasks
from disturbance_control.config import DEFAULT_CONFIG, HarnessConfig
from disturbance_control.errors import ConfigError, DpcError
from disturbance_control.sim import standing_controller_check


def validate_config(path: str):
    """Load and validate the configuration file; returns the config or None."""
    print("=== Validating Configuration ===")
    try:
        config = HarnessConfig.load(path)
    except ConfigError as e:
        print(f"❌ {e}")
        return None

    for section in DEFAULT_CONFIG:
        if isinstance(DEFAULT_CONFIG[section], dict):
            print(f"✅ Section ok: {section}")
    overridden = [key for key, value in config.data.items() if value != DEFAULT_CONFIG[key]]
    if overridden:
        print(f"ℹ️  Differs from defaults: {', '.join(overridden)}")
    print("✅ Configuration validation completed")
    return config


def check_arms(config: HarnessConfig) -> bool:
    """Report the mass and joint count of every catalog arm."""
    print("\n=== Checking Arms ===")
    for name in config.arm_names():
        arm = config.arm_model(name)
        print(f"✅ {name}: {arm.joint_count} joints, {arm.total_mass:.3f} kg")
    return True


def check_tasks(config: HarnessConfig) -> bool:
    """Build every registered task from the configured task settings."""
    print("\n=== Checking Tasks ===")
    ok = True
    for name in sorted(discover_tasks()):
        try:
            create_task(TaskSpec.from_config(name, config.data))
            print(f"✅ Task ok: {name}")
        except DpcError as e:
            print(f"❌ Task {name}: {e}")
            ok = False
    return ok


def check_standing(config: HarnessConfig, duration: float) -> bool:
    """Stand without an arm and report the worst attitude and friction violation."""
    print("\n=== Standing Check ===")
    params = config.robot_params()
    worst = standing_controller_check(params, config.controller(params), duration=duration)
    print(f"   max |roll| {worst['max_abs_roll']:.2e} rad, max |pitch| {worst['max_abs_pitch']:.2e} rad, "
          f"friction violation {worst['max_friction_violation']:.2e}")
    if worst["max_abs_roll"] < 1e-2 and worst["max_abs_pitch"] < 1e-2 and worst["max_friction_violation"] <= 1e-6:
        print("✅ Standing check passed")
        return True
    print("❌ Standing check failed")
    return False


def main():
    """Run configuration validation and sanity checks."""
    parser = argparse.ArgumentParser(description="Validate a harness configuration file")
    parser.add_argument("--config", default="config.json", help="Configuration file")
    parser.add_argument("--duration", type=float, default=1.0, help="Standing check duration in seconds")
    args = parser.parse_args()
    logging.basicConfig(level=logging.WARNING)

    print("Starting configuration validation...")
    config = validate_config(args.config)
    results = {"Configuration Validation": config is not None}
    if config is not None:
        checks = [
            ("Arm Catalog", lambda: check_arms(config)),
            ("Task Construction", lambda: check_tasks(config)),
            ("Standing Check", lambda: check_standing(config, args.duration)),
        ]
        for name, check in checks:
            try:
                results[name] = check()
            except DpcError as e:
                print(f"❌ {name} failed with exception: {e}")
                results[name] = False

    print("\n" + "=" * 50)
    print("CONFIGURATION CHECK SUMMARY")
    print("=" * 50)
    passed = 0
    for name, result in results.items():
        status = "✅ PASSED" if result else "❌ FAILED"
        print(f"{name}: {status}")
        passed += int(result)
    print(f"\nPassed: {passed}/{len(results)}")
    return passed == len(results)


if __name__ == "__main__":
    success = main()
    print(f"\n{'✅ All checks passed!' if success else '❌ Some checks failed.'}")
    sys.exit(0 if success else 1)
