#!/usr/bin/env python3
"""
Example script comparing the model-based baseline with a controller that
knows the true arm wrench.
"""

import argparse
import logging
import sys

from disturbance_control.base import discover_tasks
from disturbance_control.config import HarnessConfig
from disturbance_control.errors import DpcError
from disturbance_control.estimator import MbcPolicy, OraclePolicy
from disturbance_control.sim import run_episode
from dpc_harness import build_env


def show_available_tasks(config: HarnessConfig):
    """Show all registered tasks and catalog arms."""
    print("\n=== Available Tasks ===\n")
    for idx, (name, cls) in enumerate(sorted(discover_tasks().items()), 1):
        print(f"{idx}. {name}")
        print(f"   - Description: {cls.description}")
    print("\n=== Available Arms ===\n")
    for name in config.arm_names():
        arm = config.arm_model(name)
        print(f"- {name}: {arm.joint_count} joints, {arm.total_mass:.2f} kg")
    print()


def compare_baseline_and_oracle(config: HarnessConfig, task: str, arm: str, seeds: int):
    """Run the baseline and the oracle on the same seeds and print their returns."""
    sac = config.sac_config()
    policies = [MbcPolicy(), OraclePolicy(sac.f_max, sac.t_max)]
    print(f"\n=== {task} with arm '{arm}' ===\n")
    for seed in range(seeds):
        line = [f"seed {seed}:"]
        for policy in policies:
            env = build_env(config, task, arm, None, seed, disturbance=False)
            log = run_episode(env, policy, seed=seed, arm_name=arm)
            fell = " (fell)" if log.fell else ""
            line.append(f"{policy.name} {log.total_return:.3f}{fell}")
        print("  ".join(line))
    print("\nThe oracle feeds the true arm wrench to the controller; the gap to the")
    print("baseline is what a learned disturbance estimator can recover.")


def main():
    """Main entry point for the example script."""
    parser = argparse.ArgumentParser(description="Baseline vs oracle disturbance compensation")
    parser.add_argument("--config", default=None, help="Configuration file (defaults when omitted)")
    parser.add_argument("--task", default="carrying", help="Task name")
    parser.add_argument("--arm", default="heavier", help="Arm name")
    parser.add_argument("--seeds", type=int, default=2, help="Number of seeds")
    parser.add_argument("--duration", type=float, default=3.0, help="Episode length in seconds")
    parser.add_argument("--list", action="store_true", help="List tasks and arms")
    args = parser.parse_args()

    logging.basicConfig(level=logging.WARNING)
    try:
        config = HarnessConfig.load(args.config)
        config.data["sim"]["episode_length"] = args.duration
        if args.list:
            show_available_tasks(config)
            return 0
        compare_baseline_and_oracle(config, args.task, args.arm, args.seeds)
    except DpcError as e:
        print(f"❌ {e}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
