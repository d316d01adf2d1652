#!/usr/bin/env python3
"""
Tests for the configuration layer and the command line harness.
"""

import json
import logging
import math
import os
import sys
import tempfile

from disturbance_control.base import ExperimentManager
from disturbance_control.config import DEFAULT_CONFIG, HarnessConfig
from disturbance_control.errors import ConfigError
from disturbance_control.utils import PACKAGE_LOGGER, get_logger, read_csv
from dpc_harness import EXIT_CONFIG, EXIT_MISSING, EXIT_OK, main

# Small networks and short episodes keep the end-to-end run quick.
FAST_CONFIG = {
    "log_level": "WARNING",
    "sim": {"episode_length": 0.1},
    "sac": {"hidden_sizes": [16, 16], "batch_size": 8},
    "adapter": {"hidden_sizes": [16, 16], "epochs": 1},
    "compare": {"seeds": 1},
}


def _write_config(directory: str, data: dict, name: str = "config.json") -> str:
    path = os.path.join(directory, name)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(data, f)
    return path


def _expect_config_error(data) -> None:
    try:
        HarnessConfig(data)
        raise AssertionError(f"accepted {data}")
    except ConfigError:
        pass


def test_defaults_and_merge():
    """Test defaults, partial overrides and typed views."""
    print("\n=== Testing configuration merge ===")
    config = HarnessConfig.load(None)
    assert config.to_dict() == DEFAULT_CONFIG
    assert config.arm_names() == ["double", "heavier", "longer", "regular"]
    assert config.arm_model("none") is None
    assert config.arm_model("double").joint_count == 8

    merged = HarnessConfig({"sac": {"gamma": 0.9}, "seed": 7.0})
    assert merged.sac_config().gamma == 0.9
    assert merged.sac_config().polyak == DEFAULT_CONFIG["sac"]["polyak"]
    assert merged.seed == 7 and isinstance(merged.data["seed"], int)

    unbounded = HarnessConfig({"robot": {"max_normal_force": None}})
    assert math.isinf(unbounded.robot_params().max_normal_force)

    custom = dict(DEFAULT_CONFIG["arms"]["regular"], gripper_mass=0.2)
    extended = HarnessConfig({"arms": {"custom": custom}})
    assert "custom" in extended.arm_names()
    assert extended.arm_model("custom").gripper_mass == 0.2
    print("✅ Overrides merge into the documented defaults")


def test_invalid_configs():
    """Test that bad keys, types and values raise ConfigError."""
    print("\n=== Testing configuration validation ===")
    _expect_config_error({"robot": {"colour": "red"}})
    _expect_config_error({"seed": "zero"})
    _expect_config_error({"seed": 1.5})
    _expect_config_error({"log_level": "LOUD"})
    _expect_config_error({"sim": {"lowlevel_period": 0.0025}})
    _expect_config_error({"robot": {"mass": -1.0}})
    _expect_config_error({"arms": {"tiny": {"gripper_mass": 0.1}}})
    _expect_config_error({"arms": {"none": DEFAULT_CONFIG["arms"]["regular"]}})
    _expect_config_error({"compare": {"workers": 0}})
    _expect_config_error([1, 2, 3])
    try:
        HarnessConfig({}).arm_model("tentacle")
        raise AssertionError("unknown arm accepted")
    except ConfigError:
        pass

    with tempfile.TemporaryDirectory() as tmp:
        bad = os.path.join(tmp, "bad.json")
        with open(bad, "w", encoding="utf-8") as f:
            f.write("{not json")
        for path in (bad, os.path.join(tmp, "absent.json")):
            try:
                HarnessConfig.load(path)
                raise AssertionError(f"loaded {path}")
            except ConfigError:
                pass
    print("✅ Invalid configurations rejected")


def test_logging_handlers_not_duplicated():
    """Test that repeated managers keep one file and one console handler on the package logger."""
    print("\n=== Testing logging setup ===")
    package_logger = logging.getLogger(PACKAGE_LOGGER)
    with tempfile.TemporaryDirectory() as tmp:
        first = os.path.join(tmp, "first")
        second = os.path.join(tmp, "second")
        for directory in (first, first, second):
            ExperimentManager(dict(DEFAULT_CONFIG, output_directory=directory, log_level="INFO"))
        installed = [h for h in package_logger.handlers if getattr(h, "_dpc_handler", False)]
        assert len(installed) == 2, installed
        assert not any(getattr(h, "_dpc_handler", False) for h in logging.getLogger().handlers)

        get_logger("QpSolver").warning("solver marker line")
        with open(os.path.join(second, "dpc.log"), encoding="utf-8") as f:
            lines = [line for line in f if "solver marker line" in line]
        assert len(lines) == 1 and "disturbance_control.QpSolver" in lines[0], lines
        with open(os.path.join(first, "dpc.log"), encoding="utf-8") as f:
            assert "solver marker line" not in f.read()
    print("✅ Module loggers reach the current log file exactly once")


def test_exit_codes():
    """Test the documented exit codes."""
    print("\n=== Testing exit codes ===")
    with tempfile.TemporaryDirectory() as tmp:
        good = _write_config(tmp, dict(FAST_CONFIG, output_directory=os.path.join(tmp, "out")))
        bad = _write_config(tmp, {"robot": {"colour": "red"}}, name="bad.json")
        assert main(["--config", good, "list-tasks"]) == EXIT_OK
        assert main(["--config", bad, "list-tasks"]) == EXIT_CONFIG
        assert main(["--config", good, "train-adapter", "--dataset", os.path.join(tmp, "none.csv")]) == EXIT_MISSING
        assert main(["--config", good, "eval", "--task", "standing", "--policy", "dpc"]) == EXIT_MISSING
        assert main(["--config", good, "eval", "--task", "dancing"]) == EXIT_CONFIG
        assert main(["--config", good, "compare", "--agent", os.path.join(tmp, "missing.dpcnn"),
                     "--tasks", "standing", "--arms", "regular"]) == EXIT_MISSING
    print("✅ 0 ok, 2 configuration, 3 missing artifact")


def test_pipeline_end_to_end():
    """Test collect, train-adapter, migrate, train-policy, eval and compare on tiny budgets."""
    print("\n=== Testing pipeline ===")
    with tempfile.TemporaryDirectory() as tmp:
        out = os.path.join(tmp, "out")
        config = _write_config(tmp, dict(FAST_CONFIG, output_directory=out))

        def run(*argv: str) -> int:
            return main(["--config", config, *argv])

        assert run("collect", "--arm", "regular", "--samples", "60") == EXIT_OK
        dataset = os.path.join(out, "data", "regular_60_0.csv")
        header, rows = read_csv(dataset)
        assert len(rows) == 60 and header[-2:] == ["next_roll_rate", "next_pitch_rate"]

        with open(os.path.join(out, "config_used.json"), encoding="utf-8") as f:
            echoed = json.load(f)
        assert echoed["sim"]["episode_length"] == 0.1 and echoed["seed"] == 0

        assert run("train-adapter", "--dataset", dataset) == EXIT_OK
        adapter = os.path.join(out, "adapter_regular_60_0.dpcnn")
        assert os.path.exists(adapter) and os.path.exists(os.path.join(out, "adapter_regular_60_0_loss.csv"))

        assert run("collect", "--arm", "heavier", "--samples", "40") == EXIT_OK
        heavier_data = os.path.join(out, "data", "heavier_40_0.csv")
        assert run("migrate", "--dataset", heavier_data, "--adapter", adapter, "--budget", "30") == EXIT_OK
        migrated = os.path.join(out, "adapter_heavier_40_0_migrated.dpcnn")
        assert os.path.exists(migrated)

        assert run("train-policy", "--adapter", adapter, "--steps", "5") == EXIT_OK
        agent = os.path.join(out, "agent.dpcnn")
        _, curve = read_csv(os.path.join(out, "training_curve.csv"))
        assert os.path.exists(agent) and len(curve) == 1

        assert run("eval", "--task", "standing", "--policy", "dpc", "--agent", agent,
                   "--adapter", adapter) == EXIT_OK
        summary_path = os.path.join(out, "eval", "standing_regular_dpc_0_summary.json")
        with open(summary_path, encoding="utf-8") as f:
            summary = json.load(f)
        assert summary["steps"] == 5 and summary["policy"] == "dpc"
        assert len(summary["run_id"]) == 36

        assert run("compare", "--agent", agent, "--adapters", f"heavier={migrated}",
                   "--tasks", "standing", "--arms", "heavier") == EXIT_OK
        _, table = read_csv(os.path.join(out, "compare", "summary.csv"))
        assert sorted(row[2] for row in table) == ["dpc", "mbc"]
        assert len(os.listdir(os.path.join(out, "compare", "episodes"))) == 2
    print("✅ Every command produced its artifacts")


def main_tests():
    """Run all tests."""
    logging.basicConfig(level=logging.WARNING)

    tests = [
        ("Configuration merge", test_defaults_and_merge),
        ("Configuration validation", test_invalid_configs),
        ("Logging setup", test_logging_handlers_not_duplicated),
        ("Exit codes", test_exit_codes),
        ("Pipeline", test_pipeline_end_to_end),
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
    sys.exit(main_tests())
