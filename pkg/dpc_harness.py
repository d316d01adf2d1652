#!/usr/bin/env python3
"""
Main module for the disturbance predictive control pipeline.

This module wires data collection, adapter training, encoder migration,
policy training, evaluation and the MBC/DPC comparison behind one command
line. Every command writes its outputs and the effective configuration into
the output directory and can be reproduced from (config file, seed) alone.
"""

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from disturbance_control.adapter import (
    AdapterDataset,
    AdapterModel,
    load_adapter,
    migrate_encoder,
    save_adapter,
    train_adapter,
)
from disturbance_control.base import ExperimentManager, TaskSpec, create_task
from disturbance_control.config import NO_ARM, HarnessConfig
from disturbance_control.errors import ConfigError, DpcError, InvalidArgumentError, MissingArtifactError
from disturbance_control.estimator import (
    DpcPolicy,
    HighLevelPolicy,
    MbcPolicy,
    OraclePolicy,
    SacAgent,
    run_bandit_gate,
    train_policy,
)
from disturbance_control.sim import EPISODE_COLUMNS, DisturbanceEnv, EpisodeLog, collect_random_motion, run_episode
from disturbance_control.utils import (
    file_digest,
    format_table,
    generate_run_id,
    get_logger,
    mean_and_std,
    write_csv,
    write_json,
)

logger = get_logger("DpcHarness")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MISSING = 3
EXIT_FAULT = 4

POLICIES = ("mbc", "dpc", "oracle")
COMPARE_COLUMNS = ("task", "arm", "policy", "seeds", "mean_return", "std_return", "falls")
CURVE_COLUMNS = ("step", "reward_mean", "alpha", "critic1_loss", "critic2_loss", "actor_loss", "alpha_loss",
                 "eval_return")


def build_env(config: HarnessConfig, task_name: str, arm_name: str, adapter: Optional[AdapterModel],
              seed: int, disturbance: Optional[bool] = None) -> DisturbanceEnv:
    """
    Wire simulator, controller, adapter and task into an environment.

    Args:
        config: Harness configuration
        task_name: Registered task name
        arm_name: Arm catalog name or "none"
        adapter: Latent adapter for the arm (None gives a zero latent)
        seed: Environment seed
        disturbance: Overrides disturbance.enabled when given

    Returns:
        DisturbanceEnv
    """
    spec = TaskSpec.from_config(task_name, config.data)
    if disturbance is not None:
        spec.disturbance["enabled"] = disturbance
    params = config.robot_params()
    sac = config.sac_config()
    return DisturbanceEnv(params, config.arm_model(arm_name), create_task(spec), config.controller(params),
                          config.sim_config(seed), adapter=adapter, seed=seed,
                          action_limits=(sac.f_max, sac.t_max))


def make_policy(config: HarnessConfig, name: str, agent: Optional[SacAgent]) -> HighLevelPolicy:
    sac = config.sac_config()
    if name == "mbc":
        return MbcPolicy()
    if name == "oracle":
        return OraclePolicy(sac.f_max, sac.t_max)
    if name == "dpc":
        if agent is None:
            raise MissingArtifactError("The dpc policy needs an agent checkpoint (--agent)")
        return DpcPolicy(agent)
    raise ConfigError(f"Unknown policy '{name}'. Available: {', '.join(POLICIES)}")


def _load_agent(config: HarnessConfig, path: Optional[str]) -> Optional[SacAgent]:
    if path is None:
        return None
    return SacAgent.load(path, config.sac_config(), seed=config.seed)


def _compare_episode(job: Dict[str, Any]) -> Tuple[Dict[str, Any], List[List[float]]]:
    """Run one comparison episode; top-level so worker processes can pickle it."""
    config = HarnessConfig(job["config"])
    adapter = load_adapter(job["adapter"], job["arm"]) if job["adapter"] else None
    agent = _load_agent(config, job["agent"]) if job["policy"] == "dpc" else None
    env = build_env(config, job["task"], job["arm"], adapter, job["seed"], disturbance=False)
    log = run_episode(env, make_policy(config, job["policy"], agent), seed=job["seed"], arm_name=job["arm"])
    return log.summary(), log.rows


class DpcHarness:
    """Command implementations sharing one configuration and experiment manager."""

    def __init__(self, config: HarnessConfig, manager: ExperimentManager):
        self.config = config
        self.manager = manager
        self.logger = get_logger(self.__class__.__name__)

    @property
    def seed(self) -> int:
        return self.config.seed

    def cmd_collect(self, arm: str, samples: int, output: Optional[str] = None) -> str:
        """
        Collect random-motion samples for one arm.

        Args:
            arm: Arm catalog name
            samples: Number of samples
            output: Dataset CSV path

        Returns:
            Path of the written dataset
        """
        if samples < 1:
            raise InvalidArgumentError(f"--samples must be at least 1, got {samples}")
        arm_model = self.config.arm_model(arm)
        params = self.config.robot_params()
        dataset = collect_random_motion(arm_model, samples, seed=self.seed, params=params,
                                        controller=self.config.controller(params),
                                        config=self.config.sim_config(self.seed))
        path = output or self.manager.output_path("data", f"{arm}_{samples}_{self.seed}.csv")
        count = dataset.save_csv(path)
        variance = dataset.target_variance()
        self.logger.info(f"Wrote {count} samples to {path}")
        print(f"Collected {count} samples for arm '{arm}' -> {path}")
        print(f"next_drp variance: {variance:.6e}")
        print(f"sha256: {file_digest(path)}")
        return path

    def _write_history(self, name: str, history: List[Dict[str, float]]) -> str:
        path = self.manager.output_path(f"{name}_loss.csv")
        write_csv(path, ("epoch", "train_mse", "holdout_mse"),
                  ([h["epoch"], h["train_mse"], h["holdout_mse"]] for h in history))
        return path

    def cmd_train_adapter(self, dataset_path: str, epochs: Optional[int] = None) -> str:
        """Train encoder and decoder on a collected dataset; returns the checkpoint path."""
        dataset = AdapterDataset.load_csv(dataset_path)
        section = self.config.section("adapter")
        name = os.path.splitext(os.path.basename(dataset_path))[0]
        result = train_adapter(dataset, epochs=epochs or section["epochs"], learning_rate=section["learning_rate"],
                               batch_size=section["batch_size"], seed=self.seed,
                               hidden_sizes=section["hidden_sizes"], holdout_fraction=section["holdout_fraction"],
                               arm_name=name)
        path = self.manager.output_path(f"adapter_{name}.dpcnn")
        save_adapter(result.model, path)
        curve = self._write_history(f"adapter_{name}", result.history)
        print(f"Adapter checkpoint: {path}")
        print(f"Loss curve: {curve}")
        print(f"Held-out MSE {result.holdout_mse:.6e} vs mean-predictor {result.baseline_variance:.6e}")
        return path

    def cmd_migrate(self, dataset_path: str, adapter_path: str, budget: Optional[int] = None,
                    epochs: Optional[int] = None) -> str:
        """Train a new encoder against the frozen decoder of an existing adapter."""
        source = load_adapter(adapter_path)
        digest = source.decoder_digest()
        dataset = AdapterDataset.load_csv(dataset_path)
        section = self.config.section("adapter")
        name = os.path.splitext(os.path.basename(dataset_path))[0]
        result = migrate_encoder(source.decoder, dataset, budget=budget or section["migration_budget"],
                                 epochs=epochs or section["epochs"], learning_rate=section["learning_rate"],
                                 batch_size=section["batch_size"], seed=self.seed,
                                 hidden_sizes=section["hidden_sizes"], holdout_fraction=section["holdout_fraction"],
                                 arm_name=name)
        if result.model.decoder_digest() != digest:
            raise DpcError("Decoder digest changed during migration")
        path = self.manager.output_path(f"adapter_{name}_migrated.dpcnn")
        save_adapter(result.model, path)
        curve = self._write_history(f"migrate_{name}", result.history)
        print(f"Migrated adapter: {path} ({result.samples_used} samples)")
        print(f"Loss curve: {curve}")
        print(f"Held-out MSE {result.holdout_mse:.6e}; decoder digest {digest[:16]} unchanged")
        return path

    def cmd_train_policy(self, adapter_path: Optional[str], steps: int, arm: str = "regular",
                         bandit: bool = False) -> str:
        """
        Train the SAC estimator on the reaching task, or run the bandit gate.

        Args:
            adapter_path: Latent adapter checkpoint for the training arm
            steps: Environment steps
            arm: Arm carried during training
            bandit: Run the synthetic bandit gate instead

        Returns:
            Path of the agent checkpoint (or bandit curve)
        """
        sac = self.config.sac_config()
        if bandit:
            result = run_bandit_gate(sac, updates=steps if steps > 0 else 5000, seed=self.seed)
            path = self.manager.output_path("bandit_curve.csv")
            write_csv(path, ("update", "distance", "alpha", "critic1_loss", "actor_loss"),
                      ([c["update"], c["distance"], c["alpha"], c["critic1_loss"], c["actor_loss"]]
                       for c in result.curve))
            print(f"Bandit gate distance {result.distance:.4f} (normalized); curve: {path}")
            if not result.passed:
                raise DpcError(f"SAC bandit gate failed: distance {result.distance:.4f} > 0.1")
            print("✅ SAC bandit gate passed")
            return path

        if adapter_path is None:
            raise MissingArtifactError("train-policy needs --adapter")
        adapter = load_adapter(adapter_path, arm)
        env = build_env(self.config, "reaching", arm, adapter, self.seed)
        eval_env = build_env(self.config, "reaching", arm, adapter, self.seed + 1)
        agent = SacAgent(sac, seed=self.seed)

        def evaluate(current: SacAgent) -> float:
            log = run_episode(eval_env, DpcPolicy(current), seed=self.seed + 1, arm_name=arm)
            self.logger.info(f"Evaluation return {log.total_return:.3f} over {log.steps} steps")
            return log.total_return

        def on_episode(stats: Dict[str, float]) -> None:
            self.logger.debug(f"Episode ended at step {int(stats['step'])}: return {stats['return']:.3f}")

        curve = train_policy(env, agent, steps, seed=self.seed, on_episode=on_episode,
                             log_every=max(1, min(steps, 5000)), evaluate=evaluate) if steps > 0 else []
        path = self.manager.output_path("agent.dpcnn")
        agent.save(path)
        curve_path = self.manager.output_path("training_curve.csv")
        write_csv(curve_path, CURVE_COLUMNS, ([entry[c] for c in CURVE_COLUMNS] for entry in curve))
        print(f"Agent checkpoint: {path}")
        print(f"Training curve: {curve_path}")
        return path

    def cmd_eval(self, task: str, arm: str, policy: str, adapter_path: Optional[str] = None,
                 agent_path: Optional[str] = None) -> EpisodeLog:
        """Run one episode and write its step log and summary."""
        adapter = load_adapter(adapter_path, arm) if adapter_path else None
        if policy == "dpc" and agent_path is None:
            raise MissingArtifactError("The dpc policy needs --agent")
        agent = _load_agent(self.config, agent_path) if policy == "dpc" else None
        env = build_env(self.config, task, arm, adapter, self.seed, disturbance=False)
        log = run_episode(env, make_policy(self.config, policy, agent), seed=self.seed, arm_name=arm)
        path = self.manager.output_path("eval", log.file_name)
        log.save_csv(path)
        summary = log.summary()
        summary["run_id"] = generate_run_id("eval", task, arm, policy, self.seed)
        write_json(path.replace(".csv", "_summary.json"), summary)
        status = "fell" if log.fell else "completed"
        print(f"{task}/{arm}/{policy} seed {self.seed}: return {log.total_return:.3f} "
              f"over {log.steps} steps ({status}) -> {path}")
        return log

    def cmd_compare(self, agent_path: str, adapters: Dict[str, str], tasks: List[str], arms: List[str],
                    seeds: Optional[int] = None) -> List[List[Any]]:
        """
        Mean return of MBC and DPC per (task, arm) over several seeds.

        Args:
            agent_path: Trained agent checkpoint
            adapters: Adapter checkpoint per arm name
            tasks: Task names
            arms: Arm names
            seeds: Number of seeds (config compare.seeds by default)

        Returns:
            Summary rows
        """
        for task in tasks:
            if task not in self.manager.tasks:
                raise ConfigError(f"Unknown task '{task}'. Available: {', '.join(self.manager.task_names())}")
        for arm in arms:
            self.config.arm_model(arm)
        if not os.path.exists(agent_path):
            raise MissingArtifactError(f"Agent checkpoint not found: {agent_path}")
        for arm in arms:
            if arm != NO_ARM and arm not in adapters:
                raise MissingArtifactError(f"No adapter checkpoint given for arm '{arm}'")
            if arm in adapters and not os.path.exists(adapters[arm]):
                raise MissingArtifactError(f"Adapter checkpoint not found: {adapters[arm]}")

        count = seeds or self.config.section("compare")["seeds"]
        seed_list = [self.seed + k for k in range(count)]
        jobs = [{"config": self.config.to_dict(), "task": task, "arm": arm, "policy": policy, "seed": seed,
                 "adapter": adapters.get(arm), "agent": agent_path}
                for task in tasks for arm in arms for policy in ("mbc", "dpc") for seed in seed_list]
        workers = self.config.section("compare")["workers"]
        self.logger.info(f"Running {len(jobs)} episodes on {workers} worker(s)")
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(tqdm(pool.map(_compare_episode, jobs), total=len(jobs), desc="compare"))
        else:
            results = [_compare_episode(job) for job in tqdm(jobs, desc="compare", leave=False)]

        episode_dir = self.manager.output_path("compare", "episodes", "")
        returns: Dict[Tuple[str, str, str], List[float]] = {}
        falls: Dict[Tuple[str, str, str], int] = {}
        latents: Dict[str, List[np.ndarray]] = {}
        z_columns = [EPISODE_COLUMNS.index("z0"), EPISODE_COLUMNS.index("z1")]
        for job, (summary, rows) in zip(jobs, results):
            key = (job["task"], job["arm"], job["policy"])
            returns.setdefault(key, []).append(summary["return"])
            falls[key] = falls.get(key, 0) + int(summary["fell"])
            name = f"{job['task']}_{job['arm']}_{job['policy']}_{job['seed']}.csv"
            write_csv(os.path.join(episode_dir, name), EPISODE_COLUMNS, rows)
            if rows:
                latents.setdefault(job["arm"], []).append(np.array(rows)[:, z_columns])

        table = []
        for (task, arm, policy), values in returns.items():
            mean, std, n = mean_and_std(values)
            table.append([task, arm, policy, n, mean, std, falls[(task, arm, policy)]])
        path = self.manager.output_path("compare", "summary.csv")
        write_csv(path, COMPARE_COLUMNS, table)
        print(format_table(COMPARE_COLUMNS, table))
        for arm, blocks in latents.items():
            stacked = np.vstack(blocks)
            print(f"latent z for arm '{arm}': mean {np.round(stacked.mean(axis=0), 4).tolist()}, "
                  f"std {np.round(stacked.std(axis=0), 4).tolist()}")
        print(f"Summary: {path}")
        return table


def _parse_adapters(values: List[str]) -> Dict[str, str]:
    adapters = {}
    for value in values:
        if "=" not in value:
            raise ConfigError(f"--adapters entries must look like arm=checkpoint, got '{value}'")
        arm, path = value.split("=", 1)
        adapters[arm] = path
    return adapters


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Disturbance predictive control for a quadruped with an arm.")
    parser.add_argument("--config", default=None, help="Path to configuration file (default: config.json if present)")
    parser.add_argument("--seed", type=int, default=None, help="Override the configured seed")
    parser.add_argument("--out", default=None, help="Override the output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    collect = sub.add_parser("collect", help="Collect random-motion adapter samples")
    collect.add_argument("--arm", required=True, help="Arm catalog name")
    collect.add_argument("--samples", type=int, required=True, help="Number of samples")
    collect.add_argument("--output", "-o", default=None, help="Dataset CSV path")

    train_adapter_cmd = sub.add_parser("train-adapter", help="Train the latent dynamic adapter")
    train_adapter_cmd.add_argument("--dataset", required=True, help="Dataset CSV")
    train_adapter_cmd.add_argument("--epochs", type=int, default=None, help="Training epochs")

    migrate = sub.add_parser("migrate", help="Migrate an encoder to a new arm with a frozen decoder")
    migrate.add_argument("--dataset", required=True, help="Dataset CSV of the new arm")
    migrate.add_argument("--adapter", required=True, help="Trained adapter checkpoint")
    migrate.add_argument("--budget", type=int, default=None, help="Maximum samples used")
    migrate.add_argument("--epochs", type=int, default=None, help="Training epochs")

    policy = sub.add_parser("train-policy", help="Train the SAC disturbance estimator")
    policy.add_argument("--adapter", default=None, help="Adapter checkpoint of the training arm")
    policy.add_argument("--steps", type=int, default=100000, help="Environment steps (updates with --bandit)")
    policy.add_argument("--arm", default="regular", help="Arm carried during training")
    policy.add_argument("--bandit", action="store_true", help="Run the synthetic bandit gate instead")

    compare = sub.add_parser("compare", help="Compare MBC and DPC returns")
    compare.add_argument("--agent", required=True, help="Agent checkpoint")
    compare.add_argument("--adapters", nargs="+", default=[], help="arm=checkpoint pairs")
    compare.add_argument("--tasks", nargs="+", default=["carrying"], help="Task names")
    compare.add_argument("--arms", nargs="+", default=["heavier"], help="Arm names")
    compare.add_argument("--seeds", type=int, default=None, help="Number of seeds")

    evaluate = sub.add_parser("eval", help="Run one logged episode")
    evaluate.add_argument("--task", required=True, help="Task name")
    evaluate.add_argument("--arm", default="regular", help="Arm name or 'none'")
    evaluate.add_argument("--policy", choices=POLICIES, default="mbc", help="High-level policy")
    evaluate.add_argument("--adapter", default=None, help="Adapter checkpoint")
    evaluate.add_argument("--agent", default=None, help="Agent checkpoint (dpc)")

    sub.add_parser("list-tasks", help="List registered task scenarios")
    return parser


def run(args: argparse.Namespace) -> int:
    """Execute a parsed command; returns the process exit code."""
    try:
        config_path = args.config
        if config_path is None and os.path.exists("config.json"):
            config_path = "config.json"
        config = HarnessConfig.load(config_path)
        if args.seed is not None:
            config.data["seed"] = args.seed
        if args.out is not None:
            config.data["output_directory"] = args.out
        manager = ExperimentManager(config.to_dict())
        harness = DpcHarness(config, manager)

        if args.command == "list-tasks":
            print("Registered tasks:")
            for name in manager.task_names():
                print(f"- {name}: {manager.tasks[name].description}")
            return EXIT_OK

        manager.save_config()
        if args.command == "collect":
            harness.cmd_collect(args.arm, args.samples, args.output)
        elif args.command == "train-adapter":
            harness.cmd_train_adapter(args.dataset, args.epochs)
        elif args.command == "migrate":
            harness.cmd_migrate(args.dataset, args.adapter, args.budget, args.epochs)
        elif args.command == "train-policy":
            harness.cmd_train_policy(args.adapter, args.steps, args.arm, args.bandit)
        elif args.command == "compare":
            harness.cmd_compare(args.agent, _parse_adapters(args.adapters), args.tasks, args.arms, args.seeds)
        elif args.command == "eval":
            harness.cmd_eval(args.task, args.arm, args.policy, args.adapter, args.agent)
        return EXIT_OK
    except ConfigError as e:
        logger.error(f"Configuration error: {e}", exc_info=True)
        print(f"❌ Configuration error: {e}")
        return EXIT_CONFIG
    except MissingArtifactError as e:
        logger.error(f"Missing artifact: {e}", exc_info=True)
        print(f"❌ Missing artifact: {e}")
        return EXIT_MISSING
    except (DpcError, OSError, ValueError) as e:
        logger.error(f"Command failed: {e}", exc_info=True)
        print(f"❌ {e}")
        return EXIT_FAULT


def main(argv: Optional[List[str]] = None) -> int:
    """Command line entry point."""
    args = build_parser().parse_args(argv)
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
