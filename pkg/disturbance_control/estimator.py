"""
High-level disturbance estimator: tracking reward, observation building,
replay buffer, a numpy soft actor-critic agent and the policies used in
evaluation (MBC zero wrench, trained DPC agent, true-wrench oracle).
"""

import abc
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence

import numpy as np
from tqdm import tqdm

from disturbance_control.errors import CheckpointError, DimensionError, EmptyDatasetError, InvalidArgumentError
from disturbance_control.nn import (
    IDENTITY,
    AdamState,
    MlpParams,
    adam_step,
    adam_update,
    backward,
    forward,
    load_checkpoint,
    polyak_update,
    save_checkpoint,
)
from disturbance_control.state import (
    F_MAX,
    LATENT_DIM,
    T_MAX,
    BodyState,
    DisturbanceParams,
    LatentState,
    TrajectoryPoint,
    as_vector,
)
from disturbance_control.utils import get_logger

BODY_FEATURE_DIM = 8
OBS_DIM = BODY_FEATURE_DIM + LATENT_DIM
ACTION_DIM = 6
LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
TRACKING_SHARPNESS = 8.0
VELOCITY_WEIGHT = 0.08
ORIENTATION_WEIGHT = 0.05
MAX_REWARD = 3 * VELOCITY_WEIGHT + 2 * ORIENTATION_WEIGHT
SQUASH_EPS = 1e-6
HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


class RewardTerms(NamedTuple):
    r_vel: float
    r_orn: float
    r_total: float


def reward_from_errors(velocity_errors: Any, orientation_errors: Any) -> RewardTerms:
    """
    Tracking reward for error rows (vx, vy, yaw rate) and (roll, pitch).

    Accepts single rows or stacked rows; the terms are arrays for stacked input.
    """
    velocity_errors = np.asarray(velocity_errors, dtype=np.float64)
    orientation_errors = np.asarray(orientation_errors, dtype=np.float64)
    if velocity_errors.shape[-1:] != (3,) or orientation_errors.shape[-1:] != (2,):
        raise DimensionError("reward needs 3 velocity errors and 2 orientation errors per row")
    r_vel = np.sum(np.exp(-TRACKING_SHARPNESS * velocity_errors ** 2), axis=-1)
    r_orn = np.sum(np.exp(-TRACKING_SHARPNESS * orientation_errors ** 2), axis=-1)
    r_total = VELOCITY_WEIGHT * r_vel + ORIENTATION_WEIGHT * r_orn
    if r_total.ndim == 0:
        return RewardTerms(float(r_vel), float(r_orn), float(r_total))
    return RewardTerms(r_vel, r_orn, r_total)


def reward(desired: TrajectoryPoint, body: BodyState) -> RewardTerms:
    """
    Velocity and orientation tracking reward.

    Each tracked channel contributes exp(-8 err^2): vx, vy (heading frame) and
    yaw rate for r_vel, roll and pitch for r_orn.

    Args:
        desired: Desired trajectory point
        body: Current trunk state

    Returns:
        RewardTerms(r_vel, r_orn, r_total)
    """
    heading = body.heading_velocity
    velocity_errors = np.array([
        desired.desired_linear_velocity[0] - heading[0],
        desired.desired_linear_velocity[1] - heading[1],
        desired.desired_yaw_rate - body.angular_velocity[2],
    ])
    orientation_errors = np.array([desired.desired_roll - body.roll, desired.desired_pitch - body.pitch])
    return reward_from_errors(velocity_errors, orientation_errors)


@dataclass(frozen=True, eq=False)
class Observation:
    """Body features and latent state seen by the estimator."""

    body_features: np.ndarray
    latent: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "body_features", as_vector(self.body_features, BODY_FEATURE_DIM, "body_features"))
        object.__setattr__(self, "latent", as_vector(self.latent, LATENT_DIM, "latent"))

    @classmethod
    def build(cls, body: BodyState, latent: Optional[LatentState] = None) -> "Observation":
        """(roll, pitch, roll rate, pitch rate, vx, vy, yaw rate, height) plus z."""
        heading = body.heading_velocity
        features = [body.roll, body.pitch, body.angular_velocity[0], body.angular_velocity[1],
                    heading[0], heading[1], body.angular_velocity[2], body.height]
        z = np.zeros(LATENT_DIM) if latent is None else latent.z
        return cls(body_features=features, latent=z)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.body_features, self.latent])


@dataclass
class Transition:
    obs: np.ndarray
    action: np.ndarray
    reward: float
    next_obs: np.ndarray
    done: bool


class RunningStats:
    """Welford mean/variance used to standardize observations; frozen after warm-up."""

    def __init__(self, size: int):
        self.count = 0
        self.mean = np.zeros(size)
        self.m2 = np.zeros(size)
        self.frozen = False

    def update(self, x: np.ndarray) -> None:
        if self.frozen:
            return
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (x - self.mean)

    def freeze(self) -> None:
        self.frozen = True

    @property
    def std(self) -> np.ndarray:
        if self.count < 2:
            return np.ones_like(self.mean)
        std = np.sqrt(self.m2 / self.count)
        return np.where(std < 1e-6, 1.0, std)

    def normalize(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std

    def to_tensors(self, prefix: str) -> Dict[str, np.ndarray]:
        return {f"{prefix}/count": np.array(float(self.count)), f"{prefix}/mean": self.mean.copy(),
                f"{prefix}/m2": self.m2.copy(), f"{prefix}/frozen": np.array(float(self.frozen))}

    def load_tensors(self, tensors: Dict[str, np.ndarray], prefix: str) -> None:
        self.count = int(tensors[f"{prefix}/count"])
        self.mean = np.array(tensors[f"{prefix}/mean"])
        self.m2 = np.array(tensors[f"{prefix}/m2"])
        self.frozen = bool(tensors[f"{prefix}/frozen"])


class ReplayBuffer:
    """Fixed-capacity ring buffer of transitions stored as preallocated arrays."""

    def __init__(self, capacity: int, obs_dim: int = OBS_DIM, action_dim: int = ACTION_DIM):
        if capacity < 1:
            raise InvalidArgumentError(f"Replay capacity must be positive, got {capacity}")
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.next_obs = np.zeros((capacity, obs_dim))
        self.dones = np.zeros(capacity)
        self.position = 0
        self.size = 0

    def add(self, transition: Transition) -> None:
        if not math.isfinite(transition.reward):
            raise InvalidArgumentError("Transition reward must be finite")
        i = self.position
        self.obs[i] = transition.obs
        self.actions[i] = transition.action
        self.rewards[i] = transition.reward
        self.next_obs[i] = transition.next_obs
        self.dones[i] = float(transition.done)
        self.position = (self.position + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> Dict[str, np.ndarray]:
        if self.size == 0:
            raise EmptyDatasetError("Cannot sample from an empty replay buffer")
        idx = rng.integers(0, self.size, size=batch_size)
        return {"obs": self.obs[idx], "actions": self.actions[idx], "rewards": self.rewards[idx],
                "next_obs": self.next_obs[idx], "dones": self.dones[idx]}

    def __len__(self) -> int:
        return self.size


@dataclass
class SacConfig:
    """SAC hyperparameters and action limits."""

    gamma: float = 0.99
    polyak: float = 0.005
    learning_rate: float = 3e-4
    batch_size: int = 256
    replay_capacity: int = 100000
    target_entropy: float = -6.0
    warmup_steps: int = 1000
    initial_alpha: float = 0.2
    hidden_sizes: List[int] = field(default_factory=lambda: [128, 128])
    f_max: float = F_MAX
    t_max: float = T_MAX
    obs_warmup: int = 1000

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise InvalidArgumentError(f"gamma must lie in [0, 1), got {self.gamma}")
        if not 0.0 < self.polyak <= 1.0:
            raise InvalidArgumentError(f"polyak must lie in (0, 1], got {self.polyak}")
        if self.f_max <= 0 or self.t_max <= 0:
            raise InvalidArgumentError("f_max and t_max must be positive")

    @classmethod
    def from_config(cls, section: Dict[str, Any]) -> "SacConfig":
        return cls(**{key: section[key] for key in cls.__dataclass_fields__ if key in section})

    @property
    def action_scale(self) -> np.ndarray:
        return np.array([self.f_max] * 3 + [self.t_max] * 3)


class SacAgent:
    """
    Soft actor-critic with twin critics, target critics and a learned
    temperature. Critics see the standardized observation and the squashed
    action in [-1, 1].
    """

    def __init__(self, config: Optional[SacConfig] = None, seed: int = 0, obs_dim: int = OBS_DIM):
        self.config = config or SacConfig()
        self.obs_dim = obs_dim
        self.rng = np.random.default_rng(seed)
        hidden = self.config.hidden_sizes
        self.actor = MlpParams.mlp(obs_dim, hidden, 2 * ACTION_DIM, self.rng, output_activation=IDENTITY)
        self.critic1 = MlpParams.mlp(obs_dim + ACTION_DIM, hidden, 1, self.rng)
        self.critic2 = MlpParams.mlp(obs_dim + ACTION_DIM, hidden, 1, self.rng)
        self.target1 = self.critic1.copy()
        self.target2 = self.critic2.copy()
        lr = self.config.learning_rate
        self.actor_opt = AdamState.create(self.actor, lr)
        self.critic1_opt = AdamState.create(self.critic1, lr)
        self.critic2_opt = AdamState.create(self.critic2, lr)
        self.log_alpha = np.array([math.log(self.config.initial_alpha)])
        self.alpha_opt = AdamState(first_moment=[np.zeros(1)], second_moment=[np.zeros(1)], learning_rate=lr)
        self.obs_stats = RunningStats(obs_dim)
        self.updates = 0
        self.logger = get_logger(self.__class__.__name__)

    @property
    def alpha(self) -> float:
        return float(math.exp(self.log_alpha[0]))

    def _policy_head(self, obs_norm: np.ndarray):
        out, tape = forward(self.actor, obs_norm)
        mean = out[..., :ACTION_DIM]
        raw_log_std = out[..., ACTION_DIM:]
        log_std = np.clip(raw_log_std, LOG_STD_MIN, LOG_STD_MAX)
        return mean, log_std, raw_log_std, tape

    def _sample(self, obs_norm: np.ndarray, rng: np.random.Generator):
        mean, log_std, raw_log_std, tape = self._policy_head(obs_norm)
        std = np.exp(log_std)
        eps = rng.standard_normal(mean.shape)
        u = mean + std * eps
        a = np.tanh(u)
        log_prob = np.sum(-0.5 * eps ** 2 - log_std - HALF_LOG_2PI - np.log(1.0 - a * a + SQUASH_EPS), axis=-1)
        return u, a, log_prob, std, eps, raw_log_std, tape

    def squashed_action(self, obs: np.ndarray, stochastic: bool = False,
                        rng: Optional[np.random.Generator] = None) -> np.ndarray:
        """Pre-squash action u for one observation or a batch of rows (deterministic: the mean)."""
        obs = np.asarray(obs, dtype=np.float64)
        if obs.ndim not in (1, 2) or obs.shape[-1] != self.obs_dim:
            raise DimensionError(f"obs must have {self.obs_dim} columns, got shape {obs.shape}")
        if not np.all(np.isfinite(obs)):
            raise InvalidArgumentError("obs must be finite")
        obs_norm = self.obs_stats.normalize(obs)
        if stochastic:
            u, _, _, _, _, _, _ = self._sample(obs_norm, rng or self.rng)
            return u
        mean, _, _, _ = self._policy_head(obs_norm)
        return mean

    def to_wrench(self, u: np.ndarray) -> DisturbanceParams:
        """Scale a pre-squash action to a bounded disturbance wrench."""
        return DisturbanceParams.bounded(np.tanh(u) * self.config.action_scale,
                                         self.config.f_max, self.config.t_max)

    def act(self, obs: np.ndarray, stochastic: bool = False,
            rng: Optional[np.random.Generator] = None) -> DisturbanceParams:
        """Disturbance wrench estimate for an observation vector."""
        return self.to_wrench(self.squashed_action(obs, stochastic, rng))

    def _q_values(self, critic: MlpParams, obs_norm: np.ndarray, a: np.ndarray):
        out, tape = forward(critic, np.hstack([obs_norm, a]))
        return out[:, 0], tape

    def update(self, batch: Dict[str, np.ndarray]) -> Dict[str, float]:
        """
        One gradient step on both critics, the actor and the temperature,
        followed by polyak averaging of the target critics.

        Args:
            batch: Arrays obs, actions (pre-squash), rewards, next_obs, dones

        Returns:
            Loss and diagnostic values
        """
        n = len(batch["rewards"])
        if n == 0:
            raise EmptyDatasetError("Cannot update on an empty batch")
        cfg = self.config
        obs = self.obs_stats.normalize(batch["obs"])
        next_obs = self.obs_stats.normalize(batch["next_obs"])
        actions = np.tanh(batch["actions"])

        _, next_a, next_log_prob, _, _, _, _ = self._sample(next_obs, self.rng)
        q1_next, _ = self._q_values(self.target1, next_obs, next_a)
        q2_next, _ = self._q_values(self.target2, next_obs, next_a)
        soft_value = np.minimum(q1_next, q2_next) - self.alpha * next_log_prob
        target = batch["rewards"] + cfg.gamma * (1.0 - batch["dones"]) * soft_value

        critic_losses = []
        for critic, optimizer in ((self.critic1, self.critic1_opt), (self.critic2, self.critic2_opt)):
            q, tape = self._q_values(critic, obs, actions)
            error = q - target
            critic_losses.append(float(np.mean(error ** 2)))
            grads = backward(tape, (2.0 * error / n)[:, None])
            adam_step(optimizer, critic, grads)

        u, a, log_prob, std, eps, raw_log_std, actor_tape = self._sample(obs, self.rng)
        q1, tape1 = self._q_values(self.critic1, obs, a)
        q2, tape2 = self._q_values(self.critic2, obs, a)
        use_first = q1 <= q2
        q_min = np.where(use_first, q1, q2)
        grad_q1 = backward(tape1, use_first.astype(np.float64)[:, None]).input[:, self.obs_dim:]
        grad_q2 = backward(tape2, (~use_first).astype(np.float64)[:, None]).input[:, self.obs_dim:]
        dq_da = grad_q1 + grad_q2
        alpha = self.alpha
        actor_loss = float(np.mean(alpha * log_prob - q_min))

        dl_du = (alpha * 2.0 * a - dq_da * (1.0 - a * a)) / n
        dl_dmean = dl_du
        dl_dlog_std = (-alpha / n + dl_du * std * eps)
        dl_dlog_std = dl_dlog_std * ((raw_log_std > LOG_STD_MIN) & (raw_log_std < LOG_STD_MAX))
        actor_grads = backward(actor_tape, np.hstack([dl_dmean, dl_dlog_std]))
        adam_step(self.actor_opt, self.actor, actor_grads)

        entropy_gap = log_prob + cfg.target_entropy
        alpha_loss = float(-np.mean(self.log_alpha[0] * entropy_gap))
        adam_update(self.alpha_opt, [self.log_alpha], [np.array([-np.mean(entropy_gap)])])

        polyak_update(self.target1, self.critic1, cfg.polyak)
        polyak_update(self.target2, self.critic2, cfg.polyak)
        self.updates += 1
        return {"critic1_loss": critic_losses[0], "critic2_loss": critic_losses[1], "actor_loss": actor_loss,
                "alpha_loss": alpha_loss, "alpha": self.alpha, "q_mean": float(np.mean(q_min)),
                "target_mean": float(np.mean(target))}

    def to_tensors(self) -> Dict[str, np.ndarray]:
        tensors: Dict[str, np.ndarray] = {}
        for name, net in (("actor", self.actor), ("critic1", self.critic1), ("critic2", self.critic2),
                          ("target1", self.target1), ("target2", self.target2)):
            tensors.update(net.to_tensors(name))
        tensors["sac/log_alpha"] = self.log_alpha.copy()
        tensors["sac/action_scale"] = self.config.action_scale
        tensors.update(self.obs_stats.to_tensors("sac/obs_stats"))
        return tensors

    def save(self, path: str) -> None:
        save_checkpoint(path, self.to_tensors())
        self.logger.info(f"Saved agent after {self.updates} updates to {path}")

    @classmethod
    def load(cls, path: str, config: Optional[SacConfig] = None, seed: int = 0) -> "SacAgent":
        """Restore an agent from a DPCNN1 checkpoint."""
        tensors = load_checkpoint(path)
        config = config or SacConfig()
        try:
            scale = tensors["sac/action_scale"]
            config.f_max, config.t_max = float(scale[0]), float(scale[3])
            actor = MlpParams.from_tensors(tensors, "actor")
            agent = cls(config, seed=seed, obs_dim=actor.input_size)
            agent.actor = actor
            agent.critic1 = MlpParams.from_tensors(tensors, "critic1")
            agent.critic2 = MlpParams.from_tensors(tensors, "critic2")
            agent.target1 = MlpParams.from_tensors(tensors, "target1")
            agent.target2 = MlpParams.from_tensors(tensors, "target2")
            agent.log_alpha = np.array(tensors["sac/log_alpha"]).reshape(1)
            agent.obs_stats.load_tensors(tensors, "sac/obs_stats")
        except KeyError as e:
            raise CheckpointError(f"{path} is not a SAC agent checkpoint: missing {e}") from e
        if agent.actor.output_size != 2 * ACTION_DIM:
            raise CheckpointError(f"{path} actor does not output a {ACTION_DIM}-D Gaussian")
        agent.actor_opt = AdamState.create(agent.actor, config.learning_rate)
        agent.critic1_opt = AdamState.create(agent.critic1, config.learning_rate)
        agent.critic2_opt = AdamState.create(agent.critic2, config.learning_rate)
        return agent


def mbc_baseline() -> DisturbanceParams:
    """The model-based controller baseline never compensates: zero wrench."""
    return DisturbanceParams.zero()


class HighLevelPolicy(abc.ABC):
    """Maps an observation to the disturbance wrench fed to the low-level controller."""

    name = "policy"

    def __init__(self):
        self.logger = get_logger(self.__class__.__name__)

    @abc.abstractmethod
    def act(self, obs: Observation, info: Dict[str, Any]) -> DisturbanceParams:
        """
        Compute the wrench for one high-level period.

        Args:
            obs: Current observation
            info: Environment extras (the oracle reads "true_wrench")

        Returns:
            DisturbanceParams
        """
        pass


class MbcPolicy(HighLevelPolicy):
    name = "mbc"

    def act(self, obs: Observation, info: Dict[str, Any]) -> DisturbanceParams:
        return mbc_baseline()


class DpcPolicy(HighLevelPolicy):
    name = "dpc"

    def __init__(self, agent: SacAgent, stochastic: bool = False, rng: Optional[np.random.Generator] = None):
        super().__init__()
        self.agent = agent
        self.stochastic = stochastic
        self.rng = rng

    def act(self, obs: Observation, info: Dict[str, Any]) -> DisturbanceParams:
        return self.agent.act(obs.as_vector(), stochastic=self.stochastic, rng=self.rng)


class OraclePolicy(HighLevelPolicy):
    """Feeds the true arm wrench, clipped to the action limits."""

    name = "oracle"

    def __init__(self, f_max: float = F_MAX, t_max: float = T_MAX):
        super().__init__()
        self.f_max = f_max
        self.t_max = t_max

    def act(self, obs: Observation, info: Dict[str, Any]) -> DisturbanceParams:
        wrench = info.get("true_wrench")
        if wrench is None:
            raise InvalidArgumentError("Oracle policy needs the true wrench in info")
        return DisturbanceParams.bounded(wrench, self.f_max, self.t_max)


def train_policy(env: Any, agent: SacAgent, steps: int, seed: int = 0,
                 on_episode: Optional[Callable[[Dict[str, float]], None]] = None,
                 log_every: int = 1000,
                 evaluate: Optional[Callable[[SacAgent], float]] = None) -> List[Dict[str, float]]:
    """
    Interleave environment steps and SAC updates.

    Uniform random actions are used for the warm-up steps; observation
    statistics are frozen once ``obs_warmup`` observations have been seen. One
    update is made per environment step after warm-up.

    Args:
        env: Object with reset() -> obs and step(wrench) -> (obs, reward, done, info)
        agent: Agent to train
        steps: Environment steps
        seed: Seed for exploration noise and replay sampling
        on_episode: Optional callback receiving per-episode statistics
        log_every: Steps between training curve entries
        evaluate: Optional deterministic evaluation run at every curve entry

    Returns:
        Training curve entries (step, mean reward, losses, alpha, evaluation return)
    """
    cfg = agent.config
    rng = np.random.default_rng(seed)
    buffer = ReplayBuffer(cfg.replay_capacity, agent.obs_dim)
    curve: List[Dict[str, float]] = []
    obs = env.reset()
    agent.obs_stats.update(obs)
    rewards: List[float] = []
    losses: Dict[str, float] = {}
    episode_return, episode_steps = 0.0, 0

    for step in tqdm(range(1, steps + 1), desc="train-policy", leave=False):
        if step <= cfg.warmup_steps:
            u = np.arctanh(np.clip(rng.uniform(-1.0, 1.0, ACTION_DIM), -0.999, 0.999))
        else:
            u = agent.squashed_action(obs, stochastic=True, rng=rng)
        next_obs, r, done, info = env.step(agent.to_wrench(u))
        terminal = bool(done and not info.get("truncated", False))
        buffer.add(Transition(obs=obs, action=u, reward=r, next_obs=next_obs, done=terminal))
        rewards.append(r)
        episode_return += r
        episode_steps += 1

        if not agent.obs_stats.frozen:
            agent.obs_stats.update(next_obs)
            if agent.obs_stats.count >= cfg.obs_warmup:
                agent.obs_stats.freeze()
        if step > cfg.warmup_steps:
            losses = agent.update(buffer.sample(cfg.batch_size, rng))

        obs = next_obs
        if done:
            if on_episode is not None:
                on_episode({"step": float(step), "return": episode_return, "length": float(episode_steps),
                            "fell": float(info.get("fell", False))})
            obs = env.reset()
            episode_return, episode_steps = 0.0, 0

        if step % log_every == 0 or step == steps:
            entry = {"step": float(step), "reward_mean": float(np.mean(rewards)) if rewards else 0.0,
                     "alpha": agent.alpha}
            for key in ("critic1_loss", "critic2_loss", "actor_loss", "alpha_loss"):
                entry[key] = losses.get(key, float("nan"))
            entry["eval_return"] = evaluate(agent) if evaluate is not None else float("nan")
            curve.append(entry)
            agent.logger.info(f"step {step}: mean reward {entry['reward_mean']:.4f}, alpha {agent.alpha:.4f}")
            rewards = []
    return curve


@dataclass
class BanditResult:
    target: np.ndarray
    final_action: np.ndarray
    distance: float
    curve: List[Dict[str, float]]

    @property
    def passed(self) -> bool:
        return self.distance <= 0.1


def run_bandit_gate(config: Optional[SacConfig] = None, target: Optional[Sequence[float]] = None,
                    updates: int = 5000, seed: int = 0, log_every: int = 500) -> BanditResult:
    """
    Single-step bandit with a known optimum, used to validate the SAC update.

    Observations are constant, reward is -||a - a*||^2 in normalized action
    units and every transition is terminal.

    Args:
        config: SAC hyperparameters
        target: Optimal normalized action a* in (-1, 1)^6
        updates: Number of agent updates
        seed: Random seed
        log_every: Updates between curve entries

    Returns:
        BanditResult with the final deterministic action and its distance to a*
    """
    config = config or SacConfig()
    a_star = np.array(target if target is not None else [0.5, -0.3, 0.2, 0.0, 0.4, -0.5], dtype=np.float64)
    if a_star.shape != (ACTION_DIM,) or np.any(np.abs(a_star) >= 1.0):
        raise DimensionError(f"Bandit target must be {ACTION_DIM} values inside (-1, 1)")
    agent = SacAgent(config, seed=seed)
    rng = np.random.default_rng(seed + 1)
    buffer = ReplayBuffer(max(config.batch_size, min(config.replay_capacity, updates + config.batch_size)))
    obs = np.zeros(OBS_DIM)
    curve: List[Dict[str, float]] = []

    def distance() -> float:
        return float(np.max(np.abs(np.tanh(agent.squashed_action(obs)) - a_star)))

    for step in tqdm(range(1, updates + config.batch_size + 1), desc="bandit", leave=False):
        u = agent.squashed_action(obs, stochastic=True, rng=rng)
        r = -float(np.sum((np.tanh(u) - a_star) ** 2))
        buffer.add(Transition(obs=obs, action=u, reward=r, next_obs=obs, done=True))
        if len(buffer) < config.batch_size:
            continue
        losses = agent.update(buffer.sample(config.batch_size, rng))
        if agent.updates % log_every == 0:
            curve.append({"update": float(agent.updates), "distance": distance(), "alpha": losses["alpha"],
                          "critic1_loss": losses["critic1_loss"], "actor_loss": losses["actor_loss"]})
        if agent.updates >= updates:
            break
    final = np.tanh(agent.squashed_action(obs))
    return BanditResult(target=a_star, final_action=final, distance=distance(), curve=curve)
