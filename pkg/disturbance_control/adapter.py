"""
Latent dynamic adapter: an encoder mapping body orientation, arm state and arm
command to a 2-D latent state, and a decoder predicting the next roll and
pitch rates from it. Includes training and frozen-decoder encoder migration.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from disturbance_control.errors import (
    CheckpointError,
    DimensionError,
    DpcError,
    EmptyDatasetError,
    InvalidArgumentError,
)
from disturbance_control.nn import (
    AdamState,
    MlpParams,
    adam_step,
    backward,
    forward,
    load_checkpoint,
    predict,
    save_checkpoint,
)
from disturbance_control.state import LATENT_DIM, ArmCommand, ArmState, BodyState, LatentState, as_vector
from disturbance_control.utils import get_logger, read_csv, tensor_digest, write_csv

BODY_FEATURES = ("roll", "pitch", "roll_rate", "pitch_rate")
TARGET_COLUMNS = ("next_roll_rate", "next_pitch_rate")
MIN_TRAINING_SAMPLES = 1000

logger = get_logger("LatentAdapter")


def body_features(body: BodyState) -> np.ndarray:
    """Encoder body features: roll, pitch and their gyro rates."""
    return np.array([body.roll, body.pitch, body.angular_velocity[0], body.angular_velocity[1]])


def encoder_features(body: BodyState, arm: ArmState, arm_cmd: ArmCommand) -> np.ndarray:
    """Concatenate body features, arm joint angles and commanded joint positions."""
    if arm.joint_angles.size != arm_cmd.desired_joint_positions.size:
        raise DimensionError("Arm state and arm command must have the same number of joints")
    return np.concatenate([body_features(body), arm.joint_angles, arm_cmd.desired_joint_positions])


@dataclass(frozen=True, eq=False)
class AdapterSample:
    """One forward-model training example."""

    body: BodyState
    arm: ArmState
    arm_cmd: ArmCommand
    next_drp: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "next_drp", as_vector(self.next_drp, 2, "next_drp"))


@dataclass
class AdapterDataset:
    """Column-stacked adapter samples; trajectory ids mark contiguous segments."""

    inputs: np.ndarray
    targets: np.ndarray
    trajectory_ids: np.ndarray
    joint_count: int = 0

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.float64).reshape(-1, 2)
        if self.inputs.ndim != 2:
            raise DimensionError(f"inputs must be a 2-D array, got shape {self.inputs.shape}")
        self.trajectory_ids = np.asarray(self.trajectory_ids, dtype=np.int64).reshape(-1)
        if not (len(self.inputs) == len(self.targets) == len(self.trajectory_ids)):
            raise DimensionError("inputs, targets and trajectory_ids must have the same length")
        if self.inputs.size and not np.all(np.isfinite(self.inputs)):
            raise InvalidArgumentError("Adapter inputs must be finite")
        if self.targets.size and not np.all(np.isfinite(self.targets)):
            raise InvalidArgumentError("Adapter targets must be finite")
        if self.joint_count == 0 and self.inputs.shape[1] > len(BODY_FEATURES):
            self.joint_count = (self.inputs.shape[1] - len(BODY_FEATURES)) // 2

    def __len__(self) -> int:
        return len(self.targets)

    @property
    def input_size(self) -> int:
        return int(self.inputs.shape[1])

    @classmethod
    def from_samples(cls, samples: Sequence[AdapterSample], trajectory_ids: Optional[Sequence[int]] = None,
                     joint_count: int = 0) -> "AdapterDataset":
        """Stack samples into encoder feature rows and next roll/pitch rate targets."""
        if not samples:
            raise EmptyDatasetError("No adapter samples given")
        inputs = np.array([encoder_features(s.body, s.arm, s.arm_cmd) for s in samples])
        targets = np.array([s.next_drp for s in samples])
        ids = np.zeros(len(samples), dtype=np.int64) if trajectory_ids is None else trajectory_ids
        return cls(inputs=inputs, targets=targets, trajectory_ids=ids, joint_count=joint_count)

    def subset(self, indices: np.ndarray) -> "AdapterDataset":
        return AdapterDataset(self.inputs[indices], self.targets[indices], self.trajectory_ids[indices],
                              joint_count=self.joint_count)

    def head(self, count: int) -> "AdapterDataset":
        """First ``count`` samples, in collection order."""
        return self.subset(np.arange(min(count, len(self))))

    def target_variance(self) -> float:
        """Mean per-channel variance of the targets (the mean-predictor MSE)."""
        if len(self) == 0:
            return 0.0
        return float(np.mean(np.var(self.targets, axis=0)))

    def header(self) -> List[str]:
        columns = ["trajectory_id", *BODY_FEATURES]
        columns += [f"arm_q{j}" for j in range(self.joint_count)]
        columns += [f"arm_cmd{j}" for j in range(self.joint_count)]
        return columns + list(TARGET_COLUMNS)

    def save_csv(self, path: str) -> int:
        """Write the dataset as CSV, one sample per row."""
        rows = ([int(tid), *inp.tolist(), *tgt.tolist()]
                for tid, inp, tgt in zip(self.trajectory_ids, self.inputs, self.targets))
        return write_csv(path, self.header(), rows)

    @classmethod
    def load_csv(cls, path: str) -> "AdapterDataset":
        """Read a dataset written by save_csv."""
        header, rows = read_csv(path)
        if not rows:
            raise EmptyDatasetError(f"Dataset {path} has no samples")
        if header[0] != "trajectory_id" or tuple(header[-2:]) != TARGET_COLUMNS:
            raise InvalidArgumentError(f"{path} is not an adapter dataset")
        values = np.array(rows, dtype=np.float64)
        joint_count = (len(header) - 1 - len(BODY_FEATURES) - 2) // 2
        return cls(inputs=values[:, 1:-2], targets=values[:, -2:], trajectory_ids=values[:, 0].astype(np.int64),
                   joint_count=joint_count)


@dataclass
class AdapterModel:
    """Encoder, decoder and the input standardization they were trained with."""

    encoder: MlpParams
    decoder: MlpParams
    input_mean: np.ndarray
    input_std: np.ndarray
    arm_name: str = ""

    def __post_init__(self):
        if self.encoder.output_size != LATENT_DIM or self.decoder.input_size != LATENT_DIM:
            raise DimensionError(f"Encoder output and decoder input must be {LATENT_DIM}-dimensional")
        if self.decoder.output_size != 2:
            raise DimensionError("Decoder must predict the two body rates")
        self.input_mean = np.asarray(self.input_mean, dtype=np.float64).reshape(self.encoder.input_size)
        self.input_std = np.asarray(self.input_std, dtype=np.float64).reshape(self.encoder.input_size)

    def standardize(self, inputs: np.ndarray) -> np.ndarray:
        return (np.asarray(inputs, dtype=np.float64) - self.input_mean) / self.input_std

    def latent(self, inputs: np.ndarray) -> np.ndarray:
        """Latent states for raw feature rows (or one row)."""
        return predict(self.encoder, self.standardize(inputs))

    def predict_drp(self, inputs: np.ndarray) -> np.ndarray:
        """Predicted next roll and pitch rates for raw feature rows."""
        return predict(self.decoder, self.latent(inputs))

    def mse(self, dataset: AdapterDataset) -> float:
        if len(dataset) == 0:
            raise EmptyDatasetError("Cannot evaluate on an empty dataset")
        error = self.predict_drp(dataset.inputs) - dataset.targets
        return float(np.mean(error * error))

    def to_tensors(self) -> Dict[str, np.ndarray]:
        tensors = {}
        tensors.update(self.encoder.to_tensors("encoder"))
        tensors.update(self.decoder.to_tensors("decoder"))
        tensors["adapter/input_mean"] = self.input_mean
        tensors["adapter/input_std"] = self.input_std
        tensors["adapter/latent_dim"] = np.array(float(LATENT_DIM))
        return tensors

    def decoder_digest(self) -> str:
        return tensor_digest(self.decoder.to_tensors("decoder"))


def encode(model: AdapterModel, body: BodyState, arm: ArmState, arm_cmd: ArmCommand) -> LatentState:
    """
    Latent state of the current body, arm state and arm command.

    Args:
        model: Trained adapter
        body: Current trunk state
        arm: Current arm joint angles
        arm_cmd: Desired arm joint positions

    Returns:
        LatentState
    """
    features = encoder_features(body, arm, arm_cmd)
    if features.size != model.encoder.input_size:
        raise DimensionError(f"Adapter expects {model.encoder.input_size} features, got {features.size}")
    return LatentState(z=model.latent(features))


def save_adapter(model: AdapterModel, path: str) -> None:
    save_checkpoint(path, model.to_tensors())


def load_adapter(path: str, arm_name: str = "") -> AdapterModel:
    """Load an adapter checkpoint, checking the latent dimensionality."""
    tensors = load_checkpoint(path)
    latent_dim = tensors.get("adapter/latent_dim")
    if latent_dim is None or int(latent_dim) != LATENT_DIM:
        raise CheckpointError(f"{path} does not hold a {LATENT_DIM}-D latent adapter")
    try:
        return AdapterModel(encoder=MlpParams.from_tensors(tensors, "encoder"),
                            decoder=MlpParams.from_tensors(tensors, "decoder"),
                            input_mean=tensors["adapter/input_mean"], input_std=tensors["adapter/input_std"],
                            arm_name=arm_name)
    except (KeyError, DimensionError) as e:
        raise CheckpointError(f"{path} is not a valid adapter checkpoint: {e}") from e


def temporal_split(dataset: AdapterDataset, holdout_fraction: float = 0.1) -> Tuple[np.ndarray, np.ndarray]:
    """
    Hold out the last fraction of every trajectory.

    Args:
        dataset: Dataset in collection order
        holdout_fraction: Share of each trajectory kept for evaluation

    Returns:
        Tuple of (train indices, holdout indices)
    """
    if not 0.0 <= holdout_fraction < 1.0:
        raise InvalidArgumentError(f"holdout_fraction must lie in [0, 1), got {holdout_fraction}")
    train, holdout = [], []
    for trajectory in dict.fromkeys(dataset.trajectory_ids.tolist()):
        indices = np.flatnonzero(dataset.trajectory_ids == trajectory)
        held = int(math.floor(len(indices) * holdout_fraction))
        split = len(indices) - held
        train.append(indices[:split])
        holdout.append(indices[split:])
    if not train:
        return np.zeros(0, dtype=int), np.zeros(0, dtype=int)
    return np.concatenate(train), np.concatenate(holdout)


@dataclass
class AdapterTrainResult:
    """Trained model with its loss history and held-out score."""

    model: AdapterModel
    history: List[Dict[str, float]] = field(default_factory=list)
    holdout_mse: float = float("nan")
    baseline_variance: float = float("nan")
    samples_used: int = 0


def _fit(encoder: MlpParams, decoder: MlpParams, train_decoder: bool, inputs: np.ndarray,
         targets: np.ndarray, epochs: int, learning_rate: float, batch_size: int,
         rng: np.random.Generator, evaluate, desc: str) -> List[Dict[str, float]]:
    """Minibatch MSE training; the decoder is only read when train_decoder is False."""
    encoder_opt = AdamState.create(encoder, learning_rate)
    decoder_opt = AdamState.create(decoder, learning_rate) if train_decoder else None
    history = []
    n = len(targets)
    batch_size = max(1, min(batch_size, n))
    for epoch in tqdm(range(epochs), desc=desc, leave=False):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            batch = order[start:start + batch_size]
            latent, encoder_tape = forward(encoder, inputs[batch])
            prediction, decoder_tape = forward(decoder, latent)
            error = prediction - targets[batch]
            total += float(np.sum(error * error))
            grad_prediction = 2.0 * error / error.size
            decoder_grads = backward(decoder_tape, grad_prediction)
            encoder_grads = backward(encoder_tape, decoder_grads.input)
            adam_step(encoder_opt, encoder, encoder_grads)
            if decoder_opt is not None:
                adam_step(decoder_opt, decoder, decoder_grads)
        entry = {"epoch": float(epoch + 1), "train_mse": total / (n * targets.shape[1])}
        entry["holdout_mse"] = evaluate()
        history.append(entry)
        logger.debug(f"{desc} epoch {epoch + 1}: train {entry['train_mse']:.3e}, holdout {entry['holdout_mse']:.3e}")
    return history


def _standardization(inputs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    mean = inputs.mean(axis=0)
    std = inputs.std(axis=0)
    std = np.where(std < 1e-8, 1.0, std)
    return mean, std


def train_adapter(dataset: AdapterDataset, epochs: int = 20, learning_rate: float = 1e-3,
                  batch_size: int = 256, seed: int = 0, hidden_sizes: Sequence[int] = (128, 128),
                  holdout_fraction: float = 0.1, arm_name: str = "") -> AdapterTrainResult:
    """
    Train encoder and decoder jointly by minimizing next-rate MSE.

    Args:
        dataset: Adapter samples in collection order
        epochs: Passes over the training split
        learning_rate: Adam learning rate
        batch_size: Minibatch size
        seed: Seed for initialization and shuffling
        hidden_sizes: Hidden layer widths of encoder and decoder
        holdout_fraction: Temporal holdout share per trajectory
        arm_name: Arm label stored with the model

    Returns:
        AdapterTrainResult with the held-out MSE and mean-predictor variance
    """
    if len(dataset) == 0:
        raise EmptyDatasetError("Cannot train the adapter on an empty dataset")
    if len(dataset) < MIN_TRAINING_SAMPLES:
        logger.warning(f"Training the adapter on only {len(dataset)} samples")
    rng = np.random.default_rng(seed)
    train_idx, holdout_idx = temporal_split(dataset, holdout_fraction)
    train, holdout = dataset.subset(train_idx), dataset.subset(holdout_idx)
    mean, std = _standardization(train.inputs)

    encoder = MlpParams.mlp(dataset.input_size, hidden_sizes, LATENT_DIM, rng)
    decoder = MlpParams.mlp(LATENT_DIM, hidden_sizes, 2, rng)
    model = AdapterModel(encoder=encoder, decoder=decoder, input_mean=mean, input_std=std, arm_name=arm_name)
    evaluation = holdout if len(holdout) else train

    history = _fit(encoder, decoder, True, model.standardize(train.inputs), train.targets, epochs,
                   learning_rate, batch_size, rng, lambda: model.mse(evaluation), "adapter")
    result = AdapterTrainResult(model=model, history=history, holdout_mse=model.mse(evaluation),
                                baseline_variance=evaluation.target_variance(), samples_used=len(dataset))
    logger.info(f"Adapter trained on {len(train)} samples: holdout MSE {result.holdout_mse:.4e} "
                f"(mean-predictor {result.baseline_variance:.4e})")
    return result


def migrate_encoder(frozen_decoder: MlpParams, dataset: AdapterDataset, budget: int = 30000,
                    epochs: int = 20, learning_rate: float = 1e-3, batch_size: int = 256,
                    seed: int = 0, hidden_sizes: Sequence[int] = (128, 128),
                    holdout_fraction: float = 0.1, arm_name: str = "") -> AdapterTrainResult:
    """
    Train a fresh encoder for a new arm through a frozen decoder.

    Gradients flow through the decoder but only encoder parameters change. The
    decoder's tensors are hashed before and after training.

    Args:
        frozen_decoder: Decoder of the trained adapter (never modified)
        dataset: Samples collected with the new arm
        budget: Maximum number of samples used
        epochs: Passes over the training split
        learning_rate: Adam learning rate
        batch_size: Minibatch size
        seed: Seed for initialization and shuffling
        hidden_sizes: Hidden widths of the new encoder
        holdout_fraction: Temporal holdout share per trajectory
        arm_name: Arm label stored with the model

    Returns:
        AdapterTrainResult whose model shares the frozen decoder
    """
    if frozen_decoder.input_size != LATENT_DIM or frozen_decoder.output_size != 2:
        raise DimensionError(f"Decoder must map {LATENT_DIM} latent dims to 2 rates")
    if budget < 1:
        raise InvalidArgumentError(f"Migration budget must be positive, got {budget}")
    if len(dataset) == 0:
        raise EmptyDatasetError("Cannot migrate on an empty dataset")
    data = dataset.head(budget)
    digest_before = tensor_digest(frozen_decoder.to_tensors("decoder"))

    rng = np.random.default_rng(seed)
    train_idx, holdout_idx = temporal_split(data, holdout_fraction)
    train, holdout = data.subset(train_idx), data.subset(holdout_idx)
    mean, std = _standardization(train.inputs)
    encoder = MlpParams.mlp(data.input_size, hidden_sizes, LATENT_DIM, rng)
    model = AdapterModel(encoder=encoder, decoder=frozen_decoder, input_mean=mean, input_std=std,
                         arm_name=arm_name)
    evaluation = holdout if len(holdout) else train

    history = _fit(encoder, frozen_decoder, False, model.standardize(train.inputs), train.targets, epochs,
                   learning_rate, batch_size, rng, lambda: model.mse(evaluation), "migrate")
    if tensor_digest(frozen_decoder.to_tensors("decoder")) != digest_before:
        raise DpcError("Frozen decoder changed during encoder migration")
    result = AdapterTrainResult(model=model, history=history, holdout_mse=model.mse(evaluation),
                                baseline_variance=evaluation.target_variance(), samples_used=len(data))
    logger.info(f"Encoder migrated with {len(data)} samples: holdout MSE {result.holdout_mse:.4e}")
    return result


def shuffled_targets(dataset: AdapterDataset, rng: np.random.Generator) -> AdapterDataset:
    """Copy of the dataset with targets permuted, removing any learnable signal."""
    return AdapterDataset(dataset.inputs, dataset.targets[rng.permutation(len(dataset))],
                          dataset.trajectory_ids, joint_count=dataset.joint_count)


def latent_summary(model: AdapterModel, dataset: AdapterDataset) -> Dict[str, Any]:
    """Mean and standard deviation of the latent state over a dataset."""
    latent = model.latent(dataset.inputs)
    return {"mean": latent.mean(axis=0).tolist(), "std": latent.std(axis=0).tolist(), "count": len(dataset)}
