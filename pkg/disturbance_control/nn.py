"""
Minimal batched MLP with reverse-mode gradients, Adam and the DPCNN1
checkpoint codec shared by every persisted network.
"""

import os
import struct
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from disturbance_control.errors import (
    CheckpointError,
    DimensionError,
    InvalidArgumentError,
    MissingArtifactError,
    StaleTapeError,
)
from disturbance_control.utils import get_logger

RELU = "relu"
TANH = "tanh"
IDENTITY = "identity"
ACTIVATIONS = (RELU, TANH, IDENTITY)

CHECKPOINT_MAGIC = b"DPCNN1"

logger = get_logger("DpcNN")


def _activate(name: str, pre: np.ndarray) -> np.ndarray:
    if name == RELU:
        return np.maximum(pre, 0.0)
    if name == TANH:
        return np.tanh(pre)
    return pre


def _activation_grad(name: str, pre: np.ndarray, out: np.ndarray) -> np.ndarray:
    if name == RELU:
        return (pre > 0.0).astype(np.float64)
    if name == TANH:
        return 1.0 - out * out
    return np.ones_like(pre)


class MlpParams:
    """
    Weights and biases of a fully connected network.

    Weight matrices are stored (out, in). Every in-place change bumps
    ``version`` so tapes recorded against older values can be rejected.
    """

    def __init__(self, layer_sizes: Sequence[int], activations: Sequence[str],
                 weights: List[np.ndarray], biases: List[np.ndarray]):
        sizes = [int(s) for s in layer_sizes]
        if len(sizes) < 2 or any(s <= 0 for s in sizes):
            raise InvalidArgumentError(f"layer_sizes must list at least two positive sizes, got {sizes}")
        if len(activations) != len(sizes) - 1 or any(a not in ACTIVATIONS for a in activations):
            raise InvalidArgumentError(f"Need {len(sizes) - 1} activations from {ACTIVATIONS}")
        if len(weights) != len(sizes) - 1 or len(biases) != len(sizes) - 1:
            raise DimensionError("One weight matrix and bias per layer required")
        for i, (w, b) in enumerate(zip(weights, biases)):
            if w.shape != (sizes[i + 1], sizes[i]) or b.shape != (sizes[i + 1],):
                raise DimensionError(f"Layer {i} parameters do not chain with layer_sizes {sizes}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise InvalidArgumentError(f"Layer {i} parameters must be finite")
        self.layer_sizes = sizes
        self.activations = list(activations)
        self.weights = [np.array(w, dtype=np.float64) for w in weights]
        self.biases = [np.array(b, dtype=np.float64) for b in biases]
        self.version = 0

    @classmethod
    def create(cls, layer_sizes: Sequence[int], activations: Sequence[str],
               rng: np.random.Generator) -> "MlpParams":
        """
        Initialize a network: He-uniform for ReLU layers, Xavier-uniform otherwise.

        Args:
            layer_sizes: Input size, hidden sizes and output size
            activations: One activation name per layer
            rng: Random generator

        Returns:
            Freshly initialized MlpParams
        """
        weights, biases = [], []
        for i in range(len(layer_sizes) - 1):
            fan_in, fan_out = int(layer_sizes[i]), int(layer_sizes[i + 1])
            if activations[i] == RELU:
                limit = np.sqrt(6.0 / fan_in)
            else:
                limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return cls(layer_sizes, activations, weights, biases)

    @classmethod
    def mlp(cls, input_size: int, hidden_sizes: Sequence[int], output_size: int,
            rng: np.random.Generator, output_activation: str = IDENTITY) -> "MlpParams":
        """ReLU hidden layers with the given output activation."""
        sizes = [input_size, *hidden_sizes, output_size]
        activations = [RELU] * len(hidden_sizes) + [output_activation]
        return cls.create(sizes, activations, rng)

    @property
    def input_size(self) -> int:
        return self.layer_sizes[0]

    @property
    def output_size(self) -> int:
        return self.layer_sizes[-1]

    def parameters(self) -> List[np.ndarray]:
        """Parameter arrays in a fixed order (w0, b0, w1, b1, ...)."""
        params = []
        for w, b in zip(self.weights, self.biases):
            params.extend([w, b])
        return params

    def mark_updated(self) -> None:
        self.version += 1

    def copy(self) -> "MlpParams":
        return MlpParams(self.layer_sizes, self.activations,
                         [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def copy_from(self, other: "MlpParams") -> None:
        for dst, src in zip(self.parameters(), other.parameters()):
            dst[...] = src
        self.mark_updated()

    def zero_(self) -> None:
        for p in self.parameters():
            p[...] = 0.0
        self.mark_updated()

    def to_tensors(self, prefix: str) -> Dict[str, np.ndarray]:
        """Name the network's tensors under a prefix for checkpointing."""
        codes = np.array([ACTIVATIONS.index(a) for a in self.activations], dtype=np.float64)
        tensors = {
            f"{prefix}/layer_sizes": np.array(self.layer_sizes, dtype=np.float64),
            f"{prefix}/activations": codes,
        }
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            tensors[f"{prefix}/layer{i}/weight"] = w
            tensors[f"{prefix}/layer{i}/bias"] = b
        return tensors

    @classmethod
    def from_tensors(cls, tensors: Dict[str, np.ndarray], prefix: str) -> "MlpParams":
        """Rebuild a network from checkpoint tensors."""
        try:
            sizes = [int(s) for s in tensors[f"{prefix}/layer_sizes"]]
            activations = [ACTIVATIONS[int(c)] for c in tensors[f"{prefix}/activations"]]
            weights = [tensors[f"{prefix}/layer{i}/weight"] for i in range(len(sizes) - 1)]
            biases = [tensors[f"{prefix}/layer{i}/bias"] for i in range(len(sizes) - 1)]
        except (KeyError, IndexError) as e:
            raise CheckpointError(f"Checkpoint is missing network '{prefix}': {e}") from e
        return cls(sizes, activations, weights, biases)


@dataclass
class Tape:
    """Per-layer values recorded by forward, consumed by backward."""

    params: MlpParams
    version: int
    inputs: List[np.ndarray]
    pre_activations: List[np.ndarray]
    outputs: List[np.ndarray]
    batched: bool


@dataclass
class Gradients:
    """Gradients with respect to weights, biases and the network input."""

    weights: List[np.ndarray]
    biases: List[np.ndarray]
    input: np.ndarray

    def parameters(self) -> List[np.ndarray]:
        grads = []
        for w, b in zip(self.weights, self.biases):
            grads.extend([w, b])
        return grads


def forward(params: MlpParams, x: np.ndarray) -> Tuple[np.ndarray, Tape]:
    """
    Evaluate the network on one input (n,) or a batch (B, n).

    Args:
        params: Network parameters
        x: Input vector or batch

    Returns:
        Tuple of (output, tape)
    """
    x = np.asarray(x, dtype=np.float64)
    batched = x.ndim == 2
    h = x if batched else x.reshape(1, -1)
    if h.ndim != 2 or h.shape[1] != params.input_size:
        raise DimensionError(f"Network expects input size {params.input_size}, got {x.shape}")
    inputs, pres, outs = [], [], []
    for w, b, act in zip(params.weights, params.biases, params.activations):
        inputs.append(h)
        pre = h @ w.T + b
        h = _activate(act, pre)
        pres.append(pre)
        outs.append(h)
    tape = Tape(params=params, version=params.version, inputs=inputs, pre_activations=pres,
                outputs=outs, batched=batched)
    return (h if batched else h[0]), tape


def predict(params: MlpParams, x: np.ndarray) -> np.ndarray:
    """Forward pass without keeping the tape."""
    return forward(params, x)[0]


def backward(tape: Tape, output_gradient: np.ndarray) -> Gradients:
    """
    Reverse-mode gradients of sum(output_gradient * output).

    Args:
        tape: Tape from forward on the same, unchanged parameters
        output_gradient: Same shape as the forward output

    Returns:
        Gradients, summed over the batch
    """
    params = tape.params
    if tape.version != params.version:
        raise StaleTapeError(f"Tape recorded at version {tape.version}, parameters are at {params.version}")
    grad = np.asarray(output_gradient, dtype=np.float64)
    grad = grad if tape.batched else grad.reshape(1, -1)
    if grad.shape != tape.outputs[-1].shape:
        raise DimensionError(f"output_gradient shape {grad.shape} does not match {tape.outputs[-1].shape}")
    n_layers = len(params.weights)
    grad_w: List[Optional[np.ndarray]] = [None] * n_layers
    grad_b: List[Optional[np.ndarray]] = [None] * n_layers
    for i in reversed(range(n_layers)):
        delta = grad * _activation_grad(params.activations[i], tape.pre_activations[i], tape.outputs[i])
        grad_w[i] = delta.T @ tape.inputs[i]
        grad_b[i] = delta.sum(axis=0)
        grad = delta @ params.weights[i]
    input_grad = grad if tape.batched else grad[0]
    return Gradients(weights=grad_w, biases=grad_b, input=input_grad)


@dataclass
class AdamState:
    """Adam moments for one network."""

    first_moment: List[np.ndarray]
    second_moment: List[np.ndarray]
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0

    @classmethod
    def create(cls, params: MlpParams, learning_rate: float = 1e-3, **kwargs) -> "AdamState":
        return cls(first_moment=[np.zeros_like(p) for p in params.parameters()],
                   second_moment=[np.zeros_like(p) for p in params.parameters()],
                   learning_rate=learning_rate, **kwargs)


def adam_update(state: AdamState, params: List[np.ndarray], grads: List[np.ndarray]) -> None:
    """Bias-corrected Adam step applied in place to a list of arrays."""
    if len(params) != len(state.first_moment) or len(grads) != len(params):
        raise DimensionError("Adam state, parameters and gradients must have the same layout")
    state.step_count += 1
    t = state.step_count
    correction1 = 1.0 - state.beta1 ** t
    correction2 = 1.0 - state.beta2 ** t
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        if p.shape != g.shape:
            raise DimensionError(f"Gradient shape {g.shape} does not match parameter {p.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.learning_rate * (m / correction1) / (np.sqrt(v / correction2) + state.eps)


def adam_step(state: AdamState, params: MlpParams, gradients: Gradients) -> MlpParams:
    """
    Apply one Adam step to a network in place.

    Args:
        state: Adam state for this network
        params: Network to update
        gradients: Gradients from backward

    Returns:
        The updated network (same object)
    """
    adam_update(state, params.parameters(), gradients.parameters())
    params.mark_updated()
    return params


def polyak_update(target: MlpParams, source: MlpParams, coefficient: float) -> None:
    """target <- (1 - coefficient) * target + coefficient * source."""
    for t, s in zip(target.parameters(), source.parameters()):
        t *= 1.0 - coefficient
        t += coefficient * s
    target.mark_updated()


def save_checkpoint(path: str, tensors: Dict[str, np.ndarray]) -> None:
    """
    Write tensors in the DPCNN1 format.

    Each record holds a little-endian uint32 name length, the UTF-8 name, a
    uint32 rank, rank uint32 dimensions and the row-major float64 data.

    Args:
        path: Output file path
        tensors: Mapping of tensor name to array (written in insertion order)
    """
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        for name, value in tensors.items():
            array = np.ascontiguousarray(value, dtype="<f8")
            encoded = name.encode("utf-8")
            f.write(struct.pack("<I", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<I", array.ndim))
            for dim in array.shape:
                f.write(struct.pack("<I", dim))
            f.write(array.tobytes(order="C"))
    logger.info(f"Saved checkpoint with {len(tensors)} tensors to {path}")


def load_checkpoint(path: str) -> Dict[str, np.ndarray]:
    """
    Read a DPCNN1 checkpoint.

    Args:
        path: Checkpoint file path

    Returns:
        Mapping of tensor name to array, in file order
    """
    if not os.path.exists(path):
        raise MissingArtifactError(f"Checkpoint not found: {path}")
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(CHECKPOINT_MAGIC):
        raise CheckpointError(f"{path} is not a DPCNN1 checkpoint")

    tensors: Dict[str, np.ndarray] = {}
    offset = len(CHECKPOINT_MAGIC)

    def read(count: int) -> bytes:
        nonlocal offset
        if offset + count > len(data):
            raise CheckpointError(f"{path} is truncated")
        chunk = data[offset:offset + count]
        offset += count
        return chunk

    while offset < len(data):
        (name_length,) = struct.unpack("<I", read(4))
        name = read(name_length).decode("utf-8")
        (rank,) = struct.unpack("<I", read(4))
        shape = tuple(struct.unpack("<I", read(4))[0] for _ in range(rank))
        count = int(np.prod(shape)) if shape else 1
        array = np.frombuffer(read(8 * count), dtype="<f8").astype(np.float64).reshape(shape)
        tensors[name] = array
    return tensors
