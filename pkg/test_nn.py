#!/usr/bin/env python3
"""
Tests for the small MLP library: gradients, tapes, optimizers and checkpoints.
"""

import logging
import os
import sys
import tempfile

import numpy as np

from disturbance_control.errors import CheckpointError, InvalidArgumentError, MissingArtifactError, StaleTapeError
from disturbance_control.nn import (
    IDENTITY,
    TANH,
    AdamState,
    MlpParams,
    adam_step,
    backward,
    forward,
    load_checkpoint,
    polyak_update,
    predict,
    save_checkpoint,
)


def _smooth_network(seed: int = 0) -> MlpParams:
    return MlpParams.create([3, 5, 4, 2], [TANH, TANH, IDENTITY], np.random.default_rng(seed))


def test_gradients_match_finite_differences():
    """Test backward against central differences for weights, biases and input."""
    print("\n=== Testing gradients ===")
    rng = np.random.default_rng(1)
    params = _smooth_network()
    x = rng.normal(size=(6, 3))
    g = rng.normal(size=(6, 2))

    def objective() -> float:
        return float(np.sum(g * predict(params, x)))

    _, tape = forward(params, x)
    grads = backward(tape, g)
    eps = 1e-6
    worst = 0.0
    for array, grad in zip(params.parameters(), grads.parameters()):
        flat = array.reshape(-1)
        for i in range(0, flat.size, max(1, flat.size // 5)):
            saved = flat[i]
            flat[i] = saved + eps
            up = objective()
            flat[i] = saved - eps
            down = objective()
            flat[i] = saved
            numeric = (up - down) / (2 * eps)
            worst = max(worst, abs(numeric - grad.reshape(-1)[i]))
    assert worst < 1e-6, worst

    for i in range(3):
        shifted = np.array(x)
        shifted[0, i] += eps
        numeric = (np.sum(g * predict(params, shifted)) - objective()) / eps
        assert abs(numeric - grads.input[0, i]) < 1e-4
    print(f"✅ Worst parameter gradient error {worst:.2e}")


def test_single_sample_shapes():
    """Test that unbatched inputs give unbatched outputs and gradients."""
    print("\n=== Testing unbatched forward ===")
    params = _smooth_network()
    out, tape = forward(params, np.ones(3))
    assert out.shape == (2,)
    grads = backward(tape, np.ones(2))
    assert grads.input.shape == (3,)
    try:
        forward(params, np.ones(4))
        raise AssertionError("wrong input size accepted")
    except InvalidArgumentError:
        pass
    print("✅ Shapes follow the input")


def test_stale_tape_rejected():
    """Test that a tape recorded before a parameter update cannot be replayed."""
    print("\n=== Testing stale tapes ===")
    params = _smooth_network()
    _, tape = forward(params, np.ones((2, 3)))
    grads = backward(tape, np.ones((2, 2)))
    adam_step(AdamState.create(params), params, grads)
    try:
        backward(tape, np.ones((2, 2)))
        raise AssertionError("stale tape accepted")
    except StaleTapeError:
        pass
    print("✅ StaleTapeError raised after an update")


def test_adam_reduces_loss():
    """Test that Adam fits a linear map."""
    print("\n=== Testing Adam ===")
    rng = np.random.default_rng(2)
    params = MlpParams.mlp(2, [16], 1, rng)
    state = AdamState.create(params, learning_rate=1e-2)
    x = rng.uniform(-1, 1, size=(128, 2))
    y = (x @ np.array([1.5, -0.5]))[:, None]

    def loss() -> float:
        return float(np.mean((predict(params, x) - y) ** 2))

    before = loss()
    for _ in range(300):
        out, tape = forward(params, x)
        adam_step(state, params, backward(tape, 2.0 * (out - y) / y.size))
    after = loss()
    assert after < 0.05 * before, (before, after)
    print(f"✅ MSE {before:.4f} -> {after:.6f}")


def test_polyak_update():
    """Test soft target updates at both ends and in the middle."""
    print("\n=== Testing polyak averaging ===")
    source = _smooth_network(seed=1)
    target = _smooth_network(seed=2)
    original = [p.copy() for p in target.parameters()]
    polyak_update(target, source, 0.5)
    for t, s, o in zip(target.parameters(), source.parameters(), original):
        assert np.allclose(t, 0.5 * (s + o))
    polyak_update(target, source, 1.0)
    for t, s in zip(target.parameters(), source.parameters()):
        assert np.allclose(t, s)
    print("✅ Target moves toward the source by the coefficient")


def test_checkpoint_round_trip():
    """Test DPCNN1 save and load, including error cases."""
    print("\n=== Testing checkpoints ===")
    params = _smooth_network()
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "nested", "net.dpcnn")
        tensors = params.to_tensors("actor")
        tensors["scalar"] = np.array(3.5)
        save_checkpoint(path, tensors)
        loaded = load_checkpoint(path)
        assert list(loaded) == list(tensors)
        restored = MlpParams.from_tensors(loaded, "actor")
        x = np.linspace(-1, 1, 9).reshape(3, 3)
        assert np.array_equal(predict(restored, x), predict(params, x))
        assert float(loaded["scalar"]) == 3.5

        try:
            MlpParams.from_tensors(loaded, "critic")
            raise AssertionError("missing network accepted")
        except CheckpointError:
            pass

        with open(path, "rb") as f:
            data = f.read()
        with open(path, "wb") as f:
            f.write(data[:-5])
        try:
            load_checkpoint(path)
            raise AssertionError("truncated checkpoint accepted")
        except CheckpointError:
            pass

        bogus = os.path.join(tmp, "bogus.dpcnn")
        with open(bogus, "wb") as f:
            f.write(b"NOTNN")
        try:
            load_checkpoint(bogus)
            raise AssertionError("bad magic accepted")
        except CheckpointError:
            pass

        try:
            load_checkpoint(os.path.join(tmp, "absent.dpcnn"))
            raise AssertionError("missing file accepted")
        except MissingArtifactError:
            pass
    print("✅ Checkpoints round-trip and bad files are rejected")


def main():
    """Run all tests."""
    logging.basicConfig(level=logging.WARNING)

    tests = [
        ("Gradients", test_gradients_match_finite_differences),
        ("Unbatched forward", test_single_sample_shapes),
        ("Stale tape", test_stale_tape_rejected),
        ("Adam", test_adam_reduces_loss),
        ("Polyak update", test_polyak_update),
        ("Checkpoints", test_checkpoint_round_trip),
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
