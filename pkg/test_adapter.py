#!/usr/bin/env python3
"""
Tests for the latent adapter: datasets, temporal split, training and encoder
migration through a frozen decoder.
"""

import logging
import os
import sys
import tempfile

import numpy as np

from disturbance_control.adapter import (
    AdapterDataset,
    AdapterSample,
    encode,
    latent_summary,
    load_adapter,
    migrate_encoder,
    save_adapter,
    shuffled_targets,
    temporal_split,
    train_adapter,
)
from disturbance_control.errors import DimensionError, EmptyDatasetError, MissingArtifactError
from disturbance_control.state import LATENT_DIM, ArmCommand, ArmState, BodyState

JOINTS = 4


def _synthetic_dataset(n_trajectories: int = 3, length: int = 400, seed: int = 0) -> AdapterDataset:
    """Inputs in the adapter layout with next rates driven by a few of them."""
    rng = np.random.default_rng(seed)
    n = n_trajectories * length
    inputs = rng.uniform(-1.0, 1.0, size=(n, 4 + 2 * JOINTS))
    targets = np.column_stack([
        0.8 * inputs[:, 2] + 0.3 * np.sin(2.0 * inputs[:, 5]),
        -0.6 * inputs[:, 3] + 0.2 * inputs[:, 6] * inputs[:, 0],
    ])
    ids = np.repeat(np.arange(n_trajectories), length)
    return AdapterDataset(inputs=inputs, targets=targets, trajectory_ids=ids, joint_count=JOINTS)


def test_temporal_split():
    """Test that the holdout is the tail of each trajectory."""
    print("\n=== Testing temporal split ===")
    dataset = _synthetic_dataset(n_trajectories=2, length=10)
    train, holdout = temporal_split(dataset, 0.2)
    assert list(holdout) == [8, 9, 18, 19]
    assert len(train) == 16 and not set(train) & set(holdout)
    train, holdout = temporal_split(dataset, 0.0)
    assert len(holdout) == 0 and len(train) == 20
    print("✅ Last 20% of each trajectory held out")


def test_dataset_from_samples():
    """Test stacking samples into feature rows, the path random-motion collection uses."""
    print("\n=== Testing dataset from samples ===")
    rng = np.random.default_rng(4)
    samples = []
    for _ in range(6):
        body = BodyState(position=[0.0, 0.0, 0.28], orientation_rpy=rng.uniform(-0.2, 0.2, 3),
                         linear_velocity=np.zeros(3), angular_velocity=rng.normal(size=3))
        samples.append(AdapterSample(body=body, arm=ArmState(joint_angles=rng.normal(size=JOINTS)),
                                     arm_cmd=ArmCommand(desired_joint_positions=rng.normal(size=JOINTS)),
                                     next_drp=rng.normal(size=2)))
    dataset = AdapterDataset.from_samples(samples, [0, 0, 0, 1, 1, 1], joint_count=JOINTS)
    assert dataset.inputs.shape == (6, 4 + 2 * JOINTS) and dataset.joint_count == JOINTS
    first = samples[0]
    assert np.allclose(dataset.inputs[0, :4], [first.body.roll, first.body.pitch,
                                               first.body.angular_velocity[0], first.body.angular_velocity[1]])
    assert np.array_equal(dataset.inputs[0, 4:4 + JOINTS], first.arm.joint_angles)
    assert np.array_equal(dataset.inputs[0, 4 + JOINTS:], first.arm_cmd.desired_joint_positions)
    assert np.array_equal(dataset.targets[5], samples[5].next_drp)
    assert list(dataset.trajectory_ids) == [0, 0, 0, 1, 1, 1]
    try:
        AdapterDataset.from_samples([])
        raise AssertionError("empty sample list accepted")
    except EmptyDatasetError:
        pass
    try:
        AdapterSample(body=first.body, arm=first.arm, arm_cmd=first.arm_cmd, next_drp=[0.0, 0.0, 0.0])
        raise AssertionError("three next rates accepted")
    except DimensionError:
        pass
    print("✅ Samples stack into the encoder layout")


def test_dataset_csv_round_trip():
    """Test that a dataset survives CSV save and load exactly."""
    print("\n=== Testing dataset CSV ===")
    dataset = _synthetic_dataset(n_trajectories=2, length=25)
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "data", "regular.csv")
        assert dataset.save_csv(path) == len(dataset)
        loaded = AdapterDataset.load_csv(path)
        assert loaded.joint_count == JOINTS
        assert np.array_equal(loaded.inputs, dataset.inputs)
        assert np.array_equal(loaded.targets, dataset.targets)
        assert np.array_equal(loaded.trajectory_ids, dataset.trajectory_ids)
        try:
            AdapterDataset.load_csv(os.path.join(tmp, "missing.csv"))
            raise AssertionError("missing dataset accepted")
        except MissingArtifactError:
            pass
    print(f"✅ {len(dataset)} samples round-tripped")


def test_training_beats_mean_predictor():
    """Test that the adapter learns a learnable signal and not a shuffled one."""
    print("\n=== Testing adapter training ===")
    dataset = _synthetic_dataset()
    result = train_adapter(dataset, epochs=30, learning_rate=3e-3, batch_size=64, seed=0,
                           hidden_sizes=(32, 32), holdout_fraction=0.1, arm_name="regular")
    assert len(result.history) == 30
    assert result.samples_used == len(dataset)
    assert result.holdout_mse < 0.5 * result.baseline_variance, (result.holdout_mse, result.baseline_variance)

    noise = shuffled_targets(dataset, np.random.default_rng(3))
    control = train_adapter(noise, epochs=10, learning_rate=3e-3, batch_size=64, seed=0,
                            hidden_sizes=(32, 32), holdout_fraction=0.1)
    assert control.holdout_mse > 0.7 * control.baseline_variance
    print(f"✅ Holdout MSE {result.holdout_mse:.4f} vs variance {result.baseline_variance:.4f}; "
          f"shuffled {control.holdout_mse:.4f}")


def test_training_is_seeded():
    """Test that equal seeds give identical models."""
    print("\n=== Testing seeded training ===")
    dataset = _synthetic_dataset(n_trajectories=1, length=200)
    a = train_adapter(dataset, epochs=2, batch_size=32, seed=5, hidden_sizes=(8,))
    b = train_adapter(dataset, epochs=2, batch_size=32, seed=5, hidden_sizes=(8,))
    assert a.model.decoder_digest() == b.model.decoder_digest()
    assert a.holdout_mse == b.holdout_mse
    print("✅ Same seed, same weights")


def test_encode_and_checkpoint():
    """Test the latent of a live state and the adapter checkpoint."""
    print("\n=== Testing encode and checkpoint ===")
    dataset = _synthetic_dataset(n_trajectories=1, length=200)
    model = train_adapter(dataset, epochs=1, batch_size=32, seed=1, hidden_sizes=(8,)).model
    body = BodyState.standing(0.28)
    arm = ArmState(joint_angles=np.zeros(JOINTS))
    cmd = ArmCommand(desired_joint_positions=np.full(JOINTS, 0.2))
    latent = encode(model, body, arm, cmd)
    assert latent.z.shape == (LATENT_DIM,)
    try:
        encode(model, body, ArmState(joint_angles=np.zeros(8)), ArmCommand(desired_joint_positions=np.zeros(8)))
        raise AssertionError("wrong joint count accepted")
    except DimensionError:
        pass

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "adapter_regular.dpcnn")
        save_adapter(model, path)
        restored = load_adapter(path, arm_name="regular")
        assert restored.decoder_digest() == model.decoder_digest()
        assert np.allclose(encode(restored, body, arm, cmd).z, latent.z)

    summary = latent_summary(model, dataset)
    assert len(summary["mean"]) == LATENT_DIM and summary["count"] == len(dataset)
    print(f"✅ Latent {np.round(latent.z, 4)} survives a checkpoint round trip")


def test_migration_keeps_decoder():
    """Test that encoder migration never changes the decoder."""
    print("\n=== Testing encoder migration ===")
    source = train_adapter(_synthetic_dataset(), epochs=10, learning_rate=3e-3, batch_size=64,
                           seed=0, hidden_sizes=(32, 32)).model
    digest = source.decoder_digest()
    new_arm = _synthetic_dataset(seed=4)
    migrated = migrate_encoder(source.decoder, new_arm, budget=600, epochs=10, learning_rate=3e-3,
                               batch_size=64, seed=2, hidden_sizes=(32, 32), arm_name="longer")
    assert migrated.samples_used == 600
    assert migrated.model.decoder is source.decoder
    assert migrated.model.decoder_digest() == digest
    assert migrated.holdout_mse < migrated.baseline_variance
    print(f"✅ Decoder digest unchanged, migrated holdout MSE {migrated.holdout_mse:.4f}")


def test_empty_dataset_rejected():
    """Test that training on nothing raises."""
    print("\n=== Testing empty dataset ===")
    empty = AdapterDataset(inputs=np.zeros((0, 12)), targets=np.zeros((0, 2)), trajectory_ids=[])
    for call in (lambda: train_adapter(empty), lambda: migrate_encoder(
            train_adapter(_synthetic_dataset(1, 50), epochs=1, hidden_sizes=(4,)).model.decoder, empty)):
        try:
            call()
            raise AssertionError("empty dataset accepted")
        except EmptyDatasetError:
            pass
    print("✅ EmptyDatasetError raised")


def main():
    """Run all tests."""
    logging.basicConfig(level=logging.WARNING)

    tests = [
        ("Temporal split", test_temporal_split),
        ("Dataset from samples", test_dataset_from_samples),
        ("Dataset CSV", test_dataset_csv_round_trip),
        ("Training beats mean predictor", test_training_beats_mean_predictor),
        ("Seeded training", test_training_is_seeded),
        ("Encode and checkpoint", test_encode_and_checkpoint),
        ("Encoder migration", test_migration_keeps_decoder),
        ("Empty dataset", test_empty_dataset_rejected),
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
