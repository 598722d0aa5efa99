import numpy as np
import pytest

import echoforge as ef


@pytest.fixture(scope="session")
def gesture_tensors_60():
    """Six synthetic gesture classes, 10 instances each."""
    return ef.synth_gesture_set(ef.builtin_scripts(), 10, seed=7)


@pytest.fixture(scope="session")
def gesture_arrays_60(gesture_tensors_60):
    x = np.stack([t.data for t in gesture_tensors_60]).astype(np.float32)
    y = np.array([t.label.class_index for t in gesture_tensors_60], dtype=np.int64)
    return x, y


@pytest.fixture(scope="session")
def corpus_240():
    """Single-wearer corpus: 6 classes x 40 instances spread over 6 sessions
    (7,7,7,7,6,6 per class) with per-session geometry offsets."""
    return ef.build_synthetic_instances(
        participants=("P1",),
        sessions=6,
        reps_per_session=(7, 7, 7, 7, 6, 6),
        seed=11,
    )


@pytest.fixture(scope="session")
def multiuser_instances():
    """Four synthetic wearers with distinct device offsets and gesture
    tempos; the last session is oversized so held-out accuracy has a usable
    resolution."""
    return ef.build_synthetic_instances(
        participants=("P1", "P2", "P3", "P4"),
        sessions=6,
        reps_per_session=(2, 2, 2, 2, 2, 8),
        seed=23,
        participant_spread=0.010,
        participant_tempo=0.12,
    )


@pytest.fixture(scope="session")
def tiny_spec():
    """Small double-precision-friendly model covering every layer type:
    strided residual block with projection, identity residual block, pool,
    dropout, linear head."""
    return ef.ModelSpec(
        blocks=(ef.BlockSpec(4, 3, 2), ef.BlockSpec(4, 3, 1)),
        in_channels=3,
        dropout_rate=0.6,
        output_dim=5,
    )
