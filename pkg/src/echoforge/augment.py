"""Training-time augmentation: vertical (distance-axis) shifts and per-pixel
amplitude jitter.

Shifts mimic small sensor-to-hand distance changes after remounting the
device; jitter desensitizes the classifier to absolute reflection strength.
One shift amount applies to all 8 channels of a tensor so original and
differential channels stay geometrically consistent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .echo import EchoTensor
from .errors import ConfigError


@dataclass(frozen=True)
class AugmentPolicy:
    max_shift: int = 6
    jitter_prob: float = 0.8
    jitter_low: float = 0.95
    jitter_high: float = 1.05

    def __post_init__(self) -> None:
        if not 0 <= self.max_shift <= 69:
            raise ConfigError(f"max_shift {self.max_shift} outside [0, 69]")
        if not 0.0 <= self.jitter_prob <= 1.0:
            raise ConfigError(f"jitter_prob {self.jitter_prob} outside [0, 1]")
        if not 0.0 < self.jitter_low <= self.jitter_high:
            raise ConfigError(
                f"jitter bounds ({self.jitter_low}, {self.jitter_high}) invalid"
            )


def _shift_array(data: np.ndarray, k: int) -> np.ndarray:
    """Shift along the distance axis (axis -2), zero-filling vacated rows."""
    out = np.zeros_like(data)
    if k > 0:
        out[..., k:, :] = data[..., :-k, :]
    elif k < 0:
        out[..., :k, :] = data[..., -k:, :]
    else:
        out[...] = data
    return out


def vertical_shift(t: EchoTensor, k: int, max_shift: int = 6) -> EchoTensor:
    """Shift every channel by k distance bins (positive = away from the
    sensor); vacated rows are zero-filled, shape and label are preserved."""
    if abs(k) > max_shift:
        raise ConfigError(f"shift {k} exceeds the {max_shift}-bin limit")
    return EchoTensor(_shift_array(t.data, k), t.label)


def amplitude_jitter(
    t: EchoTensor, policy: AugmentPolicy, rng: np.random.Generator
) -> EchoTensor:
    """With probability jitter_prob, multiply every pixel independently by a
    uniform factor in [jitter_low, jitter_high); otherwise return the tensor
    unchanged. Deterministic given the generator state."""
    if rng.random() >= policy.jitter_prob:
        return t
    factors = policy.jitter_low + (policy.jitter_high - policy.jitter_low) * rng.random(
        t.data.shape, dtype=np.float32
    )
    return EchoTensor(t.data * factors, t.label)


def augment_tensor(
    t: EchoTensor, policy: AugmentPolicy, rng: np.random.Generator
) -> EchoTensor:
    """One training-iteration draw: a uniform shift in [-max_shift, max_shift]
    followed by the jitter coin."""
    k = int(rng.integers(-policy.max_shift, policy.max_shift + 1))
    return amplitude_jitter(vertical_shift(t, k, policy.max_shift), policy, rng)


def augment_batch(
    x: np.ndarray, policy: AugmentPolicy, rng: np.random.Generator
) -> np.ndarray:
    """Augment a (batch, frames, bins, channels) array, one independent draw
    per instance. Used by the training loop; semantics match augment_tensor."""
    out = np.empty_like(x)
    for i in range(x.shape[0]):
        k = int(rng.integers(-policy.max_shift, policy.max_shift + 1))
        shifted = _shift_array(x[i], k)
        if rng.random() < policy.jitter_prob:
            factors = policy.jitter_low + (
                policy.jitter_high - policy.jitter_low
            ) * rng.random(shifted.shape, dtype=np.float32)
            shifted = shifted * factors
        out[i] = shifted
    return out
