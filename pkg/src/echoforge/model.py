"""A compact residual convolutional classifier over echo tensors, with
hand-written forward and backward passes (numpy only, no autograd).

The default desk-scale backbone is four residual blocks of widths
(16, 32, 64, 128), each two 3x3 convolutions with a stride-2 entry, followed
by global average pooling, dropout, and a 30-way linear head. Deeper
encoders are a configuration (more blocks), not a different code path.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .echo import EchoTensor, TENSOR_BINS, TENSOR_CHANNELS, TENSOR_FRAMES
from .errors import ConfigError, NumericError

STANDARDIZE_EPS = 1e-8


@dataclass(frozen=True)
class BlockSpec:
    out_channels: int
    kernel: int = 3
    stride: int = 1
    residual: bool = True


@dataclass(frozen=True)
class ModelSpec:
    blocks: tuple[BlockSpec, ...] = (
        BlockSpec(16, 3, 2),
        BlockSpec(32, 3, 2),
        BlockSpec(64, 3, 2),
        BlockSpec(128, 3, 2),
    )
    in_channels: int = TENSOR_CHANNELS
    dropout_rate: float = 0.6
    output_dim: int = 30

    def __post_init__(self) -> None:
        if not self.blocks:
            raise ConfigError("model needs at least one block")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout_rate {self.dropout_rate} outside [0, 1)")
        if self.output_dim < 2:
            raise ConfigError("output_dim must be >= 2")

    def to_dict(self) -> dict:
        return {
            "blocks": [[b.out_channels, b.kernel, b.stride, b.residual] for b in self.blocks],
            "in_channels": self.in_channels,
            "dropout_rate": self.dropout_rate,
            "output_dim": self.output_dim,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ModelSpec":
        return cls(
            blocks=tuple(BlockSpec(c, k, s, bool(r)) for c, k, s, r in doc["blocks"]),
            in_channels=doc["in_channels"],
            dropout_rate=doc["dropout_rate"],
            output_dim=doc["output_dim"],
        )


@dataclass
class ModelParams:
    spec: ModelSpec
    arrays: dict[str, np.ndarray]
    seed: int
    version: int = 1

    def copy(self) -> "ModelParams":
        return ModelParams(self.spec, {k: v.copy() for k, v in self.arrays.items()},
                           self.seed, self.version)


def _needs_projection(spec: ModelSpec, i: int) -> bool:
    block = spec.blocks[i]
    cin = spec.in_channels if i == 0 else spec.blocks[i - 1].out_channels
    return block.residual and (block.stride != 1 or cin != block.out_channels)


def init_params(spec: ModelSpec, seed: int, dtype=np.float32) -> ModelParams:
    """He fan-in initialization for every convolution and the linear head,
    zero biases; fully determined by the seed."""
    rng = np.random.default_rng(seed)

    def he(shape, fan_in):
        return (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(dtype)

    arrays: dict[str, np.ndarray] = {}
    cin = spec.in_channels
    for i, block in enumerate(spec.blocks):
        k, cout = block.kernel, block.out_channels
        arrays[f"block{i}.conv1.w"] = he((cout, cin, k, k), cin * k * k)
        arrays[f"block{i}.conv1.b"] = np.zeros(cout, dtype)
        arrays[f"block{i}.conv2.w"] = he((cout, cout, k, k), cout * k * k)
        arrays[f"block{i}.conv2.b"] = np.zeros(cout, dtype)
        if _needs_projection(spec, i):
            arrays[f"block{i}.proj.w"] = he((cout, cin, 1, 1), cin)
            arrays[f"block{i}.proj.b"] = np.zeros(cout, dtype)
        cin = cout
    arrays["head.w"] = he((spec.output_dim, cin), cin)
    arrays["head.b"] = np.zeros(spec.output_dim, dtype)
    return ModelParams(spec, arrays, seed)


# ---------------------------------------------------------------------------
# Layer primitives

def _im2col(x: np.ndarray, k: int, stride: int, pad: int):
    n, c, h, w = x.shape
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    ho = (x.shape[2] - k) // stride + 1
    wo = (x.shape[3] - k) // stride + 1
    s0, s1, s2, s3 = x.strides
    windows = np.lib.stride_tricks.as_strided(
        x, (n, c, ho, wo, k, k), (s0, s1, stride * s2, stride * s3, s2, s3)
    )
    cols = np.ascontiguousarray(windows.transpose(0, 2, 3, 1, 4, 5))
    return cols.reshape(n * ho * wo, c * k * k), ho, wo


def _col2im(dcols: np.ndarray, x_shape, k: int, stride: int, pad: int) -> np.ndarray:
    n, c, h, w = x_shape
    ho = (h + 2 * pad - k) // stride + 1
    wo = (w + 2 * pad - k) // stride + 1
    # one big transpose copy beats k*k strided gather-transposes
    dc = np.ascontiguousarray(
        dcols.reshape(n, ho, wo, c, k, k).transpose(0, 3, 4, 5, 1, 2)
    )
    dx = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=dcols.dtype)
    for i in range(k):
        for j in range(k):
            dx[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += (
                dc[:, :, i, j]
            )
    if pad:
        dx = dx[:, :, pad:-pad, pad:-pad]
    return dx


def conv_forward(x, w, b, stride: int, pad: int):
    cout, cin, k, _ = w.shape
    cols, ho, wo = _im2col(x, k, stride, pad)
    out = cols @ w.reshape(cout, -1).T + b
    out = out.reshape(x.shape[0], ho, wo, cout).transpose(0, 3, 1, 2)
    return out, (cols, x.shape, w, stride, pad)


def conv_backward(dout, cache):
    cols, x_shape, w, stride, pad = cache
    cout, cin, k, _ = w.shape
    dflat = np.ascontiguousarray(dout.transpose(0, 2, 3, 1)).reshape(-1, cout)
    db = dflat.sum(axis=0)
    dw = (dflat.T @ cols).reshape(w.shape)
    dcols = dflat @ w.reshape(cout, -1)
    dx = _col2im(dcols, x_shape, k, stride, pad)
    return dx, dw, db


def global_avg_pool(x):
    return x.mean(axis=(2, 3)), x.shape


def global_avg_pool_backward(dout, x_shape):
    n, c, h, w = x_shape
    return np.broadcast_to(dout[:, :, None, None], x_shape) / (h * w)


def dropout_forward(x, rate: float, rng: np.random.Generator | None):
    """Inverted dropout: train-time activations are scaled by 1/(1-rate) so
    evaluation applies the identity."""
    if rng is None or rate == 0.0:
        return x, None
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    mask = mask.astype(x.dtype)
    return x * mask, mask

def dropout_backward(dout, mask):
    return dout if mask is None else dout * mask


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def standardize(x: np.ndarray) -> np.ndarray:
    """Per-tensor mean/std normalization over all pixels and channels."""
    axes = tuple(range(1, x.ndim))
    mean = x.mean(axis=axes, keepdims=True)
    std = x.std(axis=axes, keepdims=True)
    return (x - mean) / (std + STANDARDIZE_EPS)


# ---------------------------------------------------------------------------
# Whole-network forward/backward

def _as_batch(batch, dtype) -> np.ndarray:
    if isinstance(batch, EchoTensor):
        batch = [batch]
    if isinstance(batch, (list, tuple)) and batch and isinstance(batch[0], EchoTensor):
        batch = np.stack([t.data for t in batch])
    x = np.asarray(batch, dtype=dtype)
    if x.ndim == 3:
        x = x[None]
    if x.ndim != 4:
        raise ConfigError(f"expected a (batch, frames, bins, channels) array, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NumericError("batch contains non-finite values")
    return x


def _forward(params: ModelParams, x: np.ndarray, mode: str, rng):
    """Runs the network on pre-standardized NCHW input, recording caches."""
    a = params.arrays
    caches = {"blocks": []}
    for i, block in enumerate(params.spec.blocks):
        identity = x
        y1, c1 = conv_forward(
            x, a[f"block{i}.conv1.w"], a[f"block{i}.conv1.b"], block.stride,
            block.kernel // 2,
        )
        a1 = np.maximum(y1, 0.0)
        y2, c2 = conv_forward(
            a1, a[f"block{i}.conv2.w"], a[f"block{i}.conv2.b"], 1, block.kernel // 2
        )
        cproj = None
        if block.residual:
            if _needs_projection(params.spec, i):
                identity, cproj = conv_forward(
                    x, a[f"block{i}.proj.w"], a[f"block{i}.proj.b"], block.stride, 0
                )
            z = y2 + identity
        else:
            z = y2
        x = np.maximum(z, 0.0)
        caches["blocks"].append((c1, y1, c2, cproj, z, block))
    pooled, pool_shape = global_avg_pool(x)
    caches["pool_shape"] = pool_shape
    dropped, mask = dropout_forward(
        pooled, params.spec.dropout_rate if mode == "train" else 0.0, rng
    )
    caches["dropout_mask"] = mask
    caches["head_in"] = dropped
    logits = dropped @ a["head.w"].T + a["head.b"]
    return logits, caches


def forward(params: ModelParams, batch, mode: str = "eval", rng=None) -> np.ndarray:
    """Compute logits for a batch of echo tensors.

    Eval mode is deterministic; train mode applies inverted dropout and
    requires a random generator.
    """
    if mode not in ("train", "eval"):
        raise ConfigError(f"unknown mode {mode!r}")
    if mode == "train" and rng is None:
        raise ConfigError("train mode requires an rng for dropout")
    dtype = next(iter(params.arrays.values())).dtype
    x = standardize(_as_batch(batch, dtype)).transpose(0, 3, 1, 2)
    logits, _ = _forward(params, np.ascontiguousarray(x), mode, rng)
    return logits


def loss_and_grad(
    params: ModelParams, batch, labels, rng=None
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy over the batch and its gradient for every
    parameter, by backpropagation.

    With an rng, dropout is active (training-mode gradients); without one the
    pass is deterministic, which is the configuration the finite-difference
    checks verify.
    """
    a = params.arrays
    dtype = next(iter(a.values())).dtype
    x = standardize(_as_batch(batch, dtype)).transpose(0, 3, 1, 2)
    y = np.asarray(labels, dtype=np.int64).ravel()
    if len(y) != x.shape[0]:
        raise ConfigError(f"{x.shape[0]} tensors but {len(y)} labels")
    if y.min() < 0 or y.max() >= params.spec.output_dim:
        raise ConfigError(
            f"labels outside [0, {params.spec.output_dim}): {y.min()}..{y.max()}"
        )

    logits, caches = _forward(params, np.ascontiguousarray(x), "train" if rng else "eval", rng)
    n = x.shape[0]
    probs = softmax(logits.astype(np.float64))
    loss = float(-np.log(np.maximum(probs[np.arange(n), y], 1e-300)).mean())

    dlogits = probs
    dlogits[np.arange(n), y] -= 1.0
    dlogits = (dlogits / n).astype(dtype)
    return loss, _backward(params, caches, dlogits)


def _backward(params: ModelParams, caches: dict, dlogits: np.ndarray) -> dict[str, np.ndarray]:
    """Backpropagate a logits gradient through the recorded forward caches."""
    a = params.arrays
    grads: dict[str, np.ndarray] = {}
    grads["head.w"] = dlogits.T @ caches["head_in"]
    grads["head.b"] = dlogits.sum(axis=0)
    dh = dlogits @ a["head.w"]
    dh = dropout_backward(dh, caches["dropout_mask"])
    dx = global_avg_pool_backward(dh, caches["pool_shape"])

    for i in reversed(range(len(params.spec.blocks))):
        c1, y1, c2, cproj, z, block = caches["blocks"][i]
        dz = dx * (z > 0)
        da1, dw2, db2 = conv_backward(dz, c2)
        grads[f"block{i}.conv2.w"] = dw2
        grads[f"block{i}.conv2.b"] = db2
        dy1 = da1 * (y1 > 0)
        dx, dw1, db1 = conv_backward(dy1, c1)
        grads[f"block{i}.conv1.w"] = dw1
        grads[f"block{i}.conv1.b"] = db1
        if block.residual:
            if cproj is not None:
                dident, dwp, dbp = conv_backward(dz, cproj)
                grads[f"block{i}.proj.w"] = dwp
                grads[f"block{i}.proj.b"] = dbp
                dx = dx + dident
            else:
                dx = dx + dz
    return grads


def predict(params: ModelParams, tensors, chunk: int = 32):
    """Eval-mode class predictions.

    Returns (class_indices, confidences); ties resolve to the lowest class
    index, confidence is the softmax maximum.
    """
    dtype = next(iter(params.arrays.values())).dtype
    x = _as_batch(tensors, dtype)
    indices, confidences = [], []
    for start in range(0, x.shape[0], chunk):
        logits = forward(params, x[start : start + chunk])
        p = softmax(logits.astype(np.float64))
        indices.append(p.argmax(axis=1))
        confidences.append(p.max(axis=1))
    return np.concatenate(indices), np.concatenate(confidences)


# ---------------------------------------------------------------------------
# Checkpoints

_CKPT_MAGIC = b"EFCP"
_CKPT_VERSION = 1


def save_checkpoint(params: ModelParams, path, extra: dict | None = None) -> None:
    """Binary checkpoint (per-layer id, shape, little-endian f32 data) plus a
    JSON config snapshot sidecar at <path>.json."""
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sHq I", _CKPT_MAGIC, _CKPT_VERSION, params.seed,
                             len(params.arrays)))
        for name in sorted(params.arrays):
            arr = np.ascontiguousarray(params.arrays[name], dtype="<f4")
            encoded = name.encode()
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            fh.write(arr.tobytes())
    sidecar = {
        "version": _CKPT_VERSION,
        "seed": params.seed,
        "spec": params.spec.to_dict(),
    }
    if extra:
        sidecar["config"] = extra
    with open(path.with_name(path.name + ".json"), "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path) -> ModelParams:
    path = Path(path)
    sidecar_path = path.with_name(path.name + ".json")
    if not sidecar_path.exists():
        raise ConfigError(f"missing checkpoint sidecar {sidecar_path}")
    sidecar = json.loads(sidecar_path.read_text())
    spec = ModelSpec.from_dict(sidecar["spec"])

    with open(path, "rb") as fh:
        header = fh.read(struct.calcsize("<4sHq I"))
        magic, version, seed, count = struct.unpack("<4sHq I", header)
        if magic != _CKPT_MAGIC:
            raise ConfigError(f"{path}: not a checkpoint (magic {magic!r})")
        if version != _CKPT_VERSION:
            raise ConfigError(f"{path}: unsupported checkpoint version {version}")
        arrays: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode()
            (ndim,) = struct.unpack("<B", fh.read(1))
            shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
            data = np.frombuffer(fh.read(4 * int(np.prod(shape))), dtype="<f4")
            arrays[name] = data.reshape(shape).astype(np.float32)
    return ModelParams(spec, arrays, seed, version)
