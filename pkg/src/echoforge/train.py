"""Training: seeded mini-batch Adam with per-iteration augmentation, fixed
epoch budgets (no schedule, no early stopping), and the two-step scheme that
pretrains a user-independent model and fine-tunes it per user.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .augment import AugmentPolicy, augment_batch
from .errors import ConfigError
from .model import ModelParams, ModelSpec, init_params, loss_and_grad, predict, softmax
from . import model as _model

Data = tuple[np.ndarray, np.ndarray]  # (X float32 (n,155,70,8), y int64 (n,))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.0002
    batch_size: int = 8
    epochs_base: int = 150
    epochs_finetune: int = 150
    loss: str = "cross_entropy"
    seed: int = 0
    augment: AugmentPolicy = field(default_factory=AugmentPolicy)
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self) -> None:
        if self.learning_rate <= 0 or self.batch_size <= 0:
            raise ConfigError("learning_rate and batch_size must be positive")
        if self.epochs_base < 0 or self.epochs_finetune < 0:
            raise ConfigError("epoch counts must be non-negative")
        if self.loss != "cross_entropy":
            raise ConfigError(f"unsupported loss {self.loss!r}")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "epochs_base": self.epochs_base,
            "epochs_finetune": self.epochs_finetune,
            "loss": self.loss,
            "seed": self.seed,
            "augment": {
                "max_shift": self.augment.max_shift,
                "jitter_prob": self.augment.jitter_prob,
                "jitter_low": self.augment.jitter_low,
                "jitter_high": self.augment.jitter_high,
            },
            "beta1": self.beta1,
            "beta2": self.beta2,
            "adam_eps": self.adam_eps,
        }


def _as_data(data) -> Data:
    x, y = data
    x = np.asarray(x, dtype=np.float32)
    y = np.asarray(y, dtype=np.int64)
    if x.ndim != 4 or len(x) != len(y):
        raise ConfigError(f"bad training data: X {x.shape}, y {y.shape}")
    return x, y


def evaluate(params: ModelParams, data: Data) -> float:
    x, y = _as_data(data)
    pred, _ = predict(params, x)
    return float((pred == y).mean())


class _Adam:
    def __init__(self, arrays: Mapping[str, np.ndarray], config: TrainConfig):
        self.m = {k: np.zeros_like(v) for k, v in arrays.items()}
        self.v = {k: np.zeros_like(v) for k, v in arrays.items()}
        self.t = 0
        self.config = config

    def step(self, arrays: dict[str, np.ndarray], grads: Mapping[str, np.ndarray]) -> None:
        c = self.config
        self.t += 1
        bias1 = 1.0 - c.beta1**self.t
        bias2 = 1.0 - c.beta2**self.t
        for key, grad in grads.items():
            m = self.m[key]
            v = self.v[key]
            m *= c.beta1
            m += (1.0 - c.beta1) * grad
            v *= c.beta2
            v += (1.0 - c.beta2) * grad * grad
            arrays[key] -= (c.learning_rate / bias1) * m / (
                np.sqrt(v / bias2) + c.adam_eps
            )


def train(
    params: ModelParams,
    train_data: Data,
    config: TrainConfig,
    val_data: Data | None = None,
    epochs: int | None = None,
    seed: int | None = None,
) -> tuple[ModelParams, list[dict]]:
    """Run seeded mini-batch training for exactly the configured number of
    epochs and return (updated params, per-epoch metrics log).

    Every source of randomness (shuffling, augmentation, dropout) comes from
    one generator, so identical (data, config, seed) reproduce bit-identical
    parameters and logs. The input params object is not mutated.
    """
    x, y = _as_data(train_data)
    if len(x) == 0:
        raise ConfigError("training set is empty")
    epochs = config.epochs_base if epochs is None else epochs
    rng = np.random.default_rng(config.seed if seed is None else seed)
    params = params.copy()
    if epochs == 0:
        return params, []

    optimizer = _Adam(params.arrays, config)
    log: list[dict] = []
    n = len(x)
    for epoch in range(epochs):
        order = rng.permutation(n)
        total_loss = 0.0
        correct = 0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            xb = augment_batch(x[idx], config.augment, rng)
            loss, grads, logits = _model_loss(params, xb, y[idx], rng)
            optimizer.step(params.arrays, grads)
            total_loss += loss * len(idx)
            correct += int((logits.argmax(axis=1) == y[idx]).sum())
        row = {
            "epoch": epoch,
            "train_loss": total_loss / n,
            "train_acc": correct / n,
            "val_acc": evaluate(params, val_data) if val_data is not None else float("nan"),
        }
        log.append(row)
    return params, log


def _model_loss(params, xb, yb, rng):
    """loss_and_grad plus the training-mode logits for the accuracy log."""
    a = params.arrays
    dtype = next(iter(a.values())).dtype
    xs = _model.standardize(_model._as_batch(xb, dtype)).transpose(0, 3, 1, 2)
    logits, caches = _model._forward(params, np.ascontiguousarray(xs), "train", rng)
    n = xs.shape[0]
    probs = softmax(logits.astype(np.float64))
    loss = float(-np.log(np.maximum(probs[np.arange(n), yb], 1e-300)).mean())
    dlogits = probs
    dlogits[np.arange(n), yb] -= 1.0
    dlogits = (dlogits / n).astype(dtype)
    grads = _model._backward(params, caches, dlogits)
    return loss, grads, logits


def two_step_train(
    participant_data: Mapping[str, Data],
    target: str,
    config: TrainConfig,
    spec: ModelSpec | None = None,
    target_train: Data | None = None,
    val_data: Data | None = None,
) -> tuple[ModelParams, ModelParams, list[dict], list[dict]]:
    """Pretrain on everyone except the target, then fine-tune on the target's
    training split.

    Returns (fine-tuned params, frozen base params, base log, fine-tune log).
    With epochs_finetune = 0 the fine-tuned params equal the base model,
    which is the fully user-independent condition.
    """
    if target not in participant_data:
        raise ConfigError(f"unknown target participant {target!r}")
    others = [k for k in sorted(participant_data) if k != target]
    if not others:
        raise ConfigError("two-step training needs at least 2 participants")
    xs, ys = zip(*(_as_data(participant_data[k]) for k in others))
    base_data = (np.concatenate(xs), np.concatenate(ys))

    spec = spec if spec is not None else ModelSpec()
    base, base_log = train(
        init_params(spec, config.seed),
        base_data,
        config,
        val_data=val_data,
        epochs=config.epochs_base,
        seed=config.seed,
    )
    if config.epochs_finetune == 0:
        return base.copy(), base, base_log, []
    ft_data = _as_data(target_train if target_train is not None else participant_data[target])
    fine, ft_log = train(
        base,
        ft_data,
        config,
        val_data=val_data,
        epochs=config.epochs_finetune,
        seed=config.seed + 1,
    )
    return fine, base, base_log, ft_log


def metrics_to_csv(log: Sequence[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "train_acc", "val_acc"])
        for row in log:
            writer.writerow(
                [row["epoch"], repr(row["train_loss"]), repr(row["train_acc"]),
                 repr(row["val_acc"])]
            )
