"""Evaluation quantities: accuracy, 30-class confusion matrices, per-class
and macro-averaged false-positive rates, fold averaging, and the
personalization-budget accuracy curve.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError
from .labels import N_CLASSES, all_labels
from .model import ModelParams
from .train import Data, TrainConfig, evaluate, train


@dataclass
class ConfusionMatrix:
    """Rows are truth, columns are prediction."""

    counts: np.ndarray
    class_names: tuple[str, ...] = field(
        default_factory=lambda: tuple(str(l) for l in all_labels())
    )

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts, dtype=np.int64)
        n = len(self.class_names)
        if self.counts.shape != (n, n):
            raise ConfigError(
                f"confusion matrix shape {self.counts.shape} != ({n}, {n})"
            )
        if (self.counts < 0).any():
            raise ConfigError("confusion matrix counts must be non-negative")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts) / self.total) if self.total else float("nan")


def confusion(truths, predictions, n_classes: int = N_CLASSES,
              class_names: Sequence[str] | None = None) -> ConfusionMatrix:
    """Tally a confusion matrix from parallel truth/prediction sequences."""
    t = np.asarray(truths, dtype=np.int64)
    p = np.asarray(predictions, dtype=np.int64)
    if t.shape != p.shape:
        raise ConfigError(f"{len(t)} truths but {len(p)} predictions")
    if len(t) and (min(t.min(), p.min()) < 0 or max(t.max(), p.max()) >= n_classes):
        raise ConfigError(f"labels outside [0, {n_classes})")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    if class_names is None and n_classes == N_CLASSES:
        return ConfusionMatrix(counts)
    names = tuple(class_names) if class_names else tuple(str(i) for i in range(n_classes))
    return ConfusionMatrix(counts, names)


def false_positive_rate(cm: ConfusionMatrix) -> tuple[np.ndarray, float]:
    """Per-class FP / (FP + TN) plus the macro average.

    For class c: FP is everything predicted c that is not c, TN is everything
    that is neither truly c nor predicted c. Classes where FP + TN = 0 have
    an undefined rate, reported as NaN and excluded from the macro average.
    """
    if cm.total == 0:
        raise ConfigError("empty confusion matrix")
    counts = cm.counts
    diag = np.diag(counts).astype(np.float64)
    col = counts.sum(axis=0).astype(np.float64)
    row = counts.sum(axis=1).astype(np.float64)
    fp = col - diag
    tn = cm.total - row - col + diag
    denom = fp + tn
    rates = np.where(denom > 0, fp / np.maximum(denom, 1.0), np.nan)
    defined = ~np.isnan(rates)
    macro = float(rates[defined].mean()) if defined.any() else float("nan")
    return rates, macro


def fold_average(folds: Sequence[tuple[str, dict]]) -> dict:
    """Aggregate per-fold metrics: unweighted mean accuracy, per-fold rows,
    and the summed confusion matrix when folds carry one."""
    if not folds:
        raise ConfigError("fold_average needs at least one fold")
    rows = []
    cms = []
    for name, m in folds:
        rows.append({"fold": name, "accuracy": float(m["accuracy"])})
        if "confusion" in m:
            cms.append(m["confusion"])
    report = {
        "folds": rows,
        "mean_accuracy": float(np.mean([r["accuracy"] for r in rows])),
        "n_folds": len(rows),
    }
    if cms:
        summed = ConfusionMatrix(
            np.sum([c.counts for c in cms], axis=0), cms[0].class_names
        )
        report["confusion"] = summed
    return report


def finetune_curve(
    sessions: Mapping[int, Data],
    held_out_session: int,
    base_params: ModelParams,
    budgets: Sequence[int],
    config: TrainConfig,
    epochs: int | None = None,
) -> list[tuple[int, float]]:
    """Accuracy on the held-out session as a function of how many of the
    target's sessions are spent on fine-tuning.

    Budget 0 evaluates the user-independent base model directly; budget n
    fine-tunes a copy of it on the target's first n sessions.
    """
    if held_out_session not in sessions:
        raise ConfigError(f"held-out session {held_out_session} not in the data")
    available = sorted(s for s in sessions if s != held_out_session)
    test = sessions[held_out_session]
    results = []
    for budget in budgets:
        if budget < 0 or budget > len(available):
            raise ConfigError(
                f"budget {budget} exceeds the {len(available)} available sessions"
            )
        if budget == 0:
            results.append((0, evaluate(base_params, test)))
            continue
        chosen = available[:budget]
        x = np.concatenate([sessions[s][0] for s in chosen])
        y = np.concatenate([sessions[s][1] for s in chosen])
        tuned, _ = train(
            base_params,
            (x, y),
            config,
            epochs=config.epochs_finetune if epochs is None else epochs,
            seed=config.seed + 1,
        )
        results.append((budget, evaluate(tuned, test)))
    return results


# ---------------------------------------------------------------------------
# Report output

def format_accuracy(acc: float) -> str:
    """Summary formatting: percentage with one decimal place."""
    return f"{100.0 * acc:.1f}%"


def report_json(report: dict, path) -> None:
    doc = dict(report)
    if "confusion" in doc:
        cm = doc.pop("confusion")
        doc["confusion_counts"] = cm.counts.tolist()
        doc["class_names"] = list(cm.class_names)
    doc["mean_accuracy_display"] = format_accuracy(report["mean_accuracy"])
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def report_csv(report: dict, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["fold", "accuracy"])
        for row in report["folds"]:
            writer.writerow([row["fold"], repr(row["accuracy"])])
        writer.writerow(["mean", repr(report["mean_accuracy"])])


def per_class_csv(cm: ConfusionMatrix, path) -> None:
    rates, macro = false_positive_rate(cm)
    recall = np.where(
        cm.counts.sum(axis=1) > 0,
        np.diag(cm.counts) / np.maximum(cm.counts.sum(axis=1), 1),
        np.nan,
    )
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class", "truth_count", "recall", "false_positive_rate"])
        for i, name in enumerate(cm.class_names):
            writer.writerow(
                [name, int(cm.counts[i].sum()), repr(float(recall[i])), repr(float(rates[i]))]
            )
        writer.writerow(["macro", cm.total, "", repr(macro)])


def confusion_png(cm: ConfusionMatrix, path, title: str | None = None) -> None:
    """Heatmap of the confusion matrix, classes in grasp-major order."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    n = len(cm.class_names)
    row_sums = np.maximum(cm.counts.sum(axis=1, keepdims=True), 1)
    fig, ax = plt.subplots(figsize=(max(6, n * 0.32), max(5, n * 0.28)))
    im = ax.imshow(cm.counts / row_sums, cmap="Blues", vmin=0.0, vmax=1.0)
    ax.set_xticks(range(n), cm.class_names, rotation=90, fontsize=6)
    ax.set_yticks(range(n), cm.class_names, fontsize=6)
    ax.set_xlabel("Prediction")
    ax.set_ylabel("Truth")
    if title is None and cm.total:
        title = f"accuracy {format_accuracy(cm.accuracy)}"
    if title:
        ax.set_title(title)
    fig.colorbar(im, ax=ax, fraction=0.046)
    fig.tight_layout()
    fig.savefig(path, dpi=150, metadata={"Software": None})
    plt.close(fig)
