"""Evaluation toolkit walkthrough: confusion matrices, false-positive rates,
fold averaging, and report files, using hand-built predictions so it runs
instantly.
"""

from pathlib import Path

import numpy as np

import echoforge as ef
from echoforge import metrics
from echoforge.labels import all_labels

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

rng = np.random.default_rng(0)
labels = all_labels()

# simulate a decent classifier: 92% correct, confusions mostly within-grasp
truths = np.repeat(np.arange(30), 24)
preds = truths.copy()
flip = rng.random(len(truths)) > 0.92
within_grasp = (truths // 6) * 6 + rng.integers(0, 6, len(truths))
preds[flip] = within_grasp[flip]

cm = ef.confusion(truths, preds)
rates, macro_fpr = ef.false_positive_rate(cm)
print(f"accuracy {metrics.format_accuracy(cm.accuracy)}, "
      f"macro false-positive rate {100 * macro_fpr:.2f}%")

worst = np.nanargmax(rates)
print(f"highest per-class FPR: {labels[worst]} at {100 * rates[worst]:.2f}%")

metrics.confusion_png(cm, OUT / "06_confusion.png")
metrics.per_class_csv(cm, OUT / "06_per_class.csv")

# fold averaging, the way session-held-out results are reported
folds = []
for session in range(1, 7):
    mask = rng.random(len(truths)) < 0.2
    fold_cm = ef.confusion(truths[mask], preds[mask])
    folds.append((f"session{session}", {"accuracy": fold_cm.accuracy, "confusion": fold_cm}))
report = ef.fold_average(folds)
for row in report["folds"]:
    print(f"  {row['fold']}: {metrics.format_accuracy(row['accuracy'])}")
print(f"mean over folds: {metrics.format_accuracy(report['mean_accuracy'])}")
metrics.report_json(report, OUT / "06_report.json")
metrics.report_csv(report, OUT / "06_report.csv")
print(f"wrote {OUT}/06_confusion.png, 06_per_class.csv, 06_report.json")
