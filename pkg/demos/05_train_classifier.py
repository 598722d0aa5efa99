"""Training the convolutional classifier on synthetic gestures.

A quick session-style experiment: generate a single-wearer corpus with six
sessions, hold one session out, train the residual network, and plot the
learning curves. Takes a couple of minutes on a laptop CPU.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

import echoforge as ef
from echoforge import model as M
from echoforge.dataset import instances_to_arrays, select
from echoforge.train import metrics_to_csv

OUT = Path(__file__).parent / "out"
OUT.mkdir(exist_ok=True)

instances = ef.build_synthetic_instances(
    participants=("demo",), sessions=6, reps_per_session=2, seed=1
)
plan = ef.make_split(instances, ef.Loso("demo", 6))
train_data = instances_to_arrays(select(instances, plan.train))
test_data = instances_to_arrays(select(instances, plan.test))
print(f"train {len(train_data[1])}, held-out session {len(test_data[1])}")

config = ef.TrainConfig(learning_rate=1e-3, seed=0)
params, log = ef.train(
    M.init_params(M.ModelSpec(), seed=0), train_data, config,
    val_data=test_data, epochs=15,
)
metrics_to_csv(log, OUT / "05_metrics.csv")

pred, conf = ef.predict(params, test_data[0])
acc = float((pred == test_data[1]).mean())
print(f"held-out accuracy after 15 epochs: {100 * acc:.1f}%")
ef.save_checkpoint(params, OUT / "05_model.ckpt", extra=config.to_dict())

fig, ax1 = plt.subplots(figsize=(7, 4))
epochs = [r["epoch"] for r in log]
ax1.plot(epochs, [r["train_loss"] for r in log], color="tab:red", label="train loss")
ax1.set_xlabel("epoch")
ax1.set_ylabel("cross-entropy", color="tab:red")
ax2 = ax1.twinx()
ax2.plot(epochs, [r["train_acc"] for r in log], color="tab:blue", label="train acc")
ax2.plot(epochs, [r["val_acc"] for r in log], color="tab:green", label="held-out acc")
ax2.set_ylabel("accuracy")
ax2.set_ylim(0, 1.02)
fig.legend(loc="center right")
fig.tight_layout()
fig.savefig(OUT / "05_learning_curves.png", dpi=120)
print(f"wrote {OUT}/05_learning_curves.png, 05_metrics.csv, 05_model.ckpt")
