"""Training loop, evaluation report, and dataset loading for the classifier.

Batches are drawn with a seeded permutation each epoch; the partial last
batch is kept.  Validation accuracy is tracked per epoch and the best
checkpoint (ties keep the earlier epoch) is returned alongside the final
one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..morpho import DatasetManifest, load_morphology, resolve_sample_path
from .core import adam_init, adam_step, softmax_cross_entropy
from .model import CnnModel, backward_from_logits, forward_with_caches, predict


class EmptyTrainSplit(ValueError):
    """Training requires at least one sample."""


class EmptySplit(ValueError):
    """The requested split has no samples."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 128
    epochs: int = 70
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be positive, epochs non-negative")
        if not 0.0 < self.learning_rate:
            raise ValueError("learning_rate must be positive")


def load_split(manifest: DatasetManifest, split: str, manifest_path=".") -> tuple:
    """Stack one split into (x, y): x is (n, h, w, 1) float32, y int64."""
    samples = manifest.subset(split)
    if not samples:
        raise EmptySplit(f"no samples in split {split!r}")
    if any(s.class_id is None for s in samples):
        raise ValueError(f"split {split!r} has unlabeled samples")
    grids = [load_morphology(resolve_sample_path(manifest_path, s)).values for s in samples]
    x = np.stack(grids).astype(np.float32)[..., None]
    y = np.array([s.class_id for s in samples], dtype=np.int64)
    return x, y


def _accuracy(model: CnnModel, x: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean(predict(model, x) == y))


def train(
    model: CnnModel,
    x_train: np.ndarray,
    y_train: np.ndarray,
    config: TrainConfig = TrainConfig(),
    x_val: np.ndarray | None = None,
    y_val: np.ndarray | None = None,
    on_epoch=None,
) -> tuple:
    """Adam on softmax cross-entropy.

    Returns (final model, best-validation model, history).  Without a
    validation set the best model is the final one.  ``train_acc`` is
    accumulated from the pre-update logits of each batch, so it costs no
    extra forward pass.
    """
    n = int(np.asarray(x_train).shape[0])
    if n == 0:
        raise EmptyTrainSplit("no training samples")
    y_train = np.asarray(y_train)

    rng = np.random.default_rng(config.seed)
    params = model.params
    state = adam_init(params)
    best_params = params
    best_val = -1.0
    history = []

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n) if config.shuffle else np.arange(n)
        loss_sum = 0.0
        correct = 0
        for lo in range(0, n, config.batch_size):
            idx = order[lo : lo + config.batch_size]
            xb, yb = x_train[idx], y_train[idx]
            cur = CnnModel(arch=model.arch, params=params)
            logits, caches = forward_with_caches(cur, xb)
            loss, dlogits = softmax_cross_entropy(logits, yb)
            _, grads = backward_from_logits(cur, caches, dlogits)
            params, state = adam_step(
                params, grads, state,
                config.learning_rate, config.beta1, config.beta2, config.eps,
            )
            loss_sum += loss * len(idx)
            correct += int(np.sum(np.argmax(logits, axis=1) == yb))

        row = {
            "epoch": epoch,
            "train_loss": loss_sum / n,
            "train_acc": correct / n,
            "val_acc": None,
        }
        epoch_model = CnnModel(arch=model.arch, params=params)
        if x_val is not None and len(x_val):
            row["val_acc"] = _accuracy(epoch_model, x_val, y_val)
            if row["val_acc"] > best_val:
                best_val = row["val_acc"]
                best_params = params
        history.append(row)
        if on_epoch is not None:
            on_epoch(row)

    final = CnnModel(arch=model.arch, params=params)
    best = CnnModel(arch=model.arch, params=best_params) if best_val >= 0.0 else final
    return final, best, history


def history_csv(history) -> str:
    lines = ["epoch,train_loss,train_acc,val_acc"]
    for row in history:
        val = "" if row["val_acc"] is None else f"{row['val_acc']:.6f}"
        lines.append(f"{row['epoch']},{row['train_loss']:.6f},{row['train_acc']:.6f},{val}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class EvalReport:
    """Aggregate metrics on one split.  Confusion rows are true classes."""

    accuracy: float
    macro_f1: float
    within_one: float
    confusion: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "confusion", np.array(self.confusion, dtype=np.int64))
        self.confusion.setflags(write=False)


def evaluate(model: CnnModel, x: np.ndarray, y: np.ndarray) -> EvalReport:
    """Accuracy, macro F1, within-one accuracy, and the confusion matrix.

    Macro F1 averages only over classes that appear in the truth or in the
    predictions; a class absent from both would contribute an undefined F1
    and is skipped rather than counted as zero.
    """
    if len(x) == 0:
        raise EmptySplit("cannot evaluate an empty split")
    y = np.asarray(y)
    preds = predict(model, x)
    k = model.arch.n_classes
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (y, preds), 1)

    f1s = []
    for c in range(k):
        tp = confusion[c, c]
        true_c = confusion[c].sum()
        pred_c = confusion[:, c].sum()
        if true_c == 0 and pred_c == 0:
            continue
        f1s.append(2.0 * tp / (true_c + pred_c))
    return EvalReport(
        accuracy=float(np.mean(preds == y)),
        macro_f1=float(np.mean(f1s)) if f1s else 0.0,
        within_one=float(np.mean(np.abs(preds - y) <= 1)),
        confusion=confusion,
    )
