"""Training loop: mini-batch Adam with validation-based early stopping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metrics import compute_metrics
from .optim import Adam
from .tensor import Tensor, bce_with_logits, l1_distance, softmax_cross_entropy


class TrainConfigError(ValueError):
    pass


class DivergenceError(ArithmeticError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    max_epochs: int = 200
    batch_size: int = 32
    seed: int = 0
    patience: int = 20
    loss_kind: str | None = None  # None = follow the dataset's label kind

    def __post_init__(self):
        if self.learning_rate < 0:
            raise TrainConfigError("learning_rate must be nonnegative")
        if not 1 <= self.max_epochs <= 200:
            raise TrainConfigError("max_epochs must be in [1, 200]")
        if self.batch_size < 1:
            raise TrainConfigError("batch_size must be positive")
        if not 1 <= self.patience <= self.max_epochs:
            raise TrainConfigError("patience must be in [1, max_epochs]")
        if self.loss_kind not in (None, "regression", "binary", "categorical"):
            raise TrainConfigError(f"unknown loss kind {self.loss_kind!r}")

    def to_dict(self):
        return {
            "learning_rate": self.learning_rate,
            "max_epochs": self.max_epochs,
            "batch_size": self.batch_size,
            "seed": self.seed,
            "patience": self.patience,
            "loss_kind": self.loss_kind,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


def loss_value(predictions, labels, kind):
    """Scalar training loss: L1 for regression, cross-entropy otherwise."""
    if kind == "regression":
        return l1_distance(predictions, Tensor(labels))
    if kind == "binary":
        return bce_with_logits(predictions, labels)
    if kind == "categorical":
        return softmax_cross_entropy(predictions, labels.ravel().astype(int))
    raise ValueError(f"unknown loss kind {kind!r}")


def predict(model, batch, batch_size=128):
    """Model outputs for every sample, evaluation mode, as one array."""
    outs = [model.forward(mb).data for mb in batch.batches(batch_size)]
    return np.concatenate(outs, axis=0)


def eval_loss(model, batch, kind, batch_size=128):
    """Sample-weighted mean loss over the batch in evaluation mode."""
    total, n = 0.0, 0
    for mb in batch.batches(batch_size):
        out = model.forward(mb)
        total += float(loss_value(out, mb.labels, kind).data) * mb.n
        n += mb.n
    return total / n


def evaluate(model, batch, batch_size=128):
    """Metric report for the model on a dataset."""
    preds = predict(model, batch, batch_size)
    return compute_metrics(preds, batch.labels, batch.label_kind, batch.num_classes)


def train(model, train_batch, val_batch, config):
    """Mini-batch Adam with per-epoch shuffling and best-validation restore.

    Returns a history list with one record per epoch: train loss (mean over
    batches), validation loss, and the cumulative optimizer step count. The
    model is left holding the parameters of the best validation epoch.
    """
    kind = config.loss_kind or train_batch.label_kind
    opt = Adam(model.parameters(), config.learning_rate)
    rng = np.random.default_rng(config.seed)
    history = []
    best_val = np.inf
    best_epoch = -1
    best_params = None
    steps = 0

    for epoch in range(config.max_epochs):
        order = rng.permutation(train_batch.n)
        batch_losses = []
        for mb in train_batch.batches(config.batch_size, order):
            model.zero_grad()
            out = model.forward(mb, training=True, rng=rng)
            loss = loss_value(out, mb.labels, kind)
            if not np.isfinite(loss.data):
                raise DivergenceError(f"training diverged at epoch {epoch}")
            loss.backward()
            opt.step()
            steps += 1
            batch_losses.append(float(loss.data))
        val = eval_loss(model, val_batch, kind, config.batch_size)
        history.append({
            "epoch": epoch,
            "train_loss": float(np.mean(batch_losses)),
            "val_loss": val,
            "steps": steps,
        })
        if val < best_val:
            best_val = val
            best_epoch = epoch
            best_params = [p.data.copy() for p in model.parameters()]
        elif epoch - best_epoch >= config.patience:
            break

    if best_params is not None:
        for p, data in zip(model.parameters(), best_params):
            p.data = data
    return history
