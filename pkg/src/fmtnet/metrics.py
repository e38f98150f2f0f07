"""Evaluation metrics for regression-style and classification outputs.

The two binary-accuracy conventions differ in how they treat the neutral
point: `ba_nonneg` thresholds both sides at >= 0 over all samples, while
`ba_posneg` drops samples whose label is exactly 0 and compares signs.
Weighted F1 is reported under both splits. Multiclass accuracy buckets
continuous values in [-3, 3] into k equal-width classes.
"""

from __future__ import annotations

import numpy as np

METRIC_ORDER = ("Accuracy", "F1", "BA_nonneg", "BA_posneg", "F1_nonneg",
                "F1_posneg", "MAE", "Corr", "MA5", "MA7")


def _flat(a):
    return np.asarray(a, dtype=np.float64).ravel()


def ba_nonneg(preds, labels):
    preds, labels = _flat(preds), _flat(labels)
    return float(np.mean((preds >= 0) == (labels >= 0)))


def ba_posneg(preds, labels):
    preds, labels = _flat(preds), _flat(labels)
    keep = labels != 0
    if not keep.any():
        raise ValueError("ba_posneg: every label is exactly 0")
    return float(np.mean((preds[keep] > 0) == (labels[keep] > 0)))


def weighted_f1(pred_cls, true_cls):
    """Support-weighted mean of per-class F1 over the classes present in truth."""
    pred_cls, true_cls = np.asarray(pred_cls), np.asarray(true_cls)
    total = true_cls.size
    score = 0.0
    for cls in np.unique(true_cls):
        support = int((true_cls == cls).sum())
        tp = int(((pred_cls == cls) & (true_cls == cls)).sum())
        fp = int(((pred_cls == cls) & (true_cls != cls)).sum())
        fn = int(((pred_cls != cls) & (true_cls == cls)).sum())
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        score += support * f1
    return float(score / total)


def f1_nonneg(preds, labels):
    preds, labels = _flat(preds), _flat(labels)
    return weighted_f1(preds >= 0, labels >= 0)


def f1_posneg(preds, labels):
    preds, labels = _flat(preds), _flat(labels)
    keep = labels != 0
    if not keep.any():
        raise ValueError("f1_posneg: every label is exactly 0")
    return weighted_f1(preds[keep] > 0, labels[keep] > 0)


def mae(preds, labels):
    return float(np.mean(np.abs(_flat(preds) - _flat(labels))))


def pearson_corr(preds, labels):
    """Pearson correlation; defined as 0.0 when either side has zero variance."""
    x, y = _flat(preds), _flat(labels)
    xd, yd = x - x.mean(), y - y.mean()
    denom = np.sqrt((xd * xd).sum() * (yd * yd).sum())
    if denom == 0.0:
        return 0.0
    return float((xd * yd).sum() / denom)


def bucket(values, k):
    """Equal-width class index over [-3, 3]; interior ties go to the upper bin."""
    edges = -3.0 + 6.0 * np.arange(1, k) / k
    return np.searchsorted(edges, _flat(values), side="right")


def multiclass_acc(preds, labels, k):
    return float(np.mean(bucket(preds, k) == bucket(labels, k)))


def compute_metrics(preds, labels, label_kind, num_classes=None):
    """Metric map appropriate to the label kind; accuracies in [0, 1]."""
    preds = np.asarray(preds, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if label_kind == "regression":
        return {
            "BA_nonneg": ba_nonneg(preds, labels),
            "BA_posneg": ba_posneg(preds, labels),
            "F1_nonneg": f1_nonneg(preds, labels),
            "F1_posneg": f1_posneg(preds, labels),
            "MAE": mae(preds, labels),
            "Corr": pearson_corr(preds, labels),
            "MA5": multiclass_acc(preds, labels, 5),
            "MA7": multiclass_acc(preds, labels, 7),
        }
    if label_kind == "binary":
        cls = (preds.ravel() >= 0).astype(int)  # logits
        truth = labels.ravel().astype(int)
        return {
            "Accuracy": float(np.mean(cls == truth)),
            "F1": weighted_f1(cls, truth),
        }
    if label_kind == "categorical":
        cls = preds.reshape(preds.shape[0], -1).argmax(axis=1)
        truth = labels.ravel().astype(int)
        return {
            "Accuracy": float(np.mean(cls == truth)),
            "F1": weighted_f1(cls, truth),
        }
    raise ValueError(f"unknown label kind {label_kind!r}")
