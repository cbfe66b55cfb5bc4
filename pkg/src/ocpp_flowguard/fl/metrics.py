"""Detection metrics: accuracy, micro TPR, macro FPR, weighted F1."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def accuracy_eq(tp: float, tn: float, fp: float, fn: float) -> float:
    return (tp + tn) / (tp + tn + fp + fn)


def tpr_eq(tp: float, fn: float) -> float:
    return tp / (tp + fn) if tp + fn else 0.0


def fpr_eq(fp: float, tn: float) -> float:
    return fp / (fp + tn) if fp + tn else 0.0


def f1_eq(tp: float, fp: float, fn: float) -> float:
    denom = 2.0 * tp + fp + fn
    return 2.0 * tp / denom if denom else 0.0


@dataclass
class Metrics:
    accuracy: float
    tpr: float
    fpr: float
    f1: float
    confusion: np.ndarray  # rows: true class, cols: predicted


def confusion_matrix(y_true: np.ndarray, y_pred: np.ndarray, n_classes: int) -> np.ndarray:
    cm = np.zeros((n_classes, n_classes), dtype=int)
    for t, p in zip(y_true, y_pred):
        cm[t, p] += 1
    return cm


def metrics_from_confusion(cm: np.ndarray) -> Metrics:
    """Micro accuracy/TPR, macro one-vs-rest FPR, support-weighted one-vs-rest F1."""
    total = cm.sum()
    if total == 0:
        raise ValueError("empty confusion matrix")
    tp = np.diag(cm).astype(float)
    support = cm.sum(axis=1).astype(float)
    predicted = cm.sum(axis=0).astype(float)
    fn = support - tp
    fp = predicted - tp
    tn = total - tp - fn - fp

    accuracy = float(tp.sum() / total)
    micro_tpr = float(tp.sum() / (tp.sum() + fn.sum()))  # equals accuracy by pooling
    fprs = np.divide(fp, fp + tn, out=np.zeros_like(fp), where=(fp + tn) > 0)
    macro_fpr = float(fprs.mean())
    f1s = np.array([f1_eq(tp[c], fp[c], fn[c]) for c in range(len(tp))])
    weighted_f1 = float((f1s * support).sum() / support.sum())
    return Metrics(accuracy=accuracy, tpr=micro_tpr, fpr=macro_fpr, f1=weighted_f1, confusion=cm)


def evaluate(y_pred: np.ndarray, y_true: np.ndarray, n_classes: int) -> Metrics:
    y_pred = np.asarray(y_pred)
    y_true = np.asarray(y_true)
    if len(y_pred) != len(y_true):
        raise ValueError("prediction/label length mismatch")
    if len(y_true) == 0:
        raise ValueError("cannot evaluate on empty input")
    return metrics_from_confusion(confusion_matrix(y_true, y_pred, n_classes))
