"""Segmentation losses on ``(n, L, D, H, W)`` score/one-hot volumes.

All three training losses return scalar :class:`Tensor` objects and reduce
as an unweighted mean over labels and then over the batch.  ``truth`` may be
a plain array; only ``scores`` is differentiated.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor, as_tensor

DEFAULT_EPS = 1e-7
CE_CLAMP = 1e-12


@dataclass(frozen=True)
class LossConfig:
    name: str = "pcc"
    epsilon: float = DEFAULT_EPS

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.name not in ("pcc", "dice", "ce"):
            raise ValueError(f"unknown loss {self.name!r}; expected pcc, dice or ce")


@dataclass
class PredictionBatch:
    scores: Tensor
    truth: np.ndarray

    def __post_init__(self):
        self.scores = as_tensor(self.scores)
        self.truth = np.asarray(self.truth, dtype=np.float64)
        if self.scores.shape != self.truth.shape or self.truth.ndim < 3:
            raise ValueError(f"scores {self.scores.shape} and truth {self.truth.shape} "
                             "must share an (n, L, ...) shape")

    @property
    def labels(self):
        return self.truth.shape[1]


def _flat(scores, truth):
    scores = as_tensor(scores)
    truth = np.asarray(truth.data if isinstance(truth, Tensor) else truth, dtype=np.float64)
    if scores.shape != truth.shape:
        raise ValueError(f"scores {scores.shape} and truth {truth.shape} differ in shape")
    n, l = scores.shape[:2]
    return scores.reshape(n, l, -1), truth.reshape(n, l, -1)


def pcc_per_label(scores, truth, eps=DEFAULT_EPS):
    """``(n, L)`` tensor of affinely rescaled Pearson coefficients in [0, 1]."""
    p, y = _flat(scores, truth)
    pc = p - p.mean(axis=2, keepdims=True)
    yc = y - y.mean(axis=2, keepdims=True)
    num = (pc * yc).sum(axis=2)
    den = ((pc * pc).sum(axis=2) * np.sum(yc * yc, axis=2) + eps).sqrt()
    return (num / den + 1.0) * 0.5


def pcc_loss(scores, truth, eps=DEFAULT_EPS):
    """Pearson-correlation loss: 0 perfect, 0.5 random, 1 total disagreement."""
    return (1.0 - pcc_per_label(scores, truth, eps)).mean()


def dice_per_label(scores, truth, eps=DEFAULT_EPS):
    p, y = _flat(scores, truth)
    inter = (p * y).sum(axis=2)
    return (inter * 2.0 + eps) / (p.sum(axis=2) + y.sum(axis=2) + eps)


def dice_loss(scores, truth, eps=DEFAULT_EPS):
    """Soft Dice loss; background voxels do not enter the numerator."""
    return (1.0 - dice_per_label(scores, truth, eps)).mean()


def cross_entropy(scores, truth, clamp=CE_CLAMP):
    """Mean over voxels of ``-sum_l y log p`` on already-normalised scores."""
    p, y = _flat(scores, truth)
    n, l, m = p.shape
    logp = p.clamp_min(clamp).log()
    return (logp * y).sum() * (-1.0 / (n * m))


LOSSES = {"pcc": pcc_loss, "dice": dice_loss, "ce": cross_entropy}


def get_loss(name, eps=DEFAULT_EPS):
    if name not in LOSSES:
        raise ValueError(f"unknown loss {name!r}; expected one of {sorted(LOSSES)}")
    if name == "ce":
        return cross_entropy
    fn = LOSSES[name]
    return lambda s, t: fn(s, t, eps)


def pearson_r(p, y, eps=0.0):
    """Pearson correlation of two vectors; 0 when either one is constant."""
    p = np.asarray(p, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if p.size != y.size:
        raise ValueError("vectors must have equal length")
    if p.size < 2:
        raise ValueError("need at least two samples")
    if np.ptp(p) == 0 or np.ptp(y) == 0:
        return 0.0
    pc = p - p.mean()
    yc = y - y.mean()
    return float(np.dot(pc, yc) / np.sqrt(np.dot(pc, pc) * np.dot(yc, yc) + eps))


def matthews_corrcoef(pred, truth):
    """MCC from the binary confusion matrix; 0 when a marginal is empty."""
    pred = np.asarray(pred).astype(bool).ravel()
    truth = np.asarray(truth).astype(bool).ravel()
    tp = float(np.sum(pred & truth))
    tn = float(np.sum(~pred & ~truth))
    fp = float(np.sum(pred & ~truth))
    fn = float(np.sum(~pred & truth))
    den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if den == 0:
        return 0.0
    return (tp * tn - fp * fn) / np.sqrt(den)


def hard_dice_metric(pred_labels, truth_labels, n_labels):
    """Per-label Dice of two integer label maps (1.0 where a label is absent from both)."""
    pred = np.asarray(pred_labels)
    truth = np.asarray(truth_labels)
    if pred.shape != truth.shape:
        raise ValueError(f"label volumes differ in shape: {pred.shape} vs {truth.shape}")
    for name, arr in (("prediction", pred), ("truth", truth)):
        if arr.size and (arr.min() < 0 or arr.max() >= n_labels):
            raise ValueError(f"{name} labels must lie in [0, {n_labels})")
    out = np.empty(n_labels)
    for lab in range(n_labels):
        a = pred == lab
        b = truth == lab
        total = int(a.sum()) + int(b.sum())
        out[lab] = 1.0 if total == 0 else 2.0 * np.sum(a & b) / total
    return out


def one_hot(labels, n_labels):
    """``(..., D, H, W)`` integer labels -> ``(..., L, D, H, W)`` float one-hot."""
    labels = np.asarray(labels)
    oh = np.eye(n_labels, dtype=np.float64)[labels]
    return np.moveaxis(oh, -1, -4)
