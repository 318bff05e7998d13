"""Training loop with augmentation, Nadam and best-validation selection."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .. import losses
from ..segnet import SegNet, predict_labels
from ..tensor import no_grad
from .data import AugmentConfig, Dataset, augment
from .optim import Nadam

log = logging.getLogger(__name__)


@dataclass
class TrainResult:
    history: list = field(default_factory=list)
    best_epoch: int | None = None
    best_val_dice: float | None = None
    diverged: bool = False
    message: str = ""
    initial_loss: float | None = None  # eval-mode training-set loss before any update
    final_loss: float | None = None  # same, for the last-epoch weights


def mean_foreground_dice(model, data: Dataset):
    """Hard Dice averaged over labels 1..L-1 and over volumes."""
    scores = []
    for i in range(len(data)):
        pred = predict_labels(model, data.images[i])
        scores.append(losses.hard_dice_metric(pred, data.labels[i], data.n_labels)[1:].mean())
    return float(np.mean(scores))


def evaluate_loss(model, data: Dataset, loss_name="pcc", eps=losses.DEFAULT_EPS):
    """Eval-mode loss averaged over volumes, no augmentation."""
    fn = losses.get_loss(loss_name, eps)
    was = model.training
    model.eval()
    vals = []
    try:
        with no_grad():
            for i in range(len(data)):
                s = model(data.images[i:i + 1])
                vals.append(fn(s, losses.one_hot(data.labels[i:i + 1], data.n_labels)).item())
    finally:
        model.train(was)
    return float(np.mean(vals))


def train(model: SegNet, train_set: Dataset, val_set: Dataset | None = None, loss_name="pcc",
          lr=1e-3, epochs=10, batch=2, seed=0, augment_cfg: AugmentConfig | None = None,
          eps=losses.DEFAULT_EPS, shuffle=True, callback=None) -> TrainResult:
    """Train ``model`` in place; on return it holds the best-validation weights.

    The epoch training loss is the mean of per-volume losses in dataset index
    order, so it does not depend on how volumes were grouped into batches.
    A non-finite loss stops the run and sets ``diverged``.
    ``initial_loss``/``final_loss`` are eval-mode, unaugmented losses on the
    training set before the first and after the last update.
    """
    if len(train_set) == 0:
        raise ValueError("training set is empty")
    if batch < 1:
        raise ValueError("batch must be at least 1")
    loss_fn = losses.get_loss(loss_name, eps)
    opt = Nadam(model.parameters(), lr=lr)
    res = TrainResult()
    best_state = model.state_dict()
    n = len(train_set)
    L = train_set.n_labels
    if epochs > 0:
        res.initial_loss = evaluate_loss(model, train_set, loss_name, eps)

    for epoch in range(epochs):
        rng = np.random.default_rng([seed, epoch])
        order = rng.permutation(n) if shuffle else np.arange(n)
        per_volume = np.zeros(n)
        model.train()
        for b0 in range(0, n, batch):
            idx = order[b0:b0 + batch]
            imgs, labs = [], []
            for i in idx:
                img, lab = train_set.images[i], train_set.labels[i]
                if augment_cfg is not None:
                    img, lab = augment(img, lab, augment_cfg, rng)
                imgs.append(img)
                labs.append(lab)
            x = np.stack(imgs)
            y = losses.one_hot(np.stack(labs), L)
            scores = model(x, rng)
            loss = loss_fn(scores, y)
            value = loss.item()
            if not math.isfinite(value):
                res.diverged = True
                res.message = f"non-finite {loss_name} loss at epoch {epoch}, batch starting {b0}"
                log.warning(res.message)
                break
            with no_grad():
                for j, i in enumerate(idx):
                    per_volume[i] = loss_fn(scores.data[j:j + 1], y[j:j + 1]).item()
            opt.zero_grad()
            loss.backward()
            opt.step()
        if res.diverged:
            break
        entry = {"epoch": epoch, "train_loss": float(np.mean(per_volume))}
        if val_set is not None and len(val_set):
            entry["val_dice"] = mean_foreground_dice(model, val_set)
            if res.best_val_dice is None or entry["val_dice"] > res.best_val_dice:
                res.best_val_dice = entry["val_dice"]
                res.best_epoch = epoch
                best_state = model.state_dict()
        else:
            res.best_epoch = epoch
            best_state = model.state_dict()
        res.history.append(entry)
        log.info("epoch %d: %s", epoch, entry)
        if callback is not None:
            callback(entry)
    if epochs > 0:
        res.final_loss = float("nan") if res.diverged else evaluate_loss(model, train_set,
                                                                         loss_name, eps)
    model.load_state_dict(best_state)
    return res
