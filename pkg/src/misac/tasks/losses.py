"""Differentiable training losses."""

from __future__ import annotations

import numpy as np

from .. import numcore as nc
from ..numcore import Tensor


def cross_entropy_loss(logits, labels) -> Tensor:
    """Mean negative log-likelihood of the true classes, in log space.

    Accepts a single logit vector with its integer label, or an (n, B)
    batch with (n,) labels.
    """
    if not isinstance(logits, Tensor):
        logits = Tensor(np.asarray(logits, dtype=np.float64))
    labels = np.atleast_1d(np.asarray(labels, dtype=np.intp))

    if logits.data.ndim == 1:
        num_classes = logits.shape[0]
        if labels.shape != (1,):
            raise nc.ShapeError("one logit vector takes exactly one label")
        label = int(labels[0])
        if not 0 <= label < num_classes:
            raise IndexError(f"label {label} outside [0, {num_classes})")
        onehot = np.zeros(num_classes)
        onehot[label] = 1.0
        picked = nc.tsum(nc.mul(nc.log_softmax(logits), Tensor(onehot)))
        return nc.mul(picked, Tensor(-1.0))

    n, num_classes = logits.shape
    if labels.shape != (n,):
        raise nc.ShapeError(f"expected {n} labels, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise IndexError("label outside [0, num_classes)")
    picked = nc.pick_per_row(nc.log_softmax(logits), labels)
    return nc.mul(nc.tmean(picked), Tensor(-1.0))


def mse_loss(pred, target) -> Tensor:
    """Mean over all entries of the squared difference."""
    if not isinstance(pred, Tensor):
        pred = Tensor(np.asarray(pred, dtype=np.float64))
    if not isinstance(target, Tensor):
        target = Tensor(np.asarray(target, dtype=np.float64))
    if pred.shape != target.shape:
        raise nc.ShapeError(f"pred {pred.shape} vs target {target.shape}")
    return nc.tmean(nc.square(nc.sub(pred, target)))
