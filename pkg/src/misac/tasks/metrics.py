"""Evaluation metrics (pure numpy, no gradients)."""

from __future__ import annotations

import numpy as np

from ..chansim import beam_gains, dft_codebook, sum_rate
from ..numcore import DomainError

NMSE_FLOOR_DB = -200.0


def topk_accuracy(logits: np.ndarray, labels: np.ndarray, k: int = 1) -> float:
    """Fraction of rows whose label is among the k largest logits.

    Ties rank toward the lower index, matching the routing convention.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.intp)
    order = np.argsort(-logits, axis=1, kind="stable")[:, :k]
    return float(np.mean(np.any(order == labels[:, None], axis=1)))


def nmse_db(preds: np.ndarray, targets: np.ndarray) -> float:
    """10*log10(total squared error / total target energy)."""
    preds = np.asarray(preds, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if preds.shape != targets.shape:
        raise ValueError(f"shape mismatch {preds.shape} vs {targets.shape}")
    energy = float(np.sum(targets * targets))
    if energy <= 0.0:
        raise DomainError("targets carry no energy")
    err = float(np.sum((preds - targets) ** 2))
    if err == 0.0:
        return NMSE_FLOOR_DB
    return max(10.0 * np.log10(err / energy), NMSE_FLOOR_DB)


def mean_euclidean(preds: np.ndarray, targets: np.ndarray) -> float:
    """Mean row-wise Euclidean distance."""
    diff = np.asarray(preds, dtype=np.float64) - np.asarray(targets, dtype=np.float64)
    return float(np.mean(np.linalg.norm(diff, axis=1)))


def mean_squared_error(preds: np.ndarray, targets: np.ndarray) -> float:
    diff = np.asarray(preds, dtype=np.float64) - np.asarray(targets, dtype=np.float64)
    return float(np.mean(diff * diff))


def sum_rate_ratio(channels: np.ndarray, predicted_beams: np.ndarray,
                   num_beams: int, noise_power_w: float, power_w: float) -> float:
    """Mean of R(predicted beam) / R(best beam) over single-user slots."""
    channels = np.asarray(channels)
    predicted_beams = np.asarray(predicted_beams, dtype=np.intp)
    num_elements = channels.shape[1]
    codebook = dft_codebook(num_elements, num_beams)
    scale = np.sqrt(power_w)
    ratios = np.empty(channels.shape[0])
    for i, h in enumerate(channels):
        gains = beam_gains(h, codebook)
        best = int(np.argmax(gains))
        # codebook rows are beams; a precoder is one beam as a column
        r_best = sum_rate(h[None, :], scale * codebook[best][:, None],
                          noise_power_w, power_w)
        r_pred = sum_rate(h[None, :], scale * codebook[predicted_beams[i]][:, None],
                          noise_power_w, power_w)
        ratios[i] = r_pred / r_best if r_best > 0 else 1.0
    return float(np.mean(ratios))
