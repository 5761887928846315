"""Reconstruction losses and their gradients."""
from __future__ import annotations

import numpy as np

from .nn import sigmoid, softplus


def _check_targets(targets):
    t = np.asarray(targets, dtype=np.float64)
    if np.any(t < 0) or np.any(t > 1) or not np.all(np.isfinite(t)):
        raise ValueError("BCE targets must lie in [0, 1]")
    return t


def bce_logits(logits, targets) -> float:
    """Mean over elements of ``softplus(l) - y * l``."""
    l = np.asarray(logits, dtype=np.float64)
    t = _check_targets(targets)
    if l.shape != t.shape:
        raise ValueError(f"shape mismatch {l.shape} vs {t.shape}")
    return float(np.mean(softplus(l) - t * l))


def bce_logits_rows(logits, targets) -> np.ndarray:
    """Per-row element sum of the stable BCE; gradient is ``sigmoid(l) - y``."""
    return (softplus(logits) - targets * logits).sum(axis=-1)


def bce_logits_grad(logits, targets):
    return sigmoid(logits) - targets


def bce_probs(probs, targets, eps: float = 1e-7) -> float:
    """BCE of probabilities, clipped away from 0 and 1."""
    p = np.clip(np.asarray(probs, dtype=np.float64), eps, 1.0 - eps)
    t = _check_targets(targets)
    return float(np.mean(-(t * np.log(p) + (1.0 - t) * np.log1p(-p))))


def binary_entropy(targets) -> float:
    """Mean entropy of soft targets, the floor of any BCE against them."""
    t = _check_targets(targets)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(t * np.log(t) + (1.0 - t) * np.log1p(-t))
    return float(np.mean(np.nan_to_num(h)))


def squared_error_rows(pred, targets) -> np.ndarray:
    return ((pred - targets) ** 2).sum(axis=-1)


def squared_error_grad(pred, targets):
    return 2.0 * (pred - targets)


def mse(pred, targets) -> float:
    return float(np.mean((np.asarray(pred) - np.asarray(targets)) ** 2))
