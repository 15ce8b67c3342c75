"""Regression error metrics, reported in target units (seconds)."""

from __future__ import annotations

import numpy as np

from ..errors import ValidationError


def _check_pair(y_true, y_pred) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(y_true, dtype=np.float64).ravel()
    p = np.asarray(y_pred, dtype=np.float64).ravel()
    if t.size == 0:
        raise ValidationError("metrics need at least one sample")
    if t.shape != p.shape:
        raise ValidationError(f"length mismatch: {t.shape} vs {p.shape}")
    return t, p


def rmse(y_true, y_pred) -> float:
    """Root-mean-square error."""
    t, p = _check_pair(y_true, y_pred)
    return float(np.sqrt(np.mean((t - p) ** 2)))


def mae(y_true, y_pred) -> float:
    """Mean absolute error."""
    t, p = _check_pair(y_true, y_pred)
    return float(np.mean(np.abs(t - p)))
