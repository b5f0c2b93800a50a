"""Point and probabilistic accuracy scores for emulator predictions."""

from __future__ import annotations

import numpy as np
from scipy.stats import norm

__all__ = ["rmse", "crps"]

_INV_SQRT_PI = 1.0 / np.sqrt(np.pi)


def rmse(predicted: np.ndarray, truth: np.ndarray) -> float:
    predicted = np.asarray(predicted, dtype=float).ravel()
    truth = np.asarray(truth, dtype=float).ravel()
    if predicted.shape != truth.shape:
        raise ValueError(f"length mismatch: {predicted.shape} vs {truth.shape}")
    if predicted.size == 0:
        raise ValueError("need at least one prediction")
    return float(np.sqrt(np.mean((predicted - truth) ** 2)))


def crps(mean: np.ndarray, variance: np.ndarray, truth: np.ndarray) -> float:
    """Mean Gaussian CRPS of N(mean, variance) forecasts against truths.

    Per point: sigma * [z(2 Phi(z) - 1) + 2 phi(z) - 1/sqrt(pi)] with
    z = (f - mean)/sigma, which is nonnegative and collapses to |f - mean|
    as sigma -> 0.
    """
    mean = np.asarray(mean, dtype=float).ravel()
    variance = np.asarray(variance, dtype=float).ravel()
    truth = np.asarray(truth, dtype=float).ravel()
    if not (mean.shape == variance.shape == truth.shape):
        raise ValueError("mean, variance, and truth must have equal lengths")
    if mean.size == 0:
        raise ValueError("need at least one prediction")
    if np.any(variance < 0):
        raise ValueError("negative predictive variance")

    sigma = np.sqrt(variance)
    out = np.abs(truth - mean)
    live = sigma > 0
    if np.any(live):
        z = (truth[live] - mean[live]) / sigma[live]
        out[live] = sigma[live] * (z * (2.0 * norm.cdf(z) - 1.0)
                                   + 2.0 * norm.pdf(z) - _INV_SQRT_PI)
    return float(np.mean(out))
