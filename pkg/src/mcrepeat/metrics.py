"""Classification and calibration metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import McRepeatError, UndefinedMetricError


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with true labels on rows and predictions on columns."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise McRepeatError(f"confusion matrix must be square, got shape {counts.shape}")
        if np.any(counts < 0):
            raise McRepeatError("confusion matrix counts must be non-negative")
        object.__setattr__(self, "counts", counts)

    @property
    def k(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self):
        return self.counts.sum()

    @classmethod
    def from_labels(cls, labels, predictions, k: int) -> "ConfusionMatrix":
        y, p = _check_pair(labels, predictions)
        if np.any((y < 0) | (y >= k) | (p < 0) | (p >= k)):
            raise McRepeatError(f"class indices must lie in [0, {k - 1}]")
        counts = np.zeros((k, k), dtype=np.int64)
        np.add.at(counts, (y, p), 1)
        return cls(counts)

    def to_dict(self):
        return {"k": self.k, "counts": self.counts.tolist()}


@dataclass(frozen=True)
class CalibrationBin:
    bin_low: float
    bin_high: float
    mean_predicted: float  # nan for an empty bin
    empirical_frequency: float  # nan for an empty bin
    count: int


@dataclass(frozen=True)
class CalibrationReport:
    brier: float
    bins: list[CalibrationBin]


def _check_pair(labels, predictions):
    y = np.asarray(labels)
    p = np.asarray(predictions)
    if y.shape != p.shape:
        raise McRepeatError(f"length mismatch: {y.shape[0] if y.ndim else 0} labels vs {p.shape[0] if p.ndim else 0} predictions")
    if y.size == 0:
        raise McRepeatError("empty input")
    return y.astype(int), p.astype(int)


def accuracy(labels, predictions) -> float:
    y, p = _check_pair(labels, predictions)
    return float(np.mean(y == p))


def quadratic_weights(k: int) -> np.ndarray:
    i, j = np.indices((k, k))
    return (i - j) ** 2 / (k - 1) ** 2


def quadratic_weighted_kappa(cm: ConfusionMatrix) -> float:
    """Cohen's kappa with quadratic disagreement weights."""
    counts = cm.counts.astype(float)
    total = counts.sum()
    if total <= 0:
        raise UndefinedMetricError("kappa undefined: empty confusion matrix")
    observed = counts / total
    expected = np.outer(observed.sum(axis=1), observed.sum(axis=0))
    w = quadratic_weights(cm.k)
    denom = float(np.sum(w * expected))
    if denom <= 0:
        raise UndefinedMetricError("kappa undefined: no expected disagreement")
    return 1.0 - float(np.sum(w * observed)) / denom


def _as_probabilities(probs):
    p = np.asarray(probs, dtype=float)
    if p.size == 0:
        raise McRepeatError("empty input")
    if not np.all(np.isfinite(p)) or np.any(p < 0) or np.any(p > 1):
        raise McRepeatError("probabilities must lie in [0, 1]")
    return p


def brier_score(labels, probs) -> float:
    """Mean squared error between probabilities and one-hot outcomes.

    ``probs`` is either a 1-D array of positive-class probabilities (binary
    Brier) or an ``(n, k)`` array of class probabilities, in which case the
    squared errors are summed over classes.
    """
    p = _as_probabilities(probs)
    y = np.asarray(labels).astype(int)
    if y.shape[0] != p.shape[0]:
        raise McRepeatError(f"length mismatch: {y.shape[0]} labels vs {p.shape[0]} predictions")
    if p.ndim == 1:
        if np.any((y != 0) & (y != 1)):
            raise McRepeatError("binary labels must be 0 or 1")
        return float(np.mean((p - y) ** 2))
    k = p.shape[1]
    if np.any(np.abs(p.sum(axis=1) - 1.0) > 1e-6):
        raise McRepeatError("class probabilities must sum to 1")
    if np.any((y < 0) | (y >= k)):
        raise McRepeatError(f"labels must lie in [0, {k - 1}]")
    onehot = np.eye(k)[y]
    return float(np.mean(np.sum((p - onehot) ** 2, axis=1)))


def ordinal_class_probabilities(cumulative) -> np.ndarray:
    """Convert ``P(y > j)`` unit probabilities into per-class probabilities.

    Rank-inconsistent inputs (a later unit exceeding an earlier one) would
    produce negative mass; those are clipped and the row renormalized.
    """
    c = np.atleast_2d(np.asarray(cumulative, dtype=float))
    n = c.shape[0]
    upper = np.hstack([np.ones((n, 1)), c])
    lower = np.hstack([c, np.zeros((n, 1))])
    probs = np.clip(upper - lower, 0.0, None)
    return probs / probs.sum(axis=1, keepdims=True)


def calibration_curve(labels, probs, n_bins: int = 10) -> list[CalibrationBin]:
    """Reliability curve over equal-width bins on [0, 1].

    Bins are half-open ``[lo, hi)`` except the last, which includes 1.
    """
    if n_bins < 2:
        raise McRepeatError(f"n_bins must be >= 2, got {n_bins}")
    p = _as_probabilities(probs).ravel()
    y = np.asarray(labels, dtype=float).ravel()
    if y.shape != p.shape:
        raise McRepeatError(f"length mismatch: {y.size} labels vs {p.size} predictions")
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    idx = np.clip(np.floor(p * n_bins).astype(int), 0, n_bins - 1)
    bins = []
    for b in range(n_bins):
        sel = idx == b
        count = int(sel.sum())
        if count:
            mean_p = float(p[sel].mean())
            freq = float(y[sel].mean())
        else:
            mean_p = freq = math.nan
        bins.append(CalibrationBin(float(edges[b]), float(edges[b + 1]), mean_p, freq, count))
    return bins


def calibration_report(labels, probs, positive_labels, positive_probs, n_bins: int = 10) -> CalibrationReport:
    """Brier score of the full probabilities plus the binary reliability curve."""
    return CalibrationReport(
        brier=brier_score(labels, probs),
        bins=calibration_curve(positive_labels, positive_probs, n_bins),
    )
