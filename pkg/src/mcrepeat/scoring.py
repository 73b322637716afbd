"""From raw head outputs to severity scores and class assignments."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InsufficientSamplesError, McRepeatError
from .records import DETERMINISTIC, HeadKind, HeadType, PredictionRecord

DEFAULT_N_MC = 50


@dataclass(frozen=True)
class AggregatedPrediction:
    head: HeadKind
    outputs: np.ndarray
    n_samples_used: int
    deterministic: bool


@dataclass(frozen=True)
class SeverityScore:
    value: float
    head: HeadKind
    range_low: float
    range_high: float


def aggregate_mc(rows: Sequence[PredictionRecord], n_use: int | None = DEFAULT_N_MC) -> AggregatedPrediction:
    """Average the outputs of the first ``n_use`` MC samples of one image.

    A single DETERMINISTIC row is passed through unchanged and ``n_use`` is
    ignored. Rows are ordered by ``mc_index`` before taking the prefix.
    """
    if not rows:
        raise InsufficientSamplesError("no prediction rows for image")
    head = rows[0].head
    if any(r.head != head for r in rows):
        raise McRepeatError("rows of one image have different heads")
    det = [r for r in rows if r.mc_index == DETERMINISTIC]
    if det:
        if len(det) != len(rows):
            raise McRepeatError("cannot aggregate DETERMINISTIC and MC rows together")
        if len(det) > 1:
            raise McRepeatError(f"expected one DETERMINISTIC row, got {len(det)}")
        return AggregatedPrediction(head, np.asarray(det[0].outputs, dtype=float), 1, True)

    if n_use is None:
        n_use = len(rows)
    if n_use < 1:
        raise ValueError("n_use must be >= 1")
    if len(rows) < n_use:
        raise InsufficientSamplesError(
            f"image {rows[0].image_id!r} has {len(rows)} MC samples, {n_use} requested"
        )
    ordered = sorted(rows, key=lambda r: r.mc_index)
    if len({r.mc_index for r in ordered}) != len(ordered):
        raise McRepeatError(f"image {rows[0].image_id!r} has duplicate mc_index values")
    block = np.array([r.outputs for r in ordered[:n_use]], dtype=float)
    return AggregatedPrediction(head, block.mean(axis=0), n_use, False)


def score_value(head: HeadKind, outputs) -> float:
    """Severity value for one output vector; linear in ``outputs`` for every head."""
    outputs = np.asarray(outputs, dtype=float)
    if head.variant is HeadType.MULTICLASS:
        # probability-weighted class index, zero based
        return float(np.dot(outputs, np.arange(head.k)))
    if head.variant is HeadType.ORDINAL:
        return float(np.sum(outputs))
    return float(outputs[0])


def severity_score(agg: AggregatedPrediction) -> SeverityScore:
    low, high = agg.head.value_range
    return SeverityScore(score_value(agg.head, agg.outputs), agg.head, low, high)


def regression_thresholds(k: int) -> np.ndarray:
    """Equal-width class cut points on ``[0, k-1]``: ``(k-1) * j / k``."""
    return np.array([(k - 1) * j / k for j in range(1, k)])


def class_from_outputs(head: HeadKind, outputs) -> int:
    outputs = np.asarray(outputs, dtype=float)
    v = head.variant
    if v is HeadType.BINARY:
        return int(outputs[0] >= 0.5)
    if v is HeadType.MULTICLASS:
        return int(np.argmax(outputs))  # first maximum on ties
    if v is HeadType.ORDINAL:
        return int(np.count_nonzero(outputs > 0.5))
    # bins [t_j, t_{j+1}); values beyond the nominal range land in the end classes
    return int(np.searchsorted(regression_thresholds(head.k), outputs[0], side="right"))


def assign_class(agg: AggregatedPrediction) -> int:
    return class_from_outputs(agg.head, agg.outputs)


def normalize_score(s: SeverityScore) -> float:
    """Score as a fraction of the head's value range, clamped to [0, 1]."""
    frac = (s.value - s.range_low) / (s.range_high - s.range_low)
    return float(min(1.0, max(0.0, frac)))


def score_values(head: HeadKind, outputs: np.ndarray) -> np.ndarray:
    """Row-wise :func:`score_value` for an ``(n, n_outputs)`` array."""
    outputs = np.asarray(outputs, dtype=float)
    if head.variant is HeadType.MULTICLASS:
        return outputs @ np.arange(head.k, dtype=float)
    if head.variant is HeadType.ORDINAL:
        return outputs.sum(axis=1)
    return outputs[:, 0].copy()


def classes_from_outputs(head: HeadKind, outputs: np.ndarray) -> np.ndarray:
    """Row-wise :func:`class_from_outputs`."""
    outputs = np.asarray(outputs, dtype=float)
    v = head.variant
    if v is HeadType.BINARY:
        return (outputs[:, 0] >= 0.5).astype(int)
    if v is HeadType.MULTICLASS:
        return np.argmax(outputs, axis=1)
    if v is HeadType.ORDINAL:
        return np.count_nonzero(outputs > 0.5, axis=1)
    return np.searchsorted(regression_thresholds(head.k), outputs[:, 0], side="right")
