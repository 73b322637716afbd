"""Bland-Altman test-retest statistics.

Each session group with two or more images contributes one Bland-Altman
point: the image pair with the largest absolute score difference. Limits of
agreement are the empirical 2.5th and 97.5th percentiles of those signed
differences.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import McRepeatError
from .records import SessionGroup

log = logging.getLogger(__name__)

LOA_QUANTILES = (0.025, 0.975)


@dataclass(frozen=True)
class BlandAltmanPoint:
    subject_id: str
    session_id: str
    mean_score: float
    diff: float
    image_lo: str
    image_hi: str


@dataclass
class RepeatabilityReport:
    points: list[BlandAltmanPoint]
    loa_low: float
    loa_high: float
    value_range: float
    disagreement_rate: float
    n_sessions: int
    n_skipped: int = 0
    loa_halfwidth_normalized: float = field(init=False)
    loa_width_normalized: float = field(init=False)
    loa_maxabs_normalized: float = field(init=False)

    def __post_init__(self):
        r = self.value_range
        self.loa_halfwidth_normalized = (self.loa_high - self.loa_low) / (2 * r)
        self.loa_width_normalized = (self.loa_high - self.loa_low) / r
        self.loa_maxabs_normalized = max(abs(self.loa_low), abs(self.loa_high)) / r


def _score_of(scores, key):
    s = scores[key]
    return float(getattr(s, "value", s))


def max_difference_pair(image_scores: Sequence[tuple[str, float]]) -> tuple[str, str, float, float]:
    """Pick the pair with the largest absolute difference.

    Returns ``(image_lo, image_hi, score_lo, score_hi)`` where ``image_lo`` is
    the lexicographically smaller id. Ties keep the first pair in sorted order.
    """
    items = sorted(image_scores)
    if len(items) < 2:
        raise McRepeatError("need at least two images to form a pair")
    best = None
    best_gap = -1.0
    for (ia, sa), (ib, sb) in combinations(items, 2):
        gap = abs(sa - sb)
        if gap > best_gap:
            best_gap = gap
            best = (ia, ib, sa, sb)
    return best


def bland_altman_points(
    groups: Iterable[SessionGroup],
    scores: Mapping[tuple[str, str, str], float],
) -> list[BlandAltmanPoint]:
    """One Bland-Altman point per session group with at least two images.

    ``scores`` maps ``(subject_id, session_id, image_id)`` to a severity score
    (a float or anything with a ``value`` attribute). Groups with fewer than
    two images are skipped and logged.
    """
    points = []
    skipped = 0
    for g in groups:
        if len(g.images) < 2:
            skipped += 1
            continue
        pairs = [(img, _score_of(scores, (g.subject_id, g.session_id, img))) for img in g.image_ids]
        lo, hi, s_lo, s_hi = max_difference_pair(pairs)
        points.append(
            BlandAltmanPoint(g.subject_id, g.session_id, (s_lo + s_hi) / 2.0, s_lo - s_hi, lo, hi)
        )
    if skipped:
        log.warning("skipped %d session group(s) with a single image", skipped)
    return points


def empirical_percentile(sorted_values: Sequence[float], q: float) -> float:
    """Linear interpolation at one-based rank ``q*(n-1) + 1`` of a sorted sample."""
    n = len(sorted_values)
    pos = q * (n - 1) + 1
    j = int(math.floor(pos))
    g = pos - j
    if j >= n:
        return float(sorted_values[n - 1])
    lo = sorted_values[j - 1]
    return float(lo + g * (sorted_values[j] - lo))


def limits_of_agreement(diffs: Iterable[float]) -> tuple[float, float]:
    """Non-parametric 95% limits of agreement of test-retest differences."""
    values = np.sort(np.asarray(list(diffs), dtype=float))
    if values.size < 2:
        raise McRepeatError(f"limits of agreement need at least 2 differences, got {values.size}")
    return tuple(empirical_percentile(values, q) for q in LOA_QUANTILES)


def disagreement_rate(group_classes: Iterable[Sequence[int]]) -> float:
    """Fraction of groups whose images were not all assigned the same class."""
    total = 0
    differing = 0
    for classes in group_classes:
        classes = list(classes)
        if len(classes) < 2:
            continue
        total += 1
        differing += len(set(classes)) > 1
    if total == 0:
        raise McRepeatError("no session group with two or more classified images")
    return differing / total


def repeatability_report(
    groups: Sequence[SessionGroup],
    scores: Mapping[tuple[str, str, str], float],
    classes: Mapping[tuple[str, str, str], int],
    value_range: float,
) -> RepeatabilityReport:
    eligible = [g for g in groups if len(g.images) >= 2]
    points = bland_altman_points(eligible, scores)
    loa_low, loa_high = limits_of_agreement(p.diff for p in points)
    rate = disagreement_rate(
        [classes[(g.subject_id, g.session_id, img)] for img in g.image_ids] for g in eligible
    )
    return RepeatabilityReport(
        points=points,
        loa_low=loa_low,
        loa_high=loa_high,
        value_range=value_range,
        disagreement_rate=rate,
        n_sessions=len(eligible),
        n_skipped=len(groups) - len(eligible),
    )
