"""End-to-end evaluation of one prediction file against its labels.

The evaluator scores every image once, then computes each metric on a set of
session groups. Bootstrap resamples are sets of group indices, so the
test-retest structure survives resampling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import metrics as M
from .errors import McRepeatError, MissingLabelsError, UndefinedMetricError
from .records import HeadKind, HeadType, PredictionRecord, SessionGroup, group_by_session
from .repeatability import RepeatabilityReport, limits_of_agreement, repeatability_report
from .scoring import DEFAULT_N_MC, aggregate_mc, classes_from_outputs, score_values
from .stats import DEFAULT_ITERATIONS, BootstrapResult, bootstrap_metric

METRIC_NAMES = ("disagreement_rate", "loa", "kappa", "accuracy", "brier")
DEFAULT_BINS = 10

Key = tuple[str, str, str]


def default_positive_from(head: HeadKind) -> int:
    """Lowest class counted as positive when a task is reduced to two classes."""
    if head.variant is HeadType.BINARY:
        return 1
    return head.k // 2


@dataclass
class ScoredImages:
    head: HeadKind
    groups: list[SessionGroup]
    keys: list[Key]
    outputs: np.ndarray
    scores: np.ndarray
    classes: np.ndarray
    deterministic: bool
    n_mc: int | None

    def score_map(self) -> dict[Key, float]:
        return dict(zip(self.keys, self.scores.tolist()))

    def class_map(self) -> dict[Key, int]:
        return dict(zip(self.keys, self.classes.tolist()))


def _select_rows(rows: Sequence[PredictionRecord], deterministic: bool) -> list[PredictionRecord]:
    return [r for r in rows if r.deterministic == deterministic]


def score_records(
    records: Sequence[PredictionRecord],
    n_mc: int | None = DEFAULT_N_MC,
    deterministic: bool | None = None,
) -> ScoredImages:
    """Aggregate and score every image.

    ``deterministic=None`` uses MC rows when the set has any, otherwise the
    DETERMINISTIC rows. Images lacking the selected kind of row are an error.
    """
    records = list(records)
    if not records:
        raise McRepeatError("no prediction records")
    head = records[0].head
    if deterministic is None:
        deterministic = not any(not r.deterministic for r in records)
    groups = group_by_session(records)
    keys, outs = [], []
    for g in groups:
        for image_id, rows in g.images:
            chosen = _select_rows(rows, deterministic)
            if not chosen:
                kind = "DETERMINISTIC" if deterministic else "MC"
                raise McRepeatError(f"image {image_id!r} of subject {g.subject_id!r} has no {kind} rows")
            agg = aggregate_mc(chosen, n_mc)
            keys.append((g.subject_id, g.session_id, image_id))
            outs.append(agg.outputs)
    outputs = np.vstack(outs)
    return ScoredImages(
        head=head,
        groups=groups,
        keys=keys,
        outputs=outputs,
        scores=score_values(head, outputs),
        classes=classes_from_outputs(head, outputs),
        deterministic=deterministic,
        n_mc=None if deterministic else n_mc,
    )


def class_probabilities(head: HeadKind, outputs: np.ndarray) -> np.ndarray | None:
    """Per-class probability matrix used for the Brier score, or None for regression."""
    if head.variant is HeadType.BINARY:
        return outputs[:, 0]
    if head.variant is HeadType.MULTICLASS:
        return outputs
    if head.variant is HeadType.ORDINAL:
        return M.ordinal_class_probabilities(outputs)
    return None


def positive_probability(head: HeadKind, outputs: np.ndarray, positive_from: int) -> np.ndarray | None:
    """Probability that the class is at least ``positive_from``."""
    if head.variant is HeadType.BINARY:
        return outputs[:, 0]
    if head.variant is HeadType.MULTICLASS:
        return np.clip(outputs[:, positive_from:].sum(axis=1), 0.0, 1.0)
    if head.variant is HeadType.ORDINAL:
        return outputs[:, positive_from - 1]
    return None


class Evaluator:
    """Metric functions over arrays of session-group indices."""

    def __init__(self, scored: ScoredImages, labels: Mapping[Key, int], positive_from: int | None = None):
        head = scored.head
        missing = [k for k in scored.keys if k not in labels]
        if missing:
            shown = ", ".join("/".join(k) for k in missing[:20])
            more = f" (+{len(missing) - 20} more)" if len(missing) > 20 else ""
            raise MissingLabelsError(f"{len(missing)} scored image(s) have no label: {shown}{more}")
        y = np.array([labels[k] for k in scored.keys], dtype=int)
        if np.any((y < 0) | (y >= head.k)):
            raise McRepeatError(f"labels must lie in [0, {head.k - 1}] for {head}")
        self.scored = scored
        self.head = head
        self.labels = y
        self.positive_from = default_positive_from(head) if positive_from is None else positive_from
        self.value_range = head.value_range[1] - head.value_range[0]
        self.probs = class_probabilities(head, scored.outputs)

        index = {k: i for i, k in enumerate(scored.keys)}
        n_groups = len(scored.groups)
        k = head.k
        self.group_images = [
            np.array([index[(g.subject_id, g.session_id, img)] for img in g.image_ids]) for g in scored.groups
        ]
        self.eligible = np.array([len(ix) >= 2 for ix in self.group_images])
        self.group_diff = np.full(n_groups, np.nan)
        self.group_disagree = np.zeros(n_groups)
        self.group_cm = np.zeros((n_groups, k, k))
        self.group_sq = np.zeros(n_groups)
        self.group_n = np.zeros(n_groups)

        if self.eligible.any():
            report = repeatability_report(
                scored.groups, scored.score_map(), scored.class_map(), self.value_range
            )
            self.repeatability: RepeatabilityReport | None = report
            diffs = iter(p.diff for p in report.points)
            for gi in np.flatnonzero(self.eligible):
                self.group_diff[gi] = next(diffs)
        else:
            self.repeatability = None

        for gi, ix in enumerate(self.group_images):
            cls = scored.classes[ix]
            self.group_disagree[gi] = float(len(set(cls.tolist())) > 1)
            np.add.at(self.group_cm[gi], (y[ix], cls), 1)
            self.group_n[gi] = len(ix)
            if self.probs is not None:
                self.group_sq[gi] = self._sq_error(ix).sum()

    def _sq_error(self, ix) -> np.ndarray:
        p = self.probs[ix]
        y = self.labels[ix]
        if p.ndim == 1:
            return (p - y) ** 2
        return np.sum((p - np.eye(self.head.k)[y]) ** 2, axis=1)

    @property
    def all_groups(self) -> np.ndarray:
        return np.arange(len(self.scored.groups))

    def _eligible(self, idx):
        idx = np.asarray(idx, dtype=int)
        return idx[self.eligible[idx]]

    def disagreement_rate(self, idx) -> float:
        sel = self._eligible(idx)
        if sel.size == 0:
            raise UndefinedMetricError("no test-retest session groups in sample")
        return float(self.group_disagree[sel].mean())

    def loa(self, idx) -> float:
        """Normalized half-width of the 95% limits of agreement."""
        sel = self._eligible(idx)
        if sel.size < 2:
            raise UndefinedMetricError("fewer than 2 Bland-Altman points in sample")
        low, high = limits_of_agreement(self.group_diff[sel])
        return (high - low) / (2.0 * self.value_range)

    def confusion(self, idx) -> M.ConfusionMatrix:
        cm = self.group_cm[np.asarray(idx, dtype=int)].sum(axis=0)
        return M.ConfusionMatrix(np.rint(cm).astype(np.int64))

    def kappa(self, idx) -> float:
        return M.quadratic_weighted_kappa(self.confusion(idx))

    def accuracy(self, idx) -> float:
        cm = self.group_cm[np.asarray(idx, dtype=int)].sum(axis=0)
        return float(np.trace(cm) / cm.sum())

    def brier(self, idx) -> float:
        if self.probs is None:
            raise UndefinedMetricError(f"Brier score is undefined for {self.head}")
        idx = np.asarray(idx, dtype=int)
        return float(self.group_sq[idx].sum() / self.group_n[idx].sum())

    def metric(self, name: str):
        if name == "disagreement_rate":
            return self.disagreement_rate
        if name not in METRIC_NAMES:
            raise KeyError(name)
        return getattr(self, name)

    def point_metrics(self) -> dict[str, float | None]:
        out = {}
        for name in METRIC_NAMES:
            try:
                out[name] = self.metric(name)(self.all_groups)
            except UndefinedMetricError:
                out[name] = None
        return out

    def calibration(self, n_bins: int = DEFAULT_BINS) -> M.CalibrationReport | None:
        if self.probs is None:
            return None
        pos = positive_probability(self.head, self.scored.outputs, self.positive_from)
        return M.calibration_report(
            self.labels, self.probs, (self.labels >= self.positive_from).astype(int), pos, n_bins
        )


@dataclass
class EvaluationReport:
    head: HeadKind
    n_mc: int | None
    deterministic: bool
    n_images: int
    n_sessions: int
    n_test_retest_sessions: int
    bootstrap_iterations: int
    seed: int
    metrics: dict[str, BootstrapResult | None]
    repeatability: RepeatabilityReport | None
    confusion: M.ConfusionMatrix
    calibration: M.CalibrationReport | None
    positive_from: int
    n_bins: int
    extra: dict = field(default_factory=dict)


def evaluate(
    records: Sequence[PredictionRecord],
    labels: Mapping[Key, int],
    n_mc: int | None = DEFAULT_N_MC,
    bootstrap_iters: int = DEFAULT_ITERATIONS,
    seed: int = 0,
    n_bins: int = DEFAULT_BINS,
    deterministic: bool | None = None,
    positive_from: int | None = None,
) -> EvaluationReport:
    """Score records, compute all metrics, and bootstrap each over session groups."""
    scored = score_records(records, n_mc=n_mc, deterministic=deterministic)
    ev = Evaluator(scored, labels, positive_from)
    units = ev.all_groups
    results = {}
    for name in METRIC_NAMES:
        if name == "brier" and ev.probs is None:
            results[name] = None
            continue
        results[name] = bootstrap_metric(units, ev.metric(name), iterations=bootstrap_iters, seed=seed)
    return EvaluationReport(
        head=scored.head,
        n_mc=scored.n_mc,
        deterministic=scored.deterministic,
        n_images=len(scored.keys),
        n_sessions=len(scored.groups),
        n_test_retest_sessions=int(ev.eligible.sum()),
        bootstrap_iterations=bootstrap_iters,
        seed=seed,
        metrics=results,
        repeatability=ev.repeatability,
        confusion=ev.confusion(units),
        calibration=ev.calibration(n_bins),
        positive_from=ev.positive_from,
        n_bins=n_bins,
    )
