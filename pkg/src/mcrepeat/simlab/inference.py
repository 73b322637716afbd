"""MC dropout inference into prediction records, and the MC-iteration sweep."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..evaluation import Evaluator, score_records
from ..reporting import fmt_float
from ..records import DETERMINISTIC, PredictionRecord, RecordSet
from .cohort import CohortSplit
from .network import MlpModel, _logits, activate, draw_masks, forward


def image_rng(seed: int, image_index: int) -> np.random.Generator:
    """Dropout stream for one image: child ``image_index`` of ``SeedSequence(seed)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(image_index,))))


def mc_outputs(model: MlpModel, x: np.ndarray, n_mc: int, rng: np.random.Generator) -> np.ndarray:
    """``n_mc`` dropout-enabled passes over one input; row ``i`` is pass ``i``."""
    X = np.broadcast_to(np.asarray(x, dtype=float), (n_mc, x.shape[-1]))
    z, _ = _logits(model, X, draw_masks(model, n_mc, rng))
    return activate(model.head, z)


def predict_records(
    model: MlpModel,
    split: CohortSplit,
    n_mc: int = 50,
    seed: int = 0,
    include_deterministic: bool = True,
) -> RecordSet:
    """Records for every image of ``split``: ``n_mc`` MC rows, then one DETERMINISTIC row."""
    head = model.head
    det = forward(model, split.X, dropout_enabled=False) if include_deterministic else None
    records = []
    for i, (subj, sess, img) in enumerate(split.keys):
        if n_mc:
            outs = mc_outputs(model, split.X[i], n_mc, image_rng(seed, i))
            for m in range(n_mc):
                records.append(PredictionRecord(subj, sess, img, head, m, tuple(outs[m].tolist())))
        if det is not None:
            records.append(PredictionRecord(subj, sess, img, head, DETERMINISTIC, tuple(det[i].tolist())))
    return RecordSet(records, head=head)


@dataclass(frozen=True)
class SweepRow:
    n_mc: int  # DETERMINISTIC (-1) for the dropout-disabled baseline
    loa: float
    disagreement: float
    accuracy: float
    kappa: float | None

    @property
    def is_baseline(self) -> bool:
        return self.n_mc == DETERMINISTIC


def _row(n_mc, ev: Evaluator) -> SweepRow:
    pm = ev.point_metrics()
    return SweepRow(n_mc, pm["loa"], pm["disagreement_rate"], pm["accuracy"], pm["kappa"])


def mc_sweep(
    records: Sequence[PredictionRecord],
    labels: Mapping,
    Ns: Iterable[int],
    positive_from: int | None = None,
) -> list[SweepRow]:
    """Repeatability and classification metrics for each MC sample count.

    The first row is the dropout-disabled baseline when the records contain
    DETERMINISTIC rows.
    """
    records = list(records)
    rows = []
    if any(r.deterministic for r in records):
        base = score_records(records, deterministic=True)
        rows.append(_row(DETERMINISTIC, Evaluator(base, labels, positive_from)))
    for n in Ns:
        scored = score_records(records, n_mc=int(n), deterministic=False)
        rows.append(_row(int(n), Evaluator(scored, labels, positive_from)))
    return rows


SWEEP_COLUMNS = ("n_mc", "loa", "disagreement", "accuracy", "kappa")


def write_sweep_csv(rows: Sequence[SweepRow], path) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow([r.n_mc, fmt_float(r.loa), fmt_float(r.disagreement), fmt_float(r.accuracy), fmt_float(r.kappa)])
    return path
