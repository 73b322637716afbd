"""Train MC-dropout and dropout-free models on a synthetic cohort and evaluate both.

For every head the experiment trains two networks of the same architecture on
the train split:

* an MC model with dropout, predicted with ``n_mc`` dropout-enabled passes
  (plus one dropout-disabled pass per image for the sweep baseline), and
* a baseline model trained without dropout, predicted with one deterministic
  pass.

Both prediction sets go through the same evaluation, their bootstrap
distributions are compared with Welch's t-test, and the MC records are swept
over sample counts.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import McRepeatError
from ..evaluation import DEFAULT_BINS, EvaluationReport, default_positive_from, evaluate
from ..records import HeadKind, RecordSet, write_labels, write_records
from ..reporting import (
    compare_reports,
    dumps,
    report_to_dict,
    write_bland_altman_csv,
    write_calibration_csv,
    write_report,
)
from ..scoring import DEFAULT_N_MC
from ..stats import DEFAULT_ITERATIONS
from .cohort import CohortConfig, CohortSplit, SyntheticCohort, generate_cohort
from .inference import SweepRow, mc_sweep, predict_records, write_sweep_csv
from .network import MlpModel, TrainConfig, TrainHistory, train

HEAD_NAMES = ("binary", "multiclass", "ordinal", "regression")
DEFAULT_SWEEP = (1, 2, 5, 10, 20, 30, 40, 50)
ARCHITECTURES = {"mlp2": (64, 64), "mlp4": (64, 64, 64, 64)}


def head_for(name: str, k: int) -> HeadKind:
    if name == "binary":
        return HeadKind.binary()
    if name == "multiclass":
        return HeadKind.multiclass(k)
    if name == "ordinal":
        return HeadKind.ordinal(k)
    if name == "regression":
        return HeadKind.regression(k)
    raise McRepeatError(f"unknown head {name!r}; expected one of {HEAD_NAMES}")


def training_targets(split: CohortSplit, name: str) -> np.ndarray:
    """Binary heads learn ``label >= k // 2``; the regression head regresses the class index."""
    if name == "binary":
        return (split.labels >= split.k // 2).astype(int)
    if name == "regression":
        return split.labels.astype(float)
    return split.labels


def evaluation_labels(split: CohortSplit, name: str) -> dict:
    return split.label_map(split.k // 2 if name == "binary" else None)


@dataclass(frozen=True)
class ExperimentConfig:
    cohort: CohortConfig = field(default_factory=CohortConfig)
    heads: tuple[str, ...] = HEAD_NAMES
    hidden: tuple[int, ...] = ARCHITECTURES["mlp2"]
    dropout_rate: float = 0.2
    train: TrainConfig = field(default_factory=TrainConfig)
    n_mc: int = DEFAULT_N_MC
    bootstrap_iters: int = DEFAULT_ITERATIONS
    sweep_ns: tuple[int, ...] = DEFAULT_SWEEP
    n_bins: int = DEFAULT_BINS
    seed: int = 0  # model init, dropout streams, bootstrap

    def __post_init__(self):
        for h in self.heads:
            head_for(h, self.cohort.k)
        if not 0.0 < self.dropout_rate < 1.0:
            raise McRepeatError("dropout_rate must lie in (0, 1) for the MC model")
        if self.sweep_ns and max(self.sweep_ns) > self.n_mc:
            raise McRepeatError(f"sweep needs up to {max(self.sweep_ns)} MC samples but n_mc is {self.n_mc}")

    def with_seed(self, seed: int) -> "ExperimentConfig":
        """Same configuration with one seed driving cohort, training, dropout and bootstrap."""
        return replace(
            self, cohort=replace(self.cohort, seed=seed), train=replace(self.train, seed=seed), seed=seed
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cohort"] = self.cohort.to_dict()
        for key in ("heads", "hidden", "sweep_ns"):
            d[key] = list(d[key])
        return d

    def digest(self) -> str:
        """sha256 of the canonical JSON form of the configuration."""
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass
class HeadResult:
    name: str
    head: HeadKind
    labels: dict
    mc_records: RecordSet
    baseline_records: RecordSet
    mc_report: EvaluationReport
    baseline_report: EvaluationReport
    comparison: dict
    sweep: list[SweepRow]
    mc_history: TrainHistory
    baseline_history: TrainHistory

    def summary(self) -> dict:
        def point(rep, name):
            res = rep.metrics[name]
            return None if res is None else res.point_estimate

        names = [n for n in self.comparison["metrics"] if self.comparison["metrics"][n] is not None]
        return {
            "mc": {n: point(self.mc_report, n) for n in names},
            "baseline": {n: point(self.baseline_report, n) for n in names},
            "p_value": {n: self.comparison["metrics"][n]["p_value"] for n in names},
        }


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    cohort: SyntheticCohort
    heads: dict[str, HeadResult]


def fit(split: CohortSplit, name: str, hidden, dropout_rate: float, train_cfg: TrainConfig, seed: int):
    head = head_for(name, split.k)
    model = MlpModel.create(split.X.shape[1], hidden, head, dropout_rate, seed=seed)
    return train(model, split.X, training_targets(split, name), train_cfg)


def run_head(cohort: SyntheticCohort, name: str, cfg: ExperimentConfig) -> HeadResult:
    tr, te = cohort.split("train"), cohort.split("test")
    labels = evaluation_labels(te, name)
    positive_from = 1 if name == "binary" else default_positive_from(head_for(name, te.k))

    mc_model, mc_hist = fit(tr, name, cfg.hidden, cfg.dropout_rate, cfg.train, cfg.seed)
    base_model, base_hist = fit(tr, name, cfg.hidden, 0.0, cfg.train, cfg.seed)
    mc_records = predict_records(mc_model, te, n_mc=cfg.n_mc, seed=cfg.seed, include_deterministic=True)
    base_records = predict_records(base_model, te, n_mc=0, seed=cfg.seed, include_deterministic=True)

    common = dict(bootstrap_iters=cfg.bootstrap_iters, seed=cfg.seed, n_bins=cfg.n_bins, positive_from=positive_from)
    mc_report = evaluate(mc_records, labels, n_mc=cfg.n_mc, deterministic=False, **common)
    base_report = evaluate(base_records, labels, deterministic=True, **common)
    comparison = compare_reports(report_to_dict(mc_report), report_to_dict(base_report))
    sweep = mc_sweep(mc_records, labels, cfg.sweep_ns, positive_from) if cfg.sweep_ns else []
    return HeadResult(
        name=name,
        head=mc_model.head,
        labels=labels,
        mc_records=mc_records,
        baseline_records=base_records,
        mc_report=mc_report,
        baseline_report=base_report,
        comparison=comparison,
        sweep=sweep,
        mc_history=mc_hist,
        baseline_history=base_hist,
    )


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    cohort = generate_cohort(cfg.cohort)
    return ExperimentResult(cfg, cohort, {name: run_head(cohort, name, cfg) for name in cfg.heads})


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_experiment(result: ExperimentResult, out_dir) -> list[Path]:
    """Write records, labels, reports, comparison, sweep and plot CSVs for every head."""
    out_dir = Path(out_dir)
    written = []
    for name, hr in result.heads.items():
        d = out_dir / name
        d.mkdir(parents=True, exist_ok=True)
        written += [
            write_records(hr.mc_records, d / "predictions_mc.csv"),
            write_records(hr.baseline_records, d / "predictions_baseline.csv"),
            write_labels(hr.labels, d / "labels.csv"),
            write_report(hr.mc_report, d / "report_mc.json"),
            write_report(hr.baseline_report, d / "report_baseline.json"),
            write_bland_altman_csv(hr.mc_report, d / "bland_altman_mc.csv"),
            write_bland_altman_csv(hr.baseline_report, d / "bland_altman_baseline.csv"),
        ]
        (d / "compare.json").write_text(dumps(hr.comparison), encoding="utf-8")
        written.append(d / "compare.json")
        if hr.mc_report.calibration is not None:
            written += [
                write_calibration_csv(hr.mc_report, d / "calibration_mc.csv"),
                write_calibration_csv(hr.baseline_report, d / "calibration_baseline.csv"),
            ]
        if hr.sweep:
            written.append(write_sweep_csv(hr.sweep, d / "sweep.csv"))
    summary = {name: hr.summary() for name, hr in result.heads.items()}
    (out_dir / "summary.json").write_text(dumps(summary), encoding="utf-8")
    written.append(out_dir / "summary.json")
    return written


@dataclass(frozen=True)
class SimulationPlan:
    """The cohorts and architectures of one ``simulate`` run."""

    ks: tuple[int, ...] = (3, 5)
    architectures: tuple[str, ...] = ("mlp2", "mlp4")
    base: ExperimentConfig = field(default_factory=ExperimentConfig)

    def configs(self) -> dict[str, ExperimentConfig]:
        out = {}
        for k in self.ks:
            for arch in self.architectures:
                if arch not in ARCHITECTURES:
                    raise McRepeatError(f"unknown architecture {arch!r}; expected one of {sorted(ARCHITECTURES)}")
                cfg = replace(self.base, cohort=replace(self.base.cohort, k=k), hidden=ARCHITECTURES[arch])
                out[f"k{k}/{arch}"] = cfg
        return out


def simulate(plan: SimulationPlan, out_dir) -> dict:
    """Run every configured experiment and write artifacts plus ``manifest.json``.

    The manifest lists each configuration with its seeds and hash, and the
    sha256 of every file written. It holds no timestamps, so identical plans
    give identical manifests.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    runs, files = {}, []
    for label, cfg in plan.configs().items():
        result = run_experiment(cfg)
        files += write_experiment(result, out_dir / label)
        runs[label] = {
            "config": cfg.to_dict(),
            "config_hash": cfg.digest(),
            "seeds": {"cohort": cfg.cohort.seed, "model": cfg.seed, "train": cfg.train.seed},
        }
    manifest = {
        "runs": runs,
        "files": {p.relative_to(out_dir).as_posix(): _sha256(p) for p in sorted(files)},
    }
    (out_dir / "manifest.json").write_text(dumps(manifest), encoding="utf-8")
    return manifest
