"""Command-line entry point: ``mcrepeat evaluate | compare | sweep | simulate``.

Every command is a thin wrapper over library calls. Flags can also be set
through environment variables named ``MCREPEAT_<FLAG>`` (for example
``MCREPEAT_N_MC=20`` or ``MCREPEAT_SEED=7``); an explicit flag wins over the
environment. Errors print one line ``error[<code>]: <message>`` to stderr and
exit with status 2 (usage) or 1 (everything else).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import fields, replace
from pathlib import Path

from .errors import McRepeatError
from .evaluation import DEFAULT_BINS, evaluate
from .records import load_labels, load_records
from .reporting import (
    compare_reports,
    dumps,
    read_report,
    write_bland_altman_csv,
    write_calibration_csv,
    write_report,
)
from .scoring import DEFAULT_N_MC
from .simlab.cohort import CohortConfig
from .simlab.experiment import ARCHITECTURES, DEFAULT_SWEEP, ExperimentConfig, SimulationPlan, simulate
from .simlab.inference import mc_sweep, write_sweep_csv
from .simlab.network import TrainConfig
from .stats import DEFAULT_ITERATIONS

ENV_PREFIX = "MCREPEAT_"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _env(name: str, default=None):
    return os.environ.get(ENV_PREFIX + name.upper().replace("-", "_"), default)


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _str_list(text: str) -> list[str]:
    return [x.strip() for x in str(text).split(",") if x.strip()]


def _add(p, flag, **kw):
    """Add an option whose default comes from ``MCREPEAT_<FLAG>`` when set."""
    name = flag.lstrip("-")
    env = _env(name)
    if env is not None:
        kw["default"] = kw["type"](env) if "type" in kw else env
        kw["required"] = False
    p.add_argument(flag, **kw)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mcrepeat", description="Test-retest repeatability evaluation for MC dropout models.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    ev = sub.add_parser("evaluate", help="evaluate a prediction file against labels")
    _add(ev, "--predictions", required=True, help="records file (.csv or .json)")
    _add(ev, "--labels", required=True, help="label CSV")
    _add(ev, "--n-mc", type=int, default=DEFAULT_N_MC, help="MC samples averaged per image (default 50)")
    _add(ev, "--bootstrap-iters", type=int, default=DEFAULT_ITERATIONS, help="bootstrap iterations (default 500)")
    _add(ev, "--bins", type=int, default=DEFAULT_BINS, help="calibration bins (default 10)")
    _add(ev, "--seed", type=int, required=True, help="bootstrap seed")
    _add(ev, "--out", required=True, help="output directory")
    _add(ev, "--positive-from", type=int, default=None, help="lowest positive class for calibration")
    ev.add_argument("--deterministic", action="store_true", help="score the DETERMINISTIC rows")

    cmp_ = sub.add_parser("compare", help="Welch t-test between two reports")
    cmp_.add_argument("report_a")
    cmp_.add_argument("report_b")
    _add(cmp_, "--out", default=None, help="output JSON file (default: stdout)")

    sw = sub.add_parser("sweep", help="metrics as a function of the MC sample count")
    _add(sw, "--predictions", required=True)
    _add(sw, "--labels", required=True)
    _add(sw, "--ns", type=_int_list, default=list(DEFAULT_SWEEP), help="comma-separated sample counts")
    _add(sw, "--seed", type=int, default=0, help="accepted for symmetry; the sweep draws no random numbers")
    _add(sw, "--positive-from", type=int, default=None)
    _add(sw, "--out", required=True, help="output CSV file")

    sim = sub.add_parser("simulate", help="run the synthetic MC vs dropout-free experiment end to end")
    _add(sim, "--out", required=True, help="output directory")
    _add(sim, "--seed", type=int, required=True, help="seed for cohort, models, dropout and bootstrap")
    _add(sim, "--k", type=_int_list, default=[3, 5], help="class counts, comma-separated (default 3,5)")
    _add(sim, "--arch", type=_str_list, default=list(ARCHITECTURES), help="architectures (default mlp2,mlp4)")
    _add(sim, "--n-subjects", type=int, default=None)
    _add(sim, "--n-mc", type=int, default=DEFAULT_N_MC)
    _add(sim, "--bootstrap-iters", type=int, default=DEFAULT_ITERATIONS)
    _add(sim, "--bins", type=int, default=DEFAULT_BINS)
    _add(sim, "--epochs", type=int, default=None)
    _add(sim, "--config", default=None, help="JSON file with ExperimentConfig overrides")
    return parser


def _overrides(cls, data: dict, what: str) -> dict:
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise McRepeatError(f"unknown {what} keys in config: {unknown}")
    return {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}


def experiment_config_from_dict(data: dict) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from nested dictionaries (missing keys keep defaults)."""
    data = dict(data)
    cohort = CohortConfig(**_overrides(CohortConfig, data.pop("cohort", {}), "cohort"))
    train = TrainConfig(**_overrides(TrainConfig, data.pop("train", {}), "train"))
    return ExperimentConfig(cohort=cohort, train=train, **_overrides(ExperimentConfig, data, "experiment"))


def cmd_evaluate(args) -> int:
    records = load_records(args.predictions)
    labels = load_labels(args.labels)
    report = evaluate(
        records,
        labels,
        n_mc=args.n_mc,
        bootstrap_iters=args.bootstrap_iters,
        seed=args.seed,
        n_bins=args.bins,
        deterministic=True if args.deterministic else None,
        positive_from=args.positive_from,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_report(report, out / "report.json")
    write_bland_altman_csv(report, out / "bland_altman.csv")
    write_calibration_csv(report, out / "calibration.csv")
    return 0


def cmd_compare(args) -> int:
    result = compare_reports(read_report(args.report_a), read_report(args.report_b))
    text = dumps(result)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_sweep(args) -> int:
    rows = mc_sweep(load_records(args.predictions), load_labels(args.labels), args.ns, args.positive_from)
    write_sweep_csv(rows, args.out)
    return 0


def cmd_simulate(args) -> int:
    base = ExperimentConfig()
    if args.config:
        base = experiment_config_from_dict(json.loads(Path(args.config).read_text(encoding="utf-8")))
    base = base.with_seed(args.seed)
    if args.n_subjects is not None:
        base = replace(base, cohort=replace(base.cohort, n_subjects=args.n_subjects))
    if args.epochs is not None:
        base = replace(base, train=replace(base.train, epochs=args.epochs))
    base = replace(
        base,
        n_mc=args.n_mc,
        bootstrap_iters=args.bootstrap_iters,
        n_bins=args.bins,
        sweep_ns=tuple(n for n in base.sweep_ns if n <= args.n_mc),
    )
    plan = SimulationPlan(ks=tuple(args.k), architectures=tuple(args.arch), base=base)
    simulate(plan, args.out)
    return 0


COMMANDS = {"evaluate": cmd_evaluate, "compare": cmd_compare, "sweep": cmd_sweep, "simulate": cmd_simulate}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error[usage]: {exc}", file=sys.stderr)
        return 2
    except McRepeatError as exc:
        print(f"error[{exc.code}]: {_one_line(exc)}", file=sys.stderr)
        return 1
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error[io]: {_one_line(exc)}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error[config]: {_one_line(exc)}", file=sys.stderr)
        return 1


def _one_line(exc) -> str:
    return " ".join(str(exc).split())


if __name__ == "__main__":
    sys.exit(main())
