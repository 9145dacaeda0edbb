"""Command-line entry points: run, sweep, privacy-budget, synth."""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import data, experiment, privacy
from .errors import ConfigError
from .experiment import ExperimentConfig


def _load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc


def _apply_dataset_flags(raw: dict, args) -> dict:
    ds = raw.setdefault("dataset", {})
    if args.label_col:
        ds["label_col"] = args.label_col
    if args.group_col:
        ds["group_col"] = args.group_col
    return raw


def _cmd_run(args) -> int:
    raw = _load_config(args.config)
    if args.seed is not None:
        raw["seed"] = args.seed
    cfg = ExperimentConfig.from_dict(_apply_dataset_flags(raw, args))
    report = experiment.run_experiment(cfg)
    os.makedirs(args.out, exist_ok=True)
    experiment.emit_report(report, "json", os.path.join(args.out, "report.json"))
    experiment.emit_report(report, "csv", os.path.join(args.out, "diagnostics.csv"))
    if "standardization" in report.config:
        with open(os.path.join(args.out, "standardization.json"), "w",
                  encoding="utf-8") as fh:
            json.dump(report.config["standardization"], fh, indent=2)
    print(json.dumps({"gap_01": report.gap_01,
                      "deviation_mean": report.deviation.first_moment,
                      "epsilon": report.privacy["epsilon"],
                      "out": args.out}))
    return 0


def _cmd_sweep(args) -> int:
    raw = _load_config(args.config)
    for key in ("base", "param", "values"):
        if key not in raw:
            raise ConfigError(f"sweep config must contain {key!r}")
    base_raw = raw["base"]
    if args.seed is not None:
        base_raw["seed"] = args.seed
    base = ExperimentConfig.from_dict(_apply_dataset_flags(base_raw, args))
    rows = experiment.run_sweep(base, raw["param"], raw["values"])
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "sweep.csv")
    experiment.emit_sweep_csv(rows, path)
    failures = sum(1 for r in rows if r.get("error"))
    print(json.dumps({"rows": len(rows), "failures": failures, "out": path}))
    return 0


def _cmd_privacy_budget(args) -> int:
    ledger = privacy.record_queries(privacy.RdpLedger(), args.m, args.sigma)
    eps, gamma = privacy.rdp_to_dp(ledger, args.delta)
    print(json.dumps({"epsilon": eps, "gamma_star": gamma, "coeff": ledger.coeff}))
    return 0


def _cmd_synth(args) -> int:
    ds = data.synth_two_group(args.n, args.d, args.margins, args.scales, args.seed)
    header = [f"x{j}" for j in range(args.d)] + ["label", "group"]
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(ds.n):
            row = [repr(float(v)) for v in ds.X[i]] + [str(ds.y[i]), str(ds.group[i])]
            fh.write(",".join(row) + "\n")
    print(json.dumps({"rows": ds.n, "out": args.out}))
    return 0


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pate-fairness",
        description="Private ensemble training with a group-fairness audit")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment from a JSON config")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--label-col", default=None)
    run.add_argument("--group-col", default=None)
    run.set_defaults(func=_cmd_run)

    sweep = sub.add_parser("sweep", help="sweep one parameter over a value list")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--out", required=True)
    sweep.add_argument("--seed", type=int, default=None)
    sweep.add_argument("--label-col", default=None)
    sweep.add_argument("--group-col", default=None)
    sweep.set_defaults(func=_cmd_sweep)

    budget = sub.add_parser("privacy-budget", help="account m noisy-vote queries")
    budget.add_argument("--m", type=int, required=True)
    budget.add_argument("--sigma", type=float, required=True)
    budget.add_argument("--delta", type=float, required=True)
    budget.set_defaults(func=_cmd_privacy_budget)

    synth = sub.add_parser("synth", help="emit a synthetic two-group CSV")
    synth.add_argument("--n", type=int, required=True)
    synth.add_argument("--d", type=int, required=True)
    synth.add_argument("--margins", type=float, nargs=2, default=[2.0, 2.0])
    synth.add_argument("--scales", type=float, nargs=2, default=[1.0, 1.0])
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--out", required=True)
    synth.set_defaults(func=_cmd_synth)
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
