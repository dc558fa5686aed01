"""Command-line entry point: prepare, run, report, synth.

Exit codes: 0 success, 1 usage error, 2 data error, 3 some experiments failed
(partial results are still written).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import platform
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .csvio import read_csv, write_csv, write_json
from .errors import ForecastError
from .harness import (ALL_METHODS, RunSettings, aggregate, build_grid, read_results, run_grid,
                      schedule, write_report)
from .hyperopt import NeuralSettings
from .prepare import adjust, estimate_reference_sigma
from .series import NOISE_GENERATOR, AdjustmentParams, RateProfile
from .synth import SynthConfig, generate

log = logging.getLogger("dspforecast")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_FAILURES = 0, 1, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


@dataclass(frozen=True)
class DatasetEntry:
    id: str
    path: str
    step: Optional[float] = None


@dataclass
class RunConfig:
    datasets: list = field(default_factory=list)
    rates: list = field(default_factory=lambda: [r.label for r in RateProfile])
    methods: list = field(default_factory=lambda: list(ALL_METHODS))
    adjustment: dict = field(default_factory=dict)
    budget: dict = field(default_factory=dict)
    neural: dict = field(default_factory=dict)
    seed: int = 0
    refit_every: Optional[int] = None
    out: str = "runs/default"

    def validate(self, check_paths: bool = True):
        ids = [d.id for d in self.datasets]
        if len(set(ids)) != len(ids):
            raise UsageError(f"dataset ids must be unique, got {ids}")
        for rate in self.rates:
            try:
                RateProfile.parse(rate)
            except ValueError as exc:
                raise UsageError(str(exc)) from None
        unknown = [m for m in self.methods if m not in ALL_METHODS]
        if unknown:
            raise UsageError(f"unknown methods {unknown}; choose from {list(ALL_METHODS)}")
        if check_paths:
            missing = [d.path for d in self.datasets if not Path(d.path).exists()]
            if missing:
                raise DataError(f"dataset files not found: {missing}")

    def to_dict(self) -> dict:
        return {
            "datasets": [{"id": d.id, "path": d.path, "step": d.step} for d in self.datasets],
            "rates": list(self.rates), "methods": list(self.methods),
            "adjustment": self.adjustment, "budget": self.budget, "neural": self.neural,
            "seed": self.seed, "refit_every": self.refit_every, "out": self.out,
        }

    def digest(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()

    def adjustment_params(self, noise_sigma: float | None = None) -> AdjustmentParams:
        a = dict(self.adjustment)
        sigma = a.get("noise_sigma", 0.01) if noise_sigma is None else noise_sigma
        return AdjustmentParams(noise_sigma=float(sigma),
                                target_mean=float(a.get("target_mean", 108_000.0)),
                                target_std=float(a.get("target_std", 12_000.0)),
                                seed=int(a.get("seed", self.seed)))

    def run_settings(self) -> RunSettings:
        b = self.budget
        return RunSettings(max_trials=int(b.get("max_trials", 25)),
                           max_wall_clock=b.get("max_wall_clock"),
                           trial_parallelism=int(b.get("trial_parallelism", 1)),
                           neural=NeuralSettings(**self.neural),
                           trace_dir=str(Path(self.out) / "traces"))


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise UsageError(f"config file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from None
    base = path.parent
    cfg = RunConfig()
    known = set(cfg.to_dict())
    extra = set(data) - known
    if extra:
        raise UsageError(f"unknown config keys {sorted(extra)}")
    for key, value in data.items():
        if key == "datasets":
            entries = []
            for d in value:
                p = Path(d["path"])
                entries.append(DatasetEntry(str(d["id"]), os.path.normpath(p if p.is_absolute() else base / p),
                                            d.get("step")))
            cfg.datasets = entries
        elif key == "out":
            p = Path(value)
            cfg.out = os.path.normpath(p if p.is_absolute() else base / p)
        else:
            setattr(cfg, key, value)
    return cfg


def _split_list(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if getattr(args, "out", None):
        cfg.out = args.out
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "methods", None):
        cfg.methods = _split_list(args.methods)
    if getattr(args, "rates", None):
        cfg.rates = _split_list(args.rates)
    if getattr(args, "datasets", None):
        wanted = _split_list(args.datasets)
        unknown = set(wanted) - {d.id for d in cfg.datasets}
        if unknown:
            raise UsageError(f"unknown datasets {sorted(unknown)}")
        cfg.datasets = [d for d in cfg.datasets if d.id in wanted]
    if getattr(args, "max_trials", None) is not None:
        cfg.budget = {**cfg.budget, "max_trials": args.max_trials}
    return cfg


def write_manifest(cfg: RunConfig, command: str, argv, extra=None) -> Path:
    out = Path(cfg.out)
    manifest = {
        "command": command,
        "argv": list(argv),
        "config": cfg.to_dict(),
        "config_sha256": cfg.digest(),
        "seed": cfg.seed,
        "tool_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "noise_generator": NOISE_GENERATOR,
        **(extra or {}),
    }
    path = out / f"manifest_{command}.json"
    write_json(manifest, path)
    return path


def prepared_path(out, dataset: str, rate_label: str) -> Path:
    return Path(out) / "prepared" / f"{dataset}_{rate_label}.csv"


def cmd_prepare(cfg: RunConfig, argv=()) -> int:
    cfg.validate()
    if not cfg.datasets:
        raise UsageError("no datasets configured")
    raws = {}
    for d in cfg.datasets:
        try:
            raws[d.id] = read_csv(d.path, step=d.step)
        except ForecastError as exc:
            raise DataError(str(exc)) from None
    sigma = cfg.adjustment.get("noise_sigma", 0.01)
    if sigma == "estimate":
        fine = [s for s in raws.values() if s.step <= 300]
        if not fine:
            raise DataError("noise_sigma 'estimate' needs at least one dataset sampled at 5 min or finer")
        sigma = estimate_reference_sigma(fine)
        log.info("estimated noise sigma %.5f from %d fine traces", sigma, len(fine))
    params = cfg.adjustment_params(float(sigma))
    rates = [RateProfile.parse(r) for r in cfg.rates]
    written = []
    for d in cfg.datasets:
        try:
            prepared = adjust(d.id, raws[d.id], params, rates)
        except ForecastError as exc:
            raise DataError(f"{d.id}: {exc}") from None
        for label, series in prepared.variants.items():
            path = prepared_path(cfg.out, d.id, label)
            write_csv(series, path)
            write_json(prepared.metadata[label], path.with_suffix(".json"))
            written.append(str(path))
    write_manifest(cfg, "prepare", argv, {"noise_sigma": params.noise_sigma, "files": written})
    print(f"prepared {len(written)} files under {Path(cfg.out) / 'prepared'}")
    return EXIT_OK


def cmd_run(cfg: RunConfig, argv=(), parallelism: int = 1, dry_run: bool = False) -> int:
    """Run the grid; with ``dry_run`` only write the cell schedule to OUT/schedule.jsonl."""
    cfg.validate(check_paths=False)
    rates = [RateProfile.parse(r) for r in cfg.rates]
    specs = build_grid([d.id for d in cfg.datasets], rates, cfg.methods, cfg.seed,
                       cfg.refit_every)
    if not specs:
        raise UsageError("the selection leaves no experiments to run")
    if dry_run:
        cells = schedule(specs)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "schedule.jsonl", "w") as fh:
            for cell in cells:
                fh.write(json.dumps(cell, sort_keys=True) + "\n")
        n_off = sum(c["status"] == "unavailable" for c in cells)
        print(f"{len(cells)} cells: {len(cells) - n_off} scheduled, {n_off} unavailable; "
              f"schedule in {out / 'schedule.jsonl'}")
        return EXIT_OK
    data = {}
    for spec in specs:
        key = (spec.dataset, spec.rate.label)
        if key in data or not spec.available:
            continue
        path = prepared_path(cfg.out, *key)
        if not path.exists():
            raise DataError(f"prepared data {path} is missing; run the 'prepare' command first")
        try:
            data[key] = read_csv(path)
        except ForecastError as exc:
            raise DataError(str(exc)) from None
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    results_path = out / "results.jsonl"
    results_path.unlink(missing_ok=True)

    def emit(result):
        with open(results_path, "a") as fh:
            fh.write(result.to_json() + "\n")
        log.info("%s %s %s smape=%s", *result.spec.key, result.smape)

    results = run_grid(specs, data, cfg.run_settings(), parallelism, on_result=emit)
    failed = [r for r in results if r.status == "failed"]
    write_manifest(cfg, "run", argv, {"n_cells": len(specs), "n_failed": len(failed),
                                      "results": str(results_path)})
    print(f"{len(results)} cells, {len(failed)} failed; results in {results_path}")
    return EXIT_FAILURES if failed else EXIT_OK


def cmd_report(cfg: RunConfig, results_path=None, argv=()) -> int:
    path = Path(results_path) if results_path else Path(cfg.out) / "results.jsonl"
    if not path.exists():
        raise DataError(f"results file {path} not found")
    try:
        results = read_results(path)
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise DataError(f"cannot parse {path}: {exc}") from None
    if not results:
        raise DataError(f"{path} holds no results; nothing to report")
    report = aggregate(results)
    files = write_report(report, Path(cfg.out) / "report")
    write_manifest(cfg, "report", argv, {"results": str(path), "files": [str(f) for f in files]})
    print(report.table.to_markdown())
    return EXIT_OK


def cmd_synth(out_path, cfg: SynthConfig, argv=()) -> int:
    series = generate(cfg)
    write_csv(series, out_path)
    write_json({"generator": "dspforecast.synth", **cfg.to_dict(), "tool_version": __version__},
               Path(out_path).with_suffix(".json"))
    print(f"wrote {len(series)} points to {out_path}")
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dspforecast", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--seed", type=int)
        p.add_argument("--methods", help="comma-separated method ids")
        p.add_argument("--rates", help="comma-separated rates: 5min,15min,1h")
        p.add_argument("--datasets", help="comma-separated dataset ids")
        p.add_argument("--parallelism", type=int, default=1)
        p.add_argument("--max-trials", type=int, dest="max_trials")

    common(sub.add_parser("prepare", help="adjust raw traces into 5min/15min/1h variants"))
    run = sub.add_parser("run", help="run the experiment grid on prepared data")
    common(run)
    run.add_argument("--dry-run", action="store_true", dest="dry_run",
                     help="only write the cell schedule; needs no prepared data")
    rep = sub.add_parser("report", help="render result tables and plot data")
    common(rep)
    rep.add_argument("--results", help="results JSON-lines file (default: OUT/results.jsonl)")
    syn = sub.add_parser("synth", help="write a seeded synthetic trace")
    syn.add_argument("--out", required=True, help="CSV file to write")
    syn.add_argument("--seed", type=int, default=0)
    syn.add_argument("--days", type=int, default=28)
    syn.add_argument("--step", type=int, default=3600)
    syn.add_argument("--trend", type=float, default=SynthConfig.trend_per_day,
                     help="relative growth per day")
    syn.add_argument("--noise", type=float, default=SynthConfig.noise,
                     help="relative noise std")
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "synth":
            cfg = SynthConfig(days=args.days, step=args.step, trend_per_day=args.trend,
                              noise=args.noise, seed=args.seed)
            return cmd_synth(args.out, cfg, argv)
        if args.parallelism < 1:
            raise UsageError("--parallelism must be >= 1")
        cfg = apply_overrides(load_config(args.config), args)
        if args.command == "prepare":
            return cmd_prepare(cfg, argv)
        if args.command == "run":
            return cmd_run(cfg, argv, args.parallelism, args.dry_run)
        return cmd_report(cfg, args.results, argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ForecastError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
