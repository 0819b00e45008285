"""Command-line interface.

Each subcommand reads and writes dataset directories, so stages compose via
the filesystem:

    nilmbench synth --output data/
    nilmbench diagnose --input data/ --building 1
    nilmbench preprocess --input data/ --steps steps.json --split-fraction 0.5 --output prep/
    nilmbench train --input prep/train --building 1 --algorithm fhmm --output model.json
    nilmbench disaggregate --input prep/test --building 1 --model model.json --output preds/
    nilmbench evaluate --predictions preds/ --truth prep/test --building 1 --model model.json
    nilmbench run --config config.json

Exit codes: 0 success, 1 stage failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import io as nio
from .data import Measurement, mains_total
from .diagnostics import diagnose
from .disaggregate import disaggregate_co, disaggregate_fhmm
from .metrics import evaluate
from .pipeline import (
    ConfigError,
    RunConfig,
    StageFailure,
    predictions_from_dataset,
    predictions_to_dataset,
    preprocess_building,
    run,
)
from .preprocess import train_test_split, intersect_with_mains, is_aligned
from .stats import (
    DEFAULT_ON_THRESHOLD_W,
    power_histogram,
    proportion_energy_submetered,
    top_k_appliances,
)
from .synth import SynthSpec, default_benchmark_spec, generate
from .training import train_co, train_fhmm

EXIT_OK = 0
EXIT_STAGE_FAILURE = 1
EXIT_CONFIG_ERROR = 2

DATA_DIR_ENV = "NILM_DATA_DIR"


def _default_input(value: str | None) -> str | None:
    return value if value else os.environ.get(DATA_DIR_ENV)


def _apply_overrides(raw: dict, overrides: list[str]) -> dict:
    """Apply --set key=value pairs; dotted keys descend into objects."""
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        try:
            parsed = json.loads(value)
        except json.JSONDecodeError:
            parsed = value
        target = raw
        parts = key.split(".")
        for p in parts[:-1]:
            target = target.setdefault(p, {})
            if not isinstance(target, dict):
                raise ConfigError(f"--set cannot descend into {p!r}")
        target[parts[-1]] = parsed
    return raw


def _load_building(path: str, building: int):
    ds = nio.load_dataset_dir(path)
    if building not in ds.buildings:
        raise ValueError(f"building {building} not found in {path}")
    return ds, ds.buildings[building]


def cmd_import(args) -> int:
    if args.format != "redd":
        raise ConfigError(f"unknown import format {args.format!r}")
    ds, report = nio.import_redd_style(
        args.input, dataset_name=args.name, nominal_period=args.period
    )
    nio.save_dataset_dir(ds, args.output)
    if not args.quiet:
        print(
            f"imported {len(ds.buildings)} buildings "
            f"({report.skipped} rows skipped, {report.duplicates} duplicates)"
        )
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.spec:
        spec = SynthSpec.from_json_text(Path(args.spec).read_text(encoding="utf-8"))
        if args.seed is not None:
            from dataclasses import replace

            spec = replace(spec, seed=args.seed)
    else:
        spec = default_benchmark_spec(seed=args.seed if args.seed is not None else 42)
    ds, _states = generate(spec)
    nio.save_dataset_dir(ds, args.output)
    (Path(args.output) / "synth_spec.json").write_text(
        spec.to_json_text() + "\n", encoding="utf-8"
    )
    if not args.quiet:
        print(f"generated {args.output} (seed {spec.seed})")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    ds = nio.load_dataset_dir(args.input)
    buildings = [args.building] if args.building else sorted(ds.buildings)
    for bid in buildings:
        report = diagnose(ds.buildings[bid], args.gap_threshold)
        if args.output:
            out = Path(args.output)
            out.mkdir(parents=True, exist_ok=True)
            (out / f"diagnostics_house_{bid}.csv").write_text(
                report.to_csv_text(), encoding="utf-8"
            )
            (out / f"diagnostics_house_{bid}.json").write_text(
                report.to_json_text() + "\n", encoding="utf-8"
            )
        if not args.quiet:
            print(report.to_csv_text(), end="")
    return EXIT_OK


def cmd_stats(args) -> int:
    _ds, b = _load_building(args.input, args.building)
    ranked = top_k_appliances(b, args.top_k)
    lines = ["appliance,energy_joules,fraction"]
    for name, energy, fraction in ranked:
        lines.append(f"{name},{energy!r},{fraction!r}")
    table = "\n".join(lines) + "\n"
    submetered = proportion_energy_submetered(b) if b.mains else float("nan")
    regression = None
    if args.weather:
        if not args.correlate:
            raise ConfigError("--weather needs --correlate <appliance>")
        if args.correlate not in b.appliances:
            raise ConfigError(f"--correlate: no appliance {args.correlate!r}")
        external = nio.load_daily_series_csv(args.weather)
        from .stats import correlate_daily

        regression = correlate_daily(b.appliances[args.correlate], external)
    if args.output:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"top_k_house_{args.building}.csv").write_text(table, encoding="utf-8")
        summary = {"building": args.building, "proportion_energy_submetered": submetered}
        (out / f"stats_house_{args.building}.json").write_text(
            json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        for name, c in b.appliances.items():
            hist = power_histogram(c, args.bins)
            (out / f"power_histogram_{name}.csv").write_text(
                hist.to_csv_text(), encoding="utf-8"
            )
        if regression is not None:
            (out / f"correlation_{args.correlate}.csv").write_text(
                regression.to_csv_text(), encoding="utf-8"
            )
    if not args.quiet:
        print(table, end="")
        print(f"proportion_energy_submetered,{submetered!r}")
        if regression is not None:
            print(
                f"correlation {args.correlate}: r_squared={regression.r_squared:.3f} "
                f"slope={regression.slope:.6g} n={regression.n}"
            )
    return EXIT_OK


def cmd_preprocess(args) -> int:
    ds = nio.load_dataset_dir(args.input)
    steps = json.loads(Path(args.steps).read_text(encoding="utf-8")) if args.steps else []
    if not isinstance(steps, list):
        raise ConfigError("steps file must contain a JSON list")
    buildings = {}
    for bid, b in ds.buildings.items():
        if args.building and bid != args.building:
            continue
        buildings[bid] = preprocess_building(b, steps)
    if args.split_fraction is not None:
        train_buildings, test_buildings = {}, {}
        for bid, b in buildings.items():
            if not is_aligned(b):
                b = intersect_with_mains(b)
            train_b, test_b = train_test_split(b, args.split_fraction)
            train_buildings[bid] = train_b
            test_buildings[bid] = test_b
        from dataclasses import replace

        nio.save_dataset_dir(
            replace(ds, buildings=train_buildings), Path(args.output) / "train"
        )
        nio.save_dataset_dir(
            replace(ds, buildings=test_buildings), Path(args.output) / "test"
        )
    else:
        from dataclasses import replace

        nio.save_dataset_dir(replace(ds, buildings=buildings), args.output)
    if not args.quiet:
        print(f"preprocessed {len(buildings)} building(s) -> {args.output}")
    return EXIT_OK


def cmd_train(args) -> int:
    _ds, b = _load_building(args.input, args.building)
    feature = Measurement.from_column_name(args.feature)
    trainer = train_co if args.algorithm == "co" else train_fhmm
    model = trainer(b, feature, args.states)
    Path(args.output).write_text(
        nio.export_model_json(model) + "\n", encoding="utf-8"
    )
    if not args.quiet:
        print(f"trained {args.algorithm} model -> {args.output}")
    return EXIT_OK


def cmd_disaggregate(args) -> int:
    _ds, b = _load_building(args.input, args.building)
    model = nio.import_model_json(Path(args.model).read_text(encoding="utf-8"))
    feature = Measurement.from_column_name(args.feature)
    aggregate = mains_total(b)
    from .training import COModel

    disaggregator = disaggregate_co if isinstance(model, COModel) else disaggregate_fhmm
    predictions = disaggregator(model, aggregate, feature)
    nio.save_dataset_dir(
        predictions_to_dataset(predictions, args.building), args.output
    )
    if not args.quiet:
        print(f"wrote predictions -> {args.output}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    _pds, pb = _load_building(args.predictions, args.building)
    _tds, tb = _load_building(args.truth, args.building)
    feature = Measurement.from_column_name(args.feature)
    if args.model:
        model = nio.import_model_json(Path(args.model).read_text(encoding="utf-8"))
        predictions = predictions_from_dataset(pb, model, feature)
    else:
        # Threshold-only reconstruction: binary states from on-threshold.
        from .disaggregate import AppliancePrediction, Predictions

        first = next(iter(pb.appliances.values()))
        predictions = Predictions(
            timestamps=first.timestamps,
            nominal_period=first.nominal_period,
            appliances={
                name: AppliancePrediction(
                    states=(c.values(feature) > args.on_threshold).astype(np.int64),
                    powers=c.values(feature),
                    state_means=np.array([0.0, 1.0]),
                )
                for name, c in pb.appliances.items()
            },
        )
    report = evaluate(predictions, tb, on_threshold=args.on_threshold, algorithm=args.algorithm)
    if args.output:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        suffix = f"_{args.algorithm}" if args.algorithm else ""
        (out / f"metrics{suffix}.json").write_text(
            report.to_json_text() + "\n", encoding="utf-8"
        )
        (out / f"metrics{suffix}.csv").write_text(report.to_csv_text(), encoding="utf-8")
    if not args.quiet:
        print(report.to_csv_text(), end="")
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {args.config}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    raw = _apply_overrides(raw, args.set or [])
    if args.output:
        raw["output"] = args.output
    if args.seed is not None:
        raw["seed"] = args.seed
    cfg = RunConfig.from_dict(raw, data_dir=os.environ.get(DATA_DIR_ENV))
    result = run(cfg, raw_config=raw, quiet=args.quiet)
    if not args.quiet:
        for alg, report in result.reports.items():
            print(f"[{alg}] FTE={report.fte:.4f} hamming={report.hamming_loss:.4f}")
        print(f"artifacts in {result.output_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nilmbench",
        description="Benchmark toolkit for non-intrusive load monitoring",
    )
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")
    # Accept --quiet after the subcommand too; SUPPRESS keeps the root value
    # when the flag is absent there.
    quiet_parent = argparse.ArgumentParser(add_help=False)
    quiet_parent.add_argument(
        "--quiet", action="store_true", default=argparse.SUPPRESS,
        help="suppress progress output",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("import", parents=[quiet_parent], help="convert a raw dataset to the canonical layout")
    p.add_argument("--format", default="redd", choices=["redd"])
    p.add_argument("--input", required=False)
    p.add_argument("--output", required=True)
    p.add_argument("--name", default="REDD")
    p.add_argument("--period", type=float, default=3.0, help="nominal sample period (s)")
    p.set_defaults(func=cmd_import)

    p = sub.add_parser("synth", parents=[quiet_parent], help="generate a synthetic dataset")
    p.add_argument("--spec", help="synth spec JSON (default: built-in benchmark spec)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("diagnose", parents=[quiet_parent], help="report gaps, dropout and uptime")
    p.add_argument("--input", required=False)
    p.add_argument("--building", type=int, default=None)
    p.add_argument("--gap-threshold", type=float, default=None)
    p.add_argument("--output")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("stats", parents=[quiet_parent], help="appliance usage statistics")
    p.add_argument("--input", required=False)
    p.add_argument("--building", type=int, default=1)
    p.add_argument("--top-k", type=int, default=5)
    p.add_argument("--bins", type=int, default=20)
    p.add_argument("--weather", help="daily external series CSV (date,value)")
    p.add_argument("--correlate", help="appliance to regress against --weather")
    p.add_argument("--output")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("preprocess", parents=[quiet_parent], help="apply preprocessing steps, optionally split")
    p.add_argument("--input", required=False)
    p.add_argument("--output", required=True)
    p.add_argument("--steps", help="JSON file with a list of preprocessing steps")
    p.add_argument("--building", type=int, default=None)
    p.add_argument("--split-fraction", type=float, default=None)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", parents=[quiet_parent], help="learn appliance models")
    p.add_argument("--input", required=False)
    p.add_argument("--building", type=int, default=1)
    p.add_argument("--algorithm", required=True, choices=["co", "fhmm"])
    p.add_argument("--states", type=int, default=2)
    p.add_argument("--feature", default="power_active")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("disaggregate", parents=[quiet_parent], help="run a model on a dataset's mains")
    p.add_argument("--input", required=False)
    p.add_argument("--building", type=int, default=1)
    p.add_argument("--model", required=True)
    p.add_argument("--feature", default="power_active")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_disaggregate)

    p = sub.add_parser("evaluate", parents=[quiet_parent], help="score predictions against ground truth")
    p.add_argument("--predictions", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--building", type=int, default=1)
    p.add_argument("--model", help="model JSON for state reconstruction")
    p.add_argument("--feature", default="power_active")
    p.add_argument("--on-threshold", type=float, default=DEFAULT_ON_THRESHOLD_W)
    p.add_argument("--algorithm", default="", help="label written into the report")
    p.add_argument("--output")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("run", parents=[quiet_parent], help="execute a full config-driven pipeline")
    p.add_argument("--config", required=True)
    p.add_argument("--output")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.set_defaults(func=cmd_run)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for attr in ("input",):
        if hasattr(args, attr) and getattr(args, attr) is None:
            resolved = _default_input(None)
            if resolved:
                setattr(args, attr, resolved)
    try:
        if hasattr(args, "input") and getattr(args, "input", None) is None:
            raise ConfigError(
                f"--input is required (or set ${DATA_DIR_ENV})"
            )
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except StageFailure as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_STAGE_FAILURE
    except Exception as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_STAGE_FAILURE


if __name__ == "__main__":
    sys.exit(main())
