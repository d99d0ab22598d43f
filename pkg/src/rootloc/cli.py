"""Command-line surface tying the engine, generator, and evaluator together.

Subcommands: run (localize one instance file), generate (emit a synthetic
dataset directory), evaluate (benchmark a dataset directory), sweep (one-at-a-
time parameter sweep). Flag defaults equal the reference configuration, so
``rootloc run instance.csv`` reproduces it exactly.

Exit codes: 0 success, 1 usage or parse error, 2 runtime failure, 3 partial
benchmark failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .datamodel import NoOverallAnomalyError, format_element
from .evaluate import parameter_sweep, run_benchmark
from .generate import DatasetSpec, generate_dataset, preset, PRESETS
from .io import DatasetFormatError, read_instance, write_dataset
from .localize import LocalizerConfig, localize

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
EXIT_PARTIAL = 3


def _add_localizer_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("localizer")
    group.add_argument(
        "--risk-threshold", type=float, default=0.5,
        help="minimum risk for a candidate element (default 0.5)",
    )
    group.add_argument(
        "--power-fraction", type=float, default=0.02,
        help="fraction of the abnormal explanatory power an element must "
        "explain (default 0.02)",
    )
    group.add_argument(
        "--prune-layers", type=int, default=1,
        help="apply the potential-power pruning bound up to this layer; "
        "0 disables pruning (default 1)",
    )
    group.add_argument("--max-iterations", type=int, default=None)
    group.add_argument(
        "--no-outlier-removal", action="store_true",
        help="keep extreme deviation scores when picking the partition threshold",
    )
    group.add_argument(
        "--no-abnormal-ratio", action="store_true",
        help="ablation: fix the abnormal-mass ratio to 1",
    )
    group.add_argument(
        "--no-ripple-ratio", action="store_true",
        help="ablation: fix the ripple-adjustment ratio to 0",
    )
    group.add_argument(
        "--no-weights", action="store_true",
        help="ablation: give every informative leaf weight 1",
    )


def _config_from(args: argparse.Namespace) -> LocalizerConfig:
    return LocalizerConfig(
        risk_threshold=args.risk_threshold,
        power_fraction=args.power_fraction,
        prune_layers=args.prune_layers,
        max_iterations=args.max_iterations,
        no_outlier_removal=args.no_outlier_removal,
        no_abnormal_ratio=args.no_abnormal_ratio,
        no_ripple_ratio=args.no_ripple_ratio,
        no_weights=args.no_weights,
    )


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        config = _config_from(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        table = read_instance(args.instance)
    except FileNotFoundError:
        print(f"error: no such file: {args.instance}", file=sys.stderr)
        return EXIT_USAGE
    except DatasetFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        result = localize(table, config)
    except NoOverallAnomalyError:
        print("error: no overall anomaly (aggregated actual equals forecast)",
              file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    if args.json:
        doc = {
            "termination": result.termination,
            "power_threshold": result.power_threshold,
            "elements": [
                {
                    "element": format_element(r.element, table.schema),
                    "risk": r.risk.risk,
                    "ep": r.explanatory_power,
                    "layer": r.layer,
                    "iteration": r.iteration,
                }
                for r in result.reports
            ],
        }
        print(json.dumps(doc, indent=2))
    else:
        for report in result.reports:
            print(
                f"{format_element(report.element, table.schema)}\t"
                f"risk={report.risk.risk:.6g}\t"
                f"ep={report.explanatory_power:.6g}\t"
                f"layer={report.layer}"
            )
        print(
            f"# {len(result.elements)} element(s), termination={result.termination}",
            file=sys.stderr,
        )
    return EXIT_OK


def _spec_from_args(args: argparse.Namespace) -> DatasetSpec:
    if args.spec_file:
        fields = json.loads(Path(args.spec_file).read_text(encoding="utf-8"))
        for key in (
            "cardinalities",
            "sigma_range",
            "zero_prob_range",
            "anomaly_count_range",
            "anomaly_element_range",
            "severity_range",
            "deviation_range",
        ):
            if key in fields:
                fields[key] = tuple(fields[key])
        spec = DatasetSpec(**fields)
    elif args.preset:
        spec = preset(args.preset)
    else:
        raise ValueError("either --preset or --spec-file is required")
    overrides = {}
    if args.instances is not None:
        overrides["instances"] = args.instances
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        from dataclasses import replace

        spec = replace(spec, **overrides)
    return spec


def _cmd_generate(args: argparse.Namespace) -> int:
    try:
        spec = _spec_from_args(args)
    except (ValueError, TypeError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        dataset = generate_dataset(spec)
        out_dir = write_dataset(dataset, args.out)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {len(dataset.ids)} instances to {out_dir}")
    return EXIT_OK


def _cmd_evaluate(args: argparse.Namespace) -> int:
    dataset_dir = Path(args.dataset)
    try:
        config = _config_from(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        report = run_benchmark(dataset_dir, config, jobs=args.jobs)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DatasetFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    report_dir = Path(args.report_dir) if args.report_dir else dataset_dir
    report_dir.mkdir(parents=True, exist_ok=True)
    report.write_csv(report_dir / "report.csv")
    summary = report.summary_table()
    (report_dir / "summary.txt").write_text(summary, encoding="utf-8")
    print(summary, end="")
    return EXIT_PARTIAL if report.failures else EXIT_OK


def _parse_grid(text: str) -> list[float]:
    if not text:
        return []
    return [float(tok) for tok in text.split(",") if tok]


def _cmd_sweep(args: argparse.Namespace) -> int:
    risk_grid = _parse_grid(args.risk_thresholds)
    power_grid = _parse_grid(args.power_fractions)
    if not risk_grid and not power_grid:
        print("error: provide --risk-thresholds and/or --power-fractions",
              file=sys.stderr)
        return EXIT_USAGE
    try:
        base = _config_from(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        sweep = parameter_sweep(
            Path(args.dataset), risk_grid, power_grid, base=base, jobs=args.jobs,
        )
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.out:
        sweep.write_csv(args.out)
    print(sweep.summary_table(), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rootloc",
        description="Root-cause localization for multi-dimensional measures",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="localize one instance CSV")
    p_run.add_argument("instance", help="instance CSV file")
    p_run.add_argument("--json", action="store_true", help="machine-readable output")
    _add_localizer_flags(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_gen = sub.add_parser("generate", help="emit a synthetic dataset directory")
    p_gen.add_argument("out", help="output directory")
    p_gen.add_argument("--preset", choices=sorted(PRESETS), help="named preset")
    p_gen.add_argument("--spec-file", help="JSON file with DatasetSpec fields")
    p_gen.add_argument("--instances", type=int, default=None,
                       help="override the preset instance count")
    p_gen.add_argument("--seed", type=int, default=None, help="override the seed")
    p_gen.set_defaults(func=_cmd_generate)

    p_eval = sub.add_parser("evaluate", help="benchmark a dataset directory")
    p_eval.add_argument("dataset", help="directory with instance CSVs and truth.csv")
    p_eval.add_argument("--jobs", type=int, default=1, help="parallel instances")
    p_eval.add_argument("--report-dir", default=None,
                        help="where to write report.csv and summary.txt "
                        "(default: the dataset directory)")
    _add_localizer_flags(p_eval)
    p_eval.set_defaults(func=_cmd_evaluate)

    p_sweep = sub.add_parser("sweep", help="one-at-a-time parameter sweep")
    p_sweep.add_argument("dataset", help="directory with instance CSVs and truth.csv")
    p_sweep.add_argument("--risk-thresholds", default="",
                         help="comma-separated risk threshold grid")
    p_sweep.add_argument("--power-fractions", default="",
                         help="comma-separated power fraction grid")
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.add_argument("--out", default=None, help="sweep CSV output path")
    _add_localizer_flags(p_sweep)
    p_sweep.set_defaults(func=_cmd_sweep)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
