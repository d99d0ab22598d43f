"""Element-level F1 scoring, benchmark runner with timing, and sweeps.

F1 is micro-averaged: true positives, false positives, and false negatives
are summed over all instances before the single F1 = 2TP / (2TP + FP + FN) is
computed, with exact element equality (same wildcards, same values) deciding a
match. The benchmark runner parses each instance once and times only the
localization call; instances can be mapped over worker processes and the fold
is deterministic regardless of the job count.
"""

from __future__ import annotations

import csv
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

from .datamodel import Element
from .generate import GeneratedDataset, GroundTruth
from .io import instance_paths, read_instance, read_truth, TRUTH_FILENAME
from .localize import LocalizerConfig, RootCauseSet, ablation_variants, localize


@dataclass
class InstanceResult:
    instance_id: str
    true_positives: int
    false_positives: int
    false_negatives: int
    predicted: int
    runtime: float | None = None
    scenario: str = ""


@dataclass
class EvalReport:
    """Aggregate scores plus the per-instance rows they were folded from."""

    rows: list[InstanceResult]
    config: LocalizerConfig | None = None
    failures: dict[str, str] = field(default_factory=dict)

    @property
    def true_positives(self) -> int:
        return sum(r.true_positives for r in self.rows)

    @property
    def false_positives(self) -> int:
        return sum(r.false_positives for r in self.rows)

    @property
    def false_negatives(self) -> int:
        return sum(r.false_negatives for r in self.rows)

    @property
    def f1(self) -> float:
        denom = 2 * self.true_positives + self.false_positives + self.false_negatives
        return 2 * self.true_positives / denom if denom else 1.0

    @property
    def runtimes(self) -> list[float]:
        return [r.runtime for r in self.rows if r.runtime is not None]

    @property
    def mean_runtime(self) -> float:
        times = self.runtimes
        return statistics.fmean(times) if times else 0.0

    @property
    def stdev_runtime(self) -> float:
        times = self.runtimes
        return statistics.stdev(times) if len(times) > 1 else 0.0

    def scenario_breakdown(self) -> dict[str, tuple[float, int]]:
        """Micro F1 and instance count per (layer, #elements) scenario."""
        groups: dict[str, list[InstanceResult]] = {}
        for row in self.rows:
            groups.setdefault(row.scenario or "unlabeled", []).append(row)
        out: dict[str, tuple[float, int]] = {}
        for label in sorted(groups):
            rows = groups[label]
            tp = sum(r.true_positives for r in rows)
            denom = 2 * tp + sum(r.false_positives + r.false_negatives for r in rows)
            out[label] = (2 * tp / denom if denom else 1.0, len(rows))
        return out

    def write_csv(self, path: Path | str) -> None:
        with Path(path).open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(
                ["instance_id", "tp", "fp", "fn", "predicted", "runtime_s", "scenario"]
            )
            for r in sorted(self.rows, key=lambda r: r.instance_id):
                writer.writerow(
                    [
                        r.instance_id,
                        r.true_positives,
                        r.false_positives,
                        r.false_negatives,
                        r.predicted,
                        "" if r.runtime is None else f"{r.runtime:.6g}",
                        r.scenario,
                    ]
                )

    def summary_table(self) -> str:
        lines = [
            f"instances {len(self.rows)}  failures {len(self.failures)}",
            f"TP {self.true_positives}  FP {self.false_positives}  "
            f"FN {self.false_negatives}",
            f"F1 {self.f1:.6g}",
            f"runtime mean {self.mean_runtime:.6g}s  stdev {self.stdev_runtime:.6g}s",
        ]
        breakdown = self.scenario_breakdown()
        if any(label != "unlabeled" for label in breakdown):
            lines.append("scenario breakdown (layer,#elements): F1 [instances]")
            for label, (f1, count) in breakdown.items():
                lines.append(f"  {label:>12}  {f1:.6g} [{count}]")
        for instance_id, error in sorted(self.failures.items()):
            lines.append(f"  FAILED {instance_id}: {error}")
        return "\n".join(lines) + "\n"


def _match_counts(
    predicted: frozenset[Element], expected: frozenset[Element]
) -> tuple[int, int, int]:
    tp = len(predicted & expected)
    return tp, len(predicted) - tp, len(expected) - tp


def _scenario_label(elements: frozenset[Element]) -> str:
    if not elements:
        return "empty"
    layers = {e.layer for e in elements}
    if len(layers) == 1:
        return f"({layers.pop()},{len(elements)})"
    return "mixed"


def _as_element_set(prediction) -> frozenset[Element]:
    if isinstance(prediction, RootCauseSet):
        return frozenset(prediction.elements)
    return frozenset(prediction)


def _truth_sets(truth) -> dict[str, frozenset[Element]]:
    if isinstance(truth, GroundTruth):
        return {instance_id: truth.elements(instance_id) for instance_id in truth.ids}
    return {instance_id: frozenset(elements) for instance_id, elements in truth.items()}


def score_f1(
    predictions: Mapping[str, object],
    truth,
    runtimes: Mapping[str, float] | None = None,
    config: LocalizerConfig | None = None,
) -> EvalReport:
    """Score predictions against ground truth by exact element equality.

    Both mappings must be keyed by the same instance ids; an id present on one
    side only is an error naming the orphans.
    """
    expected = _truth_sets(truth)
    missing = sorted(set(expected) - set(predictions))
    extra = sorted(set(predictions) - set(expected))
    if missing or extra:
        raise ValueError(
            f"instance ids do not match: missing predictions for {missing}, "
            f"unknown ids {extra}"
        )
    rows = []
    for instance_id in sorted(expected):
        predicted = _as_element_set(predictions[instance_id])
        tp, fp, fn = _match_counts(predicted, expected[instance_id])
        rows.append(
            InstanceResult(
                instance_id=instance_id,
                true_positives=tp,
                false_positives=fp,
                false_negatives=fn,
                predicted=len(predicted),
                runtime=None if runtimes is None else runtimes.get(instance_id),
                scenario=_scenario_label(expected[instance_id]),
            )
        )
    return EvalReport(rows=rows, config=config)


def _run_one_file(args: tuple[str, str, LocalizerConfig]):
    instance_id, path, config = args
    try:
        table = read_instance(path)
        start = time.perf_counter()
        result = localize(table, config)
        elapsed = time.perf_counter() - start
        return instance_id, list(result.elements), elapsed, None
    except Exception as exc:  # recorded, never silently dropped
        return instance_id, [], None, f"{type(exc).__name__}: {exc}"


def _iter_instances(dataset) -> tuple[list[tuple[str, object]], object]:
    """Normalize a dataset directory or in-memory dataset to (id, source) pairs."""
    if isinstance(dataset, GeneratedDataset):
        return list(zip(dataset.ids, dataset.tables)), dataset.truth
    dataset_dir = Path(dataset)
    truth_path = dataset_dir / TRUTH_FILENAME
    if not truth_path.exists():
        raise FileNotFoundError(f"missing {TRUTH_FILENAME} in {dataset_dir}")
    paths = instance_paths(dataset_dir)
    if not paths:
        raise FileNotFoundError(f"no instance files in {dataset_dir}")
    schema = read_instance(paths[0]).schema
    truth = read_truth(truth_path, schema)
    return [(p.stem, p) for p in paths], truth


def run_benchmark(
    dataset,
    config: LocalizerConfig | None = None,
    jobs: int = 1,
) -> EvalReport:
    """Localize every instance of a dataset and score the results.

    ``dataset`` is a dataset directory or an in-memory GeneratedDataset.
    Parsing is excluded from the recorded per-instance runtime. Instances are
    mapped over up to ``jobs`` worker processes; results are folded in
    instance-id order so the report is identical for any job count.
    """
    config = config or LocalizerConfig()
    sources, truth = _iter_instances(dataset)

    outcomes: list[tuple[str, list[Element], float | None, str | None]] = []
    file_backed = [
        (instance_id, str(source), config)
        for instance_id, source in sources
        if isinstance(source, Path)
    ]
    if jobs > 1 and len(file_backed) == len(sources) and len(sources) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_one_file, file_backed, chunksize=4))
    else:
        for instance_id, source in sources:
            if isinstance(source, Path):
                outcomes.append(_run_one_file((instance_id, str(source), config)))
            else:
                try:
                    start = time.perf_counter()
                    result = localize(source, config)
                    elapsed = time.perf_counter() - start
                    outcomes.append((instance_id, list(result.elements), elapsed, None))
                except Exception as exc:
                    outcomes.append(
                        (instance_id, [], None, f"{type(exc).__name__}: {exc}")
                    )

    failures = {instance_id: err for instance_id, _, _, err in outcomes if err}
    predictions = {
        instance_id: elements for instance_id, elements, _, err in outcomes if not err
    }
    runtimes = {
        instance_id: elapsed
        for instance_id, _, elapsed, err in outcomes
        if not err and elapsed is not None
    }
    truth_sets = _truth_sets(truth)
    scored_truth = {
        instance_id: elements
        for instance_id, elements in truth_sets.items()
        if instance_id not in failures
    }
    report = score_f1(predictions, scored_truth, runtimes=runtimes, config=config)
    report.failures = failures
    return report


@dataclass
class SweepCell:
    parameter: str
    value: float
    report: EvalReport


@dataclass
class SweepReport:
    cells: list[SweepCell]

    def write_csv(self, path: Path | str) -> None:
        with Path(path).open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(
                ["parameter", "value", "f1", "mean_elements", "runtime_mean_s", "runtime_stdev_s"]
            )
            for cell in self.cells:
                rows = cell.report.rows
                mean_elements = (
                    statistics.fmean(r.predicted for r in rows) if rows else 0.0
                )
                writer.writerow(
                    [
                        cell.parameter,
                        f"{cell.value:.6g}",
                        f"{cell.report.f1:.6g}",
                        f"{mean_elements:.6g}",
                        f"{cell.report.mean_runtime:.6g}",
                        f"{cell.report.stdev_runtime:.6g}",
                    ]
                )

    def summary_table(self) -> str:
        lines = [f"{'parameter':>16} {'value':>8} {'F1':>10} {'runtime':>10}"]
        for cell in self.cells:
            lines.append(
                f"{cell.parameter:>16} {cell.value:>8.4g} "
                f"{cell.report.f1:>10.6g} {cell.report.mean_runtime:>10.4g}"
            )
        return "\n".join(lines) + "\n"


def parameter_sweep(
    dataset,
    risk_thresholds: Sequence[float],
    power_fractions: Sequence[float],
    base: LocalizerConfig | None = None,
    jobs: int = 1,
) -> SweepReport:
    """One-at-a-time sweep around the base config.

    Each grid value varies a single parameter while the other stays at the
    base value; every cell is a full benchmark run.
    """
    if not risk_thresholds and not power_fractions:
        raise ValueError("at least one grid must be non-empty")
    base = base or LocalizerConfig()
    cells = []
    for value in risk_thresholds:
        report = run_benchmark(dataset, replace(base, risk_threshold=value), jobs=jobs)
        cells.append(SweepCell("risk_threshold", float(value), report))
    for value in power_fractions:
        report = run_benchmark(dataset, replace(base, power_fraction=value), jobs=jobs)
        cells.append(SweepCell("power_fraction", float(value), report))
    return SweepReport(cells)


def ablation_study(
    dataset, base: LocalizerConfig | None = None, jobs: int = 1
) -> dict[str, EvalReport]:
    """Benchmark the full configuration against the four single-flag variants."""
    base = base or LocalizerConfig()
    reports = {"full": run_benchmark(dataset, base, jobs=jobs)}
    for name, config in ablation_variants(base).items():
        reports[name] = run_benchmark(dataset, config, jobs=jobs)
    return reports
