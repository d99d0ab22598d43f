"""Scoring and benchmark-harness tests."""

from __future__ import annotations

import pytest

from rootloc import (
    DatasetSpec,
    Element,
    WILDCARD,
    ablation_study,
    generate_dataset,
    parameter_sweep,
    parse_element,
    run_benchmark,
    score_f1,
    write_dataset,
    write_instance,
    write_truth,
)
from rootloc.generate import Anomaly, GroundTruth


def small_dataset_spec(**overrides) -> DatasetSpec:
    fields = dict(
        name="bench",
        instances=6,
        cardinalities=(4, 3, 3),
        sigma_range=(0.0, 0.05),
        zero_prob_range=(0.0, 0.1),
        anomaly_count_range=(1, 2),
        anomaly_element_range=(1, 2),
        severity_range=(0.7, 0.95),
        deviation_range=(0.0, 0.02),
        seed=5,
    )
    fields.update(overrides)
    return DatasetSpec(**fields)


@pytest.fixture
def worked_dataset_dir(worked_example, two_attr_schema, tmp_path):
    """The worked example packaged as a one-instance dataset directory."""
    write_instance(worked_example, tmp_path / "00000.csv")
    truth = GroundTruth(
        {
            "00000": (
                Anomaly(
                    (parse_element("DataCenter=X", two_attr_schema),),
                    0.5,
                    0.0,
                    "actual",
                ),
            )
        }
    )
    write_truth(truth, two_attr_schema, tmp_path / "truth.csv")
    return tmp_path


def elem(*coords) -> Element:
    return Element(tuple(coords))


class TestScoreF1:
    def test_exact_match(self):
        truth = {"a": frozenset({elem(0, WILDCARD)})}
        report = score_f1({"a": [elem(0, WILDCARD)]}, truth)
        assert report.f1 == 1.0
        assert report.true_positives == 1

    def test_empty_predictions(self):
        truth = {"a": frozenset({elem(0, WILDCARD)})}
        report = score_f1({"a": []}, truth)
        assert report.f1 == 0.0
        assert report.false_negatives == 1

    def test_two_instance_worked_value(self):
        truth = {
            "a": frozenset({elem(0, WILDCARD)}),
            "b": frozenset({elem(1, WILDCARD)}),
        }
        predictions = {
            "a": [elem(0, WILDCARD), elem(WILDCARD, 1)],  # TP=1, FP=1
            "b": [],  # FN=1
        }
        report = score_f1(predictions, truth)
        assert report.f1 == pytest.approx(0.5)

    def test_exact_element_equality_no_partial_credit(self):
        truth = {"a": frozenset({elem(0, 1)})}
        report = score_f1({"a": [elem(0, WILDCARD)]}, truth)
        assert report.f1 == 0.0

    def test_permutation_invariance(self):
        truth = {
            "a": frozenset({elem(0, WILDCARD)}),
            "b": frozenset({elem(1, 0), elem(1, 1)}),
        }
        forward = {"a": [elem(0, WILDCARD)], "b": [elem(1, 1), elem(1, 0)]}
        backward = {"b": [elem(1, 0), elem(1, 1)], "a": [elem(0, WILDCARD)]}
        assert score_f1(forward, truth).f1 == score_f1(backward, truth).f1 == 1.0

    def test_swapping_predictions_and_truth_swaps_fp_fn(self):
        truth = {"a": frozenset({elem(0, WILDCARD), elem(1, WILDCARD)})}
        predictions = {"a": [elem(0, WILDCARD), elem(WILDCARD, 2)]}
        forward = score_f1(predictions, truth)
        backward = score_f1(
            {"a": sorted(truth["a"], key=Element.sort_key)},
            {"a": frozenset(predictions["a"])},
        )
        assert forward.true_positives == backward.true_positives
        assert forward.false_positives == backward.false_negatives
        assert forward.false_negatives == backward.false_positives
        assert forward.f1 == backward.f1

    def test_orphan_instance_ids_rejected(self):
        with pytest.raises(ValueError, match="unknown ids.*extra"):
            score_f1({"extra": []}, {"a": frozenset()})
        with pytest.raises(ValueError, match="missing predictions.*a"):
            score_f1({}, {"a": frozenset()})

    def test_vacuous_instances_score_perfect(self):
        report = score_f1({"a": []}, {"a": frozenset()})
        assert report.f1 == 1.0

    def test_scenario_labels(self):
        truth = {
            "a": frozenset({elem(0, WILDCARD)}),
            "b": frozenset({elem(1, 0), elem(2, 1)}),
            "c": frozenset({elem(0, 0), elem(1, WILDCARD)}),
        }
        report = score_f1({"a": [], "b": [], "c": []}, truth)
        labels = {r.instance_id: r.scenario for r in report.rows}
        assert labels == {"a": "(1,1)", "b": "(2,2)", "c": "mixed"}


class TestRunBenchmark:
    def test_worked_dataset_scores_one(self, worked_dataset_dir):
        report = run_benchmark(worked_dataset_dir)
        assert report.f1 == 1.0
        assert not report.failures
        assert report.rows[0].runtime is not None and report.rows[0].runtime > 0

    def test_jobs_do_not_change_results(self, tmp_path):
        dataset = generate_dataset(small_dataset_spec())
        out = write_dataset(dataset, tmp_path / "ds")
        serial = run_benchmark(out, jobs=1)
        parallel = run_benchmark(out, jobs=2)
        assert serial.f1 == parallel.f1
        assert [
            (r.instance_id, r.true_positives, r.false_positives, r.false_negatives)
            for r in serial.rows
        ] == [
            (r.instance_id, r.true_positives, r.false_positives, r.false_negatives)
            for r in parallel.rows
        ]

    def test_in_memory_matches_directory(self, tmp_path):
        dataset = generate_dataset(small_dataset_spec())
        out = write_dataset(dataset, tmp_path / "ds")
        from_memory = run_benchmark(dataset)
        from_disk = run_benchmark(out)
        assert from_memory.f1 == from_disk.f1

    def test_failures_recorded_not_dropped(self, worked_dataset_dir):
        # add a second instance with no overall anomaly: it must fail and be
        # excluded, while the healthy instance still scores
        (worked_dataset_dir / "00001.csv").write_text(
            "DataCenter,DeviceType,real,predict\nX,D1,5,5\nY,D2,7,7\n"
        )
        truth_path = worked_dataset_dir / "truth.csv"
        truth_path.write_text(
            truth_path.read_text() + "00001,DataCenter=Y\n"
        )
        report = run_benchmark(worked_dataset_dir)
        assert set(report.failures) == {"00001"}
        assert "no overall anomaly" in report.failures["00001"]
        assert report.f1 == 1.0
        assert len(report.rows) == 1

    def test_missing_truth_raises(self, tmp_path, worked_example):
        write_instance(worked_example, tmp_path / "00000.csv")
        with pytest.raises(FileNotFoundError, match="truth"):
            run_benchmark(tmp_path)

    def test_report_csv_and_summary(self, worked_dataset_dir, tmp_path):
        report = run_benchmark(worked_dataset_dir)
        csv_path = tmp_path / "report.csv"
        report.write_csv(csv_path)
        text = csv_path.read_text()
        assert text.startswith("instance_id,tp,fp,fn,predicted,runtime_s,scenario")
        assert text.endswith("\n")
        summary = report.summary_table()
        assert "F1 1" in summary
        assert summary.endswith("\n")


class TestSweepAndAblation:
    def test_single_cell_equals_benchmark(self, worked_dataset_dir):
        sweep = parameter_sweep(worked_dataset_dir, [0.5], [0.02])
        baseline = run_benchmark(worked_dataset_dir)
        assert len(sweep.cells) == 2
        for cell in sweep.cells:
            assert cell.report.f1 == baseline.f1

    def test_sweep_varies_one_parameter_at_a_time(self, tmp_path):
        dataset = generate_dataset(small_dataset_spec(instances=3))
        sweep = parameter_sweep(dataset, [0.4, 0.6], [0.01])
        assert [(c.parameter, c.value) for c in sweep.cells] == [
            ("risk_threshold", 0.4),
            ("risk_threshold", 0.6),
            ("power_fraction", 0.01),
        ]
        csv_path = tmp_path / "sweep.csv"
        sweep.write_csv(csv_path)
        assert csv_path.read_text().endswith("\n")

    def test_empty_grids_rejected(self, worked_dataset_dir):
        with pytest.raises(ValueError):
            parameter_sweep(worked_dataset_dir, [], [])

    def test_ablation_study_runs_all_variants(self):
        dataset = generate_dataset(small_dataset_spec(instances=3))
        reports = ablation_study(dataset)
        assert set(reports) == {
            "full",
            "no_outlier_removal",
            "no_abnormal_ratio",
            "no_ripple_ratio",
            "no_weights",
        }
        for report in reports.values():
            assert 0.0 <= report.f1 <= 1.0


class TestEndToEndRecovery:
    def test_strong_single_anomalies_recovered(self):
        # severe single-element anomalies over mild noise: near-perfect recall
        spec = small_dataset_spec(
            instances=12,
            anomaly_count_range=(1, 1),
            anomaly_element_range=(1, 1),
            severity_range=(0.85, 0.95),
            sigma_range=(0.0, 0.03),
            zero_prob_range=(0.0, 0.0),
        )
        dataset = generate_dataset(spec)
        report = run_benchmark(dataset)
        assert report.f1 >= 0.8
