"""On-disk formats: instance CSVs, ground-truth file, and dataset manifest.

An instance file is UTF-8 CSV with one row per existing leaf. Fundamental
measures use the header ``attr1,...,attrd,real,predict``; derived measures use
``attr1,...,attrd,real_num,predict_num,real_denom,predict_denom`` and the
derived value is num/denom with a zero denominator mapping to 0. The format is
self-describing, so readers never need a measure-kind flag.

A dataset directory holds one ``<instance_id>.csv`` per instance, a
``truth.csv`` with rows ``instance_id,set`` (elements ``&``-joined attr=value
pairs, multiple elements ``;``-joined), and a flat key=value ``manifest.txt``.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import pandas as pd

from .datamodel import (
    AttributeSchema,
    Element,
    LeafTable,
    format_element,
    parse_element,
)
from .generate import Anomaly, GeneratedDataset, GroundTruth

FUNDAMENTAL_MEASURES = ("real", "predict")
DERIVED_MEASURES = ("real_num", "predict_num", "real_denom", "predict_denom")
TRUTH_FILENAME = "truth.csv"
MANIFEST_FILENAME = "manifest.txt"


class DatasetFormatError(ValueError):
    """Malformed dataset file; message carries path and 1-based line number."""

    def __init__(self, message: str, path: Path | str, line: int | None = None):
        location = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{location}: {message}")
        self.path = str(path)
        self.line = line


def read_instance(path: Path | str) -> LeafTable:
    """Parse one instance CSV into a LeafTable, with line-numbered diagnostics."""
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise DatasetFormatError(f"unreadable CSV ({exc})", path) from exc

    columns = list(frame.columns)
    if len(columns) > len(FUNDAMENTAL_MEASURES) and tuple(
        columns[-len(FUNDAMENTAL_MEASURES) :]
    ) == FUNDAMENTAL_MEASURES:
        measure_cols = FUNDAMENTAL_MEASURES
    elif len(columns) > len(DERIVED_MEASURES) and tuple(
        columns[-len(DERIVED_MEASURES) :]
    ) == DERIVED_MEASURES:
        measure_cols = DERIVED_MEASURES
    else:
        raise DatasetFormatError(
            "header must end with real,predict or "
            "real_num,predict_num,real_denom,predict_denom",
            path,
            line=1,
        )
    attr_cols = columns[: len(columns) - len(measure_cols)]
    if not attr_cols:
        raise DatasetFormatError("no attribute columns before the measures", path, line=1)
    if len(frame) == 0:
        raise DatasetFormatError("no data rows", path)

    values = tuple(
        tuple(sorted(frame[col].unique().tolist())) for col in attr_cols
    )
    schema = AttributeSchema(tuple(attr_cols), values)

    coords = np.empty((len(frame), len(attr_cols)), dtype=np.int32)
    for i, col in enumerate(attr_cols):
        lookup = {v: j for j, v in enumerate(values[i])}
        coords[:, i] = frame[col].map(lookup).to_numpy(dtype=np.int32)

    numeric = []
    for col in measure_cols:
        try:
            numeric.append(frame[col].to_numpy(dtype=np.float64))
        except (TypeError, ValueError):
            raise DatasetFormatError(
                f"non-numeric value in column {col!r}",
                path,
                line=_first_bad_line(frame[col]),
            ) from None
    for col, arr in zip(measure_cols, numeric):
        bad = np.flatnonzero(~np.isfinite(arr) | (arr < 0))
        if bad.size:
            raise DatasetFormatError(
                f"column {col!r} must be finite and >= 0",
                path,
                line=int(bad[0]) + 2,
            )

    try:
        if measure_cols is FUNDAMENTAL_MEASURES:
            return LeafTable(schema, coords, numeric[0], numeric[1])
        return LeafTable(
            schema,
            coords,
            numerator=(numeric[0], numeric[1]),
            denominator=(numeric[2], numeric[3]),
        )
    except ValueError as exc:
        if "duplicate" in str(exc):
            raise DatasetFormatError(
                "duplicate attribute-value combination",
                path,
                line=_first_duplicate_line(coords),
            ) from exc
        raise DatasetFormatError(str(exc), path) from exc


def _first_bad_line(column: pd.Series) -> int:
    for i, value in enumerate(column):
        try:
            float(value)
        except (TypeError, ValueError):
            return i + 2  # +1 header, +1 one-based
    return 2


def _first_duplicate_line(coords: np.ndarray) -> int:
    seen: set[tuple[int, ...]] = set()
    for i, row in enumerate(map(tuple, coords)):
        if row in seen:
            return i + 2
        seen.add(row)
    return 2


def write_instance(table: LeafTable, path: Path | str) -> None:
    """Emit one instance CSV (all rows, including zero-valued leaves)."""
    path = Path(path)
    schema = table.schema
    data: dict[str, object] = {}
    for i, name in enumerate(schema.names):
        strings = np.asarray(schema.values[i], dtype=object)
        data[name] = strings[table.coords[:, i]]
    if table.measure_kind == "derived":
        data["real_num"] = table.actual_num
        data["predict_num"] = table.forecast_num
        data["real_denom"] = table.actual_den
        data["predict_denom"] = table.forecast_den
    else:
        data["real"] = table.actual
        data["predict"] = table.forecast
    pd.DataFrame(data).to_csv(path, index=False, lineterminator="\n")


def write_truth(
    truth: GroundTruth, schema: AttributeSchema, path: Path | str
) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["instance_id", "set"])
        for instance_id in truth.ids:
            elements = sorted(truth.elements(instance_id), key=Element.sort_key)
            writer.writerow(
                [instance_id, ";".join(format_element(e, schema) for e in elements)]
            )


def read_truth(path: Path | str, schema: AttributeSchema) -> dict[str, frozenset[Element]]:
    """Truth file as instance id -> element set (anomaly grouping flattened)."""
    path = Path(path)
    out: dict[str, frozenset[Element]] = {}
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header[:2]] != ["instance_id", "set"]:
            raise DatasetFormatError("truth header must be instance_id,set", path, line=1)
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < 2:
                raise DatasetFormatError("expected instance_id,set", path, line=line_no)
            instance_id, spec = row[0], row[1]
            if instance_id in out:
                raise DatasetFormatError(
                    f"duplicate instance id {instance_id!r}", path, line=line_no
                )
            try:
                elements = frozenset(
                    parse_element(text, schema) for text in spec.split(";") if text
                )
            except ValueError as exc:
                raise DatasetFormatError(str(exc), path, line=line_no) from exc
            out[instance_id] = elements
    return out


def write_manifest(entries: dict[str, str], path: Path | str) -> None:
    path = Path(path)
    lines = [f"{key}={value}" for key, value in entries.items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(path: Path | str) -> dict[str, str]:
    out: dict[str, str] = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if sep:
            out[key.strip()] = value.strip()
    return out


def write_dataset(dataset: GeneratedDataset, out_dir: Path | str) -> Path:
    """Write instance CSVs, truth.csv, and manifest.txt into a directory."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        for instance_id, table in zip(dataset.ids, dataset.tables):
            write_instance(table, out_dir / f"{instance_id}.csv")
        write_truth(dataset.truth, dataset.schema, out_dir / TRUTH_FILENAME)
        manifest = dataset.manifest()
        manifest["tool"] = _tool_version()
        write_manifest(manifest, out_dir / MANIFEST_FILENAME)
    except OSError as exc:
        raise OSError(f"failed writing dataset under {out_dir}: {exc}") from exc
    return out_dir


def instance_paths(dataset_dir: Path | str) -> list[Path]:
    """Instance CSVs of a dataset directory, sorted by id for determinism."""
    dataset_dir = Path(dataset_dir)
    return sorted(
        p
        for p in dataset_dir.glob("*.csv")
        if p.name != TRUTH_FILENAME
    )


def _tool_version() -> str:
    try:
        from importlib.metadata import version

        return f"rootloc {version('rootloc')}"
    except Exception:
        return "rootloc"


def truth_elements_as_anomalies(
    elements_by_id: dict[str, frozenset[Element]]
) -> GroundTruth:
    """Wrap flat element sets in the GroundTruth shape (one anomaly per set)."""
    return GroundTruth(
        {
            instance_id: (
                (
                    Anomaly(
                        elements=tuple(sorted(elements, key=Element.sort_key)),
                        severity=float("nan"),
                        deviation=float("nan"),
                        scaled_column="unknown",
                    ),
                )
                if elements
                else tuple()
            )
            for instance_id, elements in elements_by_id.items()
        }
    )
