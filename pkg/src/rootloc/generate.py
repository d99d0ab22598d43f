"""Synthetic benchmark generator with ripple-consistent anomaly injection.

Each instance is a full grid of leaf elements. Actuals come from a heavy-tailed
one-parameter Weibull draw (scale 1, shape drawn once per instance) times 100,
with a per-instance fraction forced to 0. Forecasts add multiplicative
Gaussian noise and the two columns are swapped per leaf with probability 0.5
so the residuals are direction-free. Anomalies scale one side of the affected
leaves by max(x * (1 - N(severity, deviation)), 0), one factor per leaf, so a
zero deviation reproduces the exact ripple effect across the anomaly.

Determinism: every instance derives its own PCG64 stream from
(seed, instance_index, attempt), and the Weibull / normal transforms are
implemented directly (inverse CDF and Box-Muller) on top of the raw uniform
stream, so regeneration is reproducible from the dataset spec alone.
"""

from __future__ import annotations

import logging
import string
from dataclasses import dataclass, replace

import numpy as np

from .datamodel import AttributeSchema, Element, LeafTable, enumerate_cuboids, is_descendant

log = logging.getLogger(__name__)

TOP_LAYER = "top"
FREE_LAYER = "free"

_PLACEMENT_RETRIES = 1000


class PlacementError(RuntimeError):
    """Anomaly placement could not satisfy the overlap rules."""


@dataclass(frozen=True)
class DatasetSpec:
    """Generator parameters for one dataset."""

    name: str
    instances: int
    cardinalities: tuple[int, ...]
    sigma_range: tuple[float, float] = (0.0, 0.25)
    zero_prob_range: tuple[float, float] = (0.0, 0.25)
    anomaly_count_range: tuple[int, int] = (1, 3)
    anomaly_element_range: tuple[int, int] = (1, 3)
    anomaly_layer: str = FREE_LAYER
    severity_range: tuple[float, float] = (0.25, 1.0)
    deviation_range: tuple[float, float] = (0.0, 0.1)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.instances < 1:
            raise ValueError("instances must be >= 1")
        if not self.cardinalities or any(n < 1 for n in self.cardinalities):
            raise ValueError("cardinalities must be positive")
        for label in (
            "sigma_range",
            "zero_prob_range",
            "anomaly_count_range",
            "anomaly_element_range",
            "severity_range",
            "deviation_range",
        ):
            lo, hi = getattr(self, label)
            if lo > hi:
                raise ValueError(f"{label} has low > high")
        if not 0 <= self.severity_range[0] <= self.severity_range[1] <= 1:
            raise ValueError("severity_range must lie inside [0, 1]")
        if self.anomaly_layer not in (FREE_LAYER, TOP_LAYER):
            raise ValueError("anomaly_layer must be 'free' or 'top'")

    @property
    def leaf_count(self) -> int:
        count = 1
        for n in self.cardinalities:
            count *= n
        return count


PRESETS: dict[str, DatasetSpec] = {
    "S": DatasetSpec(
        name="S",
        instances=1000,
        cardinalities=(10, 12, 10, 8, 5),
        sigma_range=(0.0, 0.25),
        anomaly_count_range=(1, 3),
        anomaly_element_range=(1, 3),
        severity_range=(0.25, 1.0),
        deviation_range=(0.0, 0.1),
    ),
    "L": DatasetSpec(
        name="L",
        instances=1000,
        cardinalities=(10, 24, 10, 15),
        sigma_range=(0.0, 0.10),
        anomaly_count_range=(1, 5),
        anomaly_element_range=(1, 1),
        anomaly_layer=TOP_LAYER,
        severity_range=(0.5, 1.0),
        deviation_range=(0.0, 0.0),
    ),
    "H": DatasetSpec(
        name="H",
        instances=100,
        cardinalities=(10, 5, 250, 20, 8, 12),
        sigma_range=(0.0, 0.25),
        anomaly_count_range=(1, 3),
        anomaly_element_range=(1, 3),
        severity_range=(0.25, 1.0),
        deviation_range=(0.0, 0.1),
    ),
}


def preset(name: str, **overrides) -> DatasetSpec:
    """A named preset, optionally with fields overridden (instances, seed, ...)."""
    try:
        spec = PRESETS[name.upper()]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}") from None
    return replace(spec, **overrides) if overrides else spec


@dataclass(frozen=True)
class Anomaly:
    """One injected anomaly: its elements and the scaling that was applied."""

    elements: tuple[Element, ...]
    severity: float
    deviation: float
    scaled_column: str  # "actual" | "forecast"


class GroundTruth:
    """Injected anomalies per instance id."""

    def __init__(self, anomalies: dict[str, tuple[Anomaly, ...]] | None = None) -> None:
        self.anomalies: dict[str, tuple[Anomaly, ...]] = dict(anomalies or {})

    @property
    def ids(self) -> list[str]:
        return sorted(self.anomalies)

    def elements(self, instance_id: str) -> frozenset[Element]:
        return frozenset(
            element
            for anomaly in self.anomalies[instance_id]
            for element in anomaly.elements
        )

    def __len__(self) -> int:
        return len(self.anomalies)


@dataclass
class GeneratedDataset:
    spec: DatasetSpec
    schema: AttributeSchema
    ids: list[str]
    tables: list[LeafTable]
    truth: GroundTruth

    def manifest(self) -> dict[str, str]:
        spec = self.spec
        return {
            "name": spec.name,
            "instances": str(spec.instances),
            "cardinalities": "x".join(str(n) for n in spec.cardinalities),
            "sigma_range": _fmt_range(spec.sigma_range),
            "zero_prob_range": _fmt_range(spec.zero_prob_range),
            "anomaly_count_range": _fmt_range(spec.anomaly_count_range),
            "anomaly_element_range": _fmt_range(spec.anomaly_element_range),
            "anomaly_layer": spec.anomaly_layer,
            "severity_range": _fmt_range(spec.severity_range),
            "deviation_range": _fmt_range(spec.deviation_range),
            "seed": str(spec.seed),
        }


def _fmt_range(pair) -> str:
    return f"{pair[0]},{pair[1]}"


def schema_for(cardinalities: tuple[int, ...]) -> AttributeSchema:
    """Synthetic schema: attributes a, b, c, ... with values a1..an, b1..bn, ..."""
    if len(cardinalities) > len(string.ascii_lowercase):
        raise ValueError("too many attributes for letter naming")
    names = tuple(string.ascii_lowercase[: len(cardinalities)])
    values = tuple(
        tuple(f"{name}{j + 1}" for j in range(n)) for name, n in zip(names, cardinalities)
    )
    return AttributeSchema(names, values)


def instance_rng(seed: int, index: int, attempt: int = 0) -> np.random.Generator:
    """Independent, reproducible stream for one instance."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed, index, attempt))))


def _uniform(rng: np.random.Generator, bounds: tuple[float, float]) -> float:
    lo, hi = bounds
    return float(lo + (hi - lo) * rng.random())


def _standard_normals(rng: np.random.Generator, n: int) -> np.ndarray:
    """Box-Muller transform over the raw uniform stream."""
    u1 = 1.0 - rng.random(n)  # (0, 1]: keeps the log finite
    u2 = rng.random(n)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def weibull_sample(shape: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF draw from the one-parameter Weibull (scale 1), times 100."""
    u = 1.0 - rng.random(n)  # (0, 1]
    return np.power(-np.log(u), 1.0 / shape) * 100.0


def sample_actuals(
    n_leaves: int, zero_prob_range: tuple[float, float], rng: np.random.Generator
) -> np.ndarray:
    """Weibull(shape a ~ U[0.5, 1], scale 1) x 100 with per-instance zero-outs."""
    shape = 0.5 + 0.5 * rng.random()
    values = weibull_sample(shape, n_leaves, rng)
    zero_prob = _uniform(rng, zero_prob_range)
    values[rng.random(n_leaves) < zero_prob] = 0.0
    return values


def sample_forecasts(
    actual: np.ndarray, sigma: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Forecasts as actual x N(1, sigma), clamped at 0, then swapped per leaf.

    Returns the (actual, forecast) pair after the 50% per-leaf swap that makes
    the residual direction symmetric.
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    n = actual.shape[0]
    forecast = np.maximum(actual * (1.0 + sigma * _standard_normals(rng, n)), 0.0)
    swap = rng.random(n) < 0.5
    v = np.where(swap, forecast, actual)
    f = np.where(swap, actual, forecast)
    return v, f


def _sample_cuboid_elements(
    cuboid_attrs: tuple[int, ...],
    count: int,
    schema: AttributeSchema,
    rng: np.random.Generator,
) -> tuple[Element, ...]:
    cards = schema.cardinalities
    capacity = 1
    for a in cuboid_attrs:
        capacity *= cards[a]
    count = min(count, capacity)
    chosen: set[tuple[int, ...]] = set()
    guard = 0
    while len(chosen) < count:
        coords = [-1] * schema.dimension
        for a in cuboid_attrs:
            coords[a] = int(rng.integers(0, cards[a]))
        chosen.add(tuple(coords))
        guard += 1
        if guard > 1000 * count:
            raise PlacementError("could not draw distinct elements in cuboid")
    return tuple(Element(c) for c in sorted(chosen))


def _overlaps(groups: list[tuple[Element, ...]]) -> bool:
    for i, group_a in enumerate(groups):
        for group_b in groups[i + 1 :]:
            for ea in group_a:
                for eb in group_b:
                    if is_descendant(ea, eb) or is_descendant(eb, ea):
                        return True
    return False


@dataclass(frozen=True)
class _Placement:
    elements: tuple[Element, ...]
    severity: float
    deviation: float


def place_anomalies(
    schema: AttributeSchema, spec: DatasetSpec, rng: np.random.Generator
) -> list[_Placement]:
    """Draw the anomalies of one instance, honoring the overlap rules.

    Free placement assigns each anomaly a distinct cuboid and rejects draws
    where any element descends from another anomaly's element. Top-layer
    placement puts every single-element anomaly in the full-depth cuboid, so
    only leaf distinctness applies there.
    """
    lo, hi = spec.anomaly_count_range
    count = int(rng.integers(lo, hi + 1))
    leaf_attrs = tuple(range(schema.dimension))

    for _ in range(_PLACEMENT_RETRIES):
        groups: list[tuple[Element, ...]]
        if spec.anomaly_layer == TOP_LAYER:
            leaves = _sample_cuboid_elements(leaf_attrs, count, schema, rng)
            if len(leaves) < count:
                continue
            groups = [(leaf,) for leaf in leaves]
        else:
            cuboids = enumerate_cuboids(schema)
            picked = rng.permutation(len(cuboids))[: min(count, len(cuboids))]
            groups = []
            for c in picked:
                e_lo, e_hi = spec.anomaly_element_range
                n_elements = int(rng.integers(e_lo, e_hi + 1))
                groups.append(
                    _sample_cuboid_elements(
                        cuboids[int(c)].attributes, max(n_elements, 1), schema, rng
                    )
                )
            if _overlaps(groups):
                continue
        return [
            _Placement(
                elements=group,
                severity=_uniform(rng, spec.severity_range),
                deviation=_uniform(rng, spec.deviation_range),
            )
            for group in groups
        ]
    raise PlacementError(f"no valid placement after {_PLACEMENT_RETRIES} draws")


def inject_anomaly(
    column: np.ndarray,
    rows: np.ndarray,
    severity: float,
    deviation: float,
    rng: np.random.Generator,
) -> None:
    """Scale the affected leaves in place: x <- max(x * (1 - N(s, d)), 0)."""
    factors = 1.0 - (severity + deviation * _standard_normals(rng, rows.shape[0]))
    column[rows] = np.maximum(column[rows] * factors, 0.0)


def _anomaly_rows(table_coords: np.ndarray, elements: tuple[Element, ...]) -> np.ndarray:
    mask = np.zeros(table_coords.shape[0], dtype=bool)
    for element in elements:
        sub = np.ones(table_coords.shape[0], dtype=bool)
        for i, c in enumerate(element.coords):
            if c != -1:
                sub &= table_coords[:, i] == c
        mask |= sub
    return np.flatnonzero(mask)


def generate_instance(
    spec: DatasetSpec, index: int
) -> tuple[str, LeafTable, tuple[Anomaly, ...]]:
    """One reproducible instance: leaf table plus its injected anomalies."""
    schema = schema_for(spec.cardinalities)
    n = spec.leaf_count
    grid = np.indices(spec.cardinalities, dtype=np.int32).reshape(schema.dimension, -1).T
    coords = np.ascontiguousarray(grid)

    for attempt in range(_PLACEMENT_RETRIES):
        rng = instance_rng(spec.seed, index, attempt)
        actual = sample_actuals(n, spec.zero_prob_range, rng)
        sigma = _uniform(rng, spec.sigma_range)
        v, f = sample_forecasts(actual, sigma, rng)
        try:
            placements = place_anomalies(schema, spec, rng)
        except PlacementError:
            log.warning(
                "instance %d of %s: placement infeasible, regenerating (attempt %d)",
                index,
                spec.name,
                attempt + 1,
            )
            continue

        # the first anomaly fixes which column is scaled for the whole instance
        first_rows = _anomaly_rows(coords, placements[0].elements)
        scale_actual = v[first_rows].sum() > f[first_rows].sum()
        column = v if scale_actual else f
        anomalies = []
        for placement in placements:
            rows = _anomaly_rows(coords, placement.elements)
            inject_anomaly(column, rows, placement.severity, placement.deviation, rng)
            anomalies.append(
                Anomaly(
                    elements=placement.elements,
                    severity=placement.severity,
                    deviation=placement.deviation,
                    scaled_column="actual" if scale_actual else "forecast",
                )
            )
        table = LeafTable(schema, coords, v, f, validate=False)
        return f"{index:05d}", table, tuple(anomalies)
    raise PlacementError(f"instance {index}: placement infeasible after retries")


def generate_dataset(spec: DatasetSpec) -> GeneratedDataset:
    """Materialize every instance of the dataset spec in memory.

    For very large specs prefer iterating generate_instance directly; file
    emission lives in the io module and the generate CLI subcommand.
    """
    ids: list[str] = []
    tables: list[LeafTable] = []
    truth: dict[str, tuple[Anomaly, ...]] = {}
    schema = schema_for(spec.cardinalities)
    for index in range(spec.instances):
        instance_id, table, anomalies = generate_instance(spec, index)
        ids.append(instance_id)
        tables.append(table)
        truth[instance_id] = anomalies
    return GeneratedDataset(spec, schema, ids, tables, GroundTruth(truth))
