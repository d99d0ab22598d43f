"""Attribute schema, element algebra, cuboid enumeration, and base scores.

A *leaf element* is one concrete combination of attribute values carrying an
actual and a forecast value for the anomalous interval. Aggregated elements
replace some attributes with a wildcard; the localization engine searches the
lattice of those aggregations. This module holds the immutable columnar table
of leaves plus the pure scoring primitives (deviation score and explanatory
power) everything else builds on.

All attribute values are dictionary-encoded to dense integer ids at ingestion
so the hot paths operate on integer arrays only.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

WILDCARD = -1


class ElementParseError(ValueError):
    """Raised when an element string does not match the schema."""


class NoOverallAnomalyError(ValueError):
    """Raised when the fully aggregated actual equals the forecast."""


@dataclass(frozen=True)
class AttributeSchema:
    """Ordered attributes with their dictionary-encoded value sets.

    ``values[i]`` maps the dense id of attribute ``i`` to its value string;
    the inverse lookup is built once at construction.
    """

    names: tuple[str, ...]
    values: tuple[tuple[str, ...], ...]
    _ids: tuple[dict[str, int], ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.names:
            raise ValueError("schema needs at least one attribute")
        if len(set(self.names)) != len(self.names) or any(not n for n in self.names):
            raise ValueError("attribute names must be unique and non-empty")
        if len(self.values) != len(self.names):
            raise ValueError("values must list one value set per attribute")
        for name, vals in zip(self.names, self.values):
            if not vals:
                raise ValueError(f"attribute {name!r} has an empty value set")
            if len(set(vals)) != len(vals):
                raise ValueError(f"attribute {name!r} has duplicate values")
        object.__setattr__(
            self, "_ids", tuple({v: i for i, v in enumerate(vals)} for vals in self.values)
        )

    @property
    def dimension(self) -> int:
        return len(self.names)

    @property
    def cardinalities(self) -> tuple[int, ...]:
        return tuple(len(vals) for vals in self.values)

    def attribute_index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ElementParseError(f"unknown attribute {name!r}") from None

    def value_id(self, attribute: int, value: str) -> int:
        try:
            return self._ids[attribute][value]
        except KeyError:
            raise ElementParseError(
                f"unknown value {value!r} for attribute {self.names[attribute]!r}"
            ) from None


@dataclass(frozen=True, order=True)
class Element:
    """One attribute-value combination; WILDCARD marks aggregated attributes."""

    coords: tuple[int, ...]

    @property
    def layer(self) -> int:
        return sum(1 for c in self.coords if c != WILDCARD)

    @property
    def attribute_mask(self) -> tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.coords) if c != WILDCARD)

    def is_leaf(self, schema: AttributeSchema) -> bool:
        return len(self.coords) == schema.dimension and self.layer == schema.dimension

    def sort_key(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """Lexicographic order: attribute mask first, then concrete value ids."""
        mask = self.attribute_mask
        return mask, tuple(self.coords[i] for i in mask)


@dataclass(frozen=True)
class Cuboid:
    """The set of elements sharing one pattern of concrete attributes."""

    attributes: tuple[int, ...]

    @property
    def layer(self) -> int:
        return len(self.attributes)


def parse_element(text: str, schema: AttributeSchema) -> Element:
    """Parse ``attr=value&attr=value`` into an Element; omitted attrs are wildcards.

    The empty string parses to the fully aggregated element.
    """
    coords = [WILDCARD] * schema.dimension
    if text:
        for pair in text.split("&"):
            name, sep, value = pair.partition("=")
            if not sep:
                raise ElementParseError(f"malformed pair {pair!r} (expected attr=value)")
            idx = schema.attribute_index(name)
            if coords[idx] != WILDCARD:
                raise ElementParseError(f"duplicate attribute {name!r}")
            coords[idx] = schema.value_id(idx, value)
    return Element(tuple(coords))


def format_element(element: Element, schema: AttributeSchema) -> str:
    """Inverse of parse_element: wildcards omitted, attributes in schema order."""
    parts = [
        f"{schema.names[i]}={schema.values[i][c]}"
        for i, c in enumerate(element.coords)
        if c != WILDCARD
    ]
    return "&".join(parts)


def is_descendant(candidate: Element, ancestor: Element) -> bool:
    """True iff candidate is a proper descendant of ancestor.

    Every concrete coordinate of the ancestor must be matched exactly;
    an element is never a descendant of itself.
    """
    if len(candidate.coords) != len(ancestor.coords):
        raise ValueError("elements belong to schemas of different dimension")
    if candidate == ancestor:
        return False
    return all(
        a == WILDCARD or c == a for c, a in zip(candidate.coords, ancestor.coords)
    )


def enumerate_cuboids(schema: AttributeSchema) -> list[Cuboid]:
    """All 2^d − 1 cuboids, layers ascending, mask-lexicographic within a layer."""
    d = schema.dimension
    out: list[Cuboid] = []
    for layer in range(1, d + 1):
        for combo in itertools.combinations(range(d), layer):
            out.append(Cuboid(combo))
    return out


def element_space_size(schema: AttributeSchema) -> int:
    """Number of valid elements: prod(n_i + 1) − 1, excluding the full aggregate."""
    size = 1
    for n in schema.cardinalities:
        size *= n + 1
    return size - 1


def deviation_score(actual: float, forecast: float) -> float:
    """2(f − v)/(f + v); 0 when both values are 0."""
    total = actual + forecast
    if total == 0:
        return 0.0
    return 2.0 * (forecast - actual) / total


def deviation_scores(actual: np.ndarray, forecast: np.ndarray) -> np.ndarray:
    """Vectorized deviation score with the 0/0 -> 0 convention."""
    total = actual + forecast
    out = np.zeros_like(total, dtype=np.float64)
    np.divide(2.0 * (forecast - actual), total, out=out, where=total != 0)
    return out


def _safe_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros_like(num, dtype=np.float64)
    np.divide(num, den, out=out, where=den != 0)
    return out


class LeafTable:
    """Immutable columnar store of the leaf elements of one instance.

    For fundamental measures each leaf has an actual and a forecast value and
    aggregates are plain sums. For derived measures (a quotient of two
    fundamental measures) the four component columns are stored and aggregate
    values are component sums combined by the quotient, with a zero denominator
    yielding 0.

    Leaf combinations absent from the table are nonexistent, not zero.
    """

    def __init__(
        self,
        schema: AttributeSchema,
        coords: np.ndarray,
        actual: np.ndarray | None = None,
        forecast: np.ndarray | None = None,
        *,
        numerator: tuple[np.ndarray, np.ndarray] | None = None,
        denominator: tuple[np.ndarray, np.ndarray] | None = None,
        validate: bool = True,
    ) -> None:
        self.schema = schema
        self.coords = np.ascontiguousarray(coords, dtype=np.int32)
        if self.coords.ndim != 2 or self.coords.shape[1] != schema.dimension:
            raise ValueError("coords must be (rows, dimension)")
        n = self.coords.shape[0]

        if numerator is not None or denominator is not None:
            if numerator is None or denominator is None:
                raise ValueError("derived tables need both numerator and denominator")
            self.measure_kind = "derived"
            self.actual_num = np.asarray(numerator[0], dtype=np.float64)
            self.forecast_num = np.asarray(numerator[1], dtype=np.float64)
            self.actual_den = np.asarray(denominator[0], dtype=np.float64)
            self.forecast_den = np.asarray(denominator[1], dtype=np.float64)
            components = (
                self.actual_num,
                self.forecast_num,
                self.actual_den,
                self.forecast_den,
            )
            if any(col.shape != (n,) for col in components):
                raise ValueError("component columns must match the row count")
            self.actual = _safe_ratio(self.actual_num, self.actual_den)
            self.forecast = _safe_ratio(self.forecast_num, self.forecast_den)
        else:
            self.measure_kind = "fundamental"
            if actual is None or forecast is None:
                raise ValueError("fundamental tables need actual and forecast columns")
            self.actual = np.asarray(actual, dtype=np.float64)
            self.forecast = np.asarray(forecast, dtype=np.float64)
            if self.actual.shape != (n,) or self.forecast.shape != (n,):
                raise ValueError("actual/forecast must match the row count")

        if validate:
            self._validate()

    def _validate(self) -> None:
        cards = np.asarray(self.schema.cardinalities, dtype=np.int64)
        if self.coords.size and (
            self.coords.min() < 0 or (self.coords >= cards[None, :]).any()
        ):
            raise ValueError("coordinate ids out of range for the schema")
        for name, col in self._measure_columns():
            if col.size and (col < 0).any():
                raise ValueError(f"negative values in column {name}")
        if len(self) > 1:
            gid = self.row_group_ids(np.arange(self.schema.dimension))
            if np.unique(gid).size != len(self):
                raise ValueError("duplicate attribute-value combinations")

    def _measure_columns(self) -> list[tuple[str, np.ndarray]]:
        if self.measure_kind == "derived":
            return [
                ("actual_num", self.actual_num),
                ("forecast_num", self.forecast_num),
                ("actual_den", self.actual_den),
                ("forecast_den", self.forecast_den),
            ]
        return [("actual", self.actual), ("forecast", self.forecast)]

    def __len__(self) -> int:
        return self.coords.shape[0]

    @property
    def dimension(self) -> int:
        return self.schema.dimension

    def row_group_ids(self, attributes: Sequence[int], rows: np.ndarray | None = None) -> np.ndarray:
        """Mixed-radix group id of each row over the given attributes.

        Group ids enumerate the cuboid's elements in lexicographic value-id
        order, which fixes the deterministic iteration order of the search.
        """
        cards = self.schema.cardinalities
        coords = self.coords if rows is None else self.coords[rows]
        gid = coords[:, attributes[0]].astype(np.int64)
        for a in attributes[1:]:
            gid *= cards[a]
            gid += coords[:, a]
        return gid

    def group_size(self, attributes: Sequence[int]) -> int:
        size = 1
        for a in attributes:
            size *= self.schema.cardinalities[a]
        return size

    def group_totals(
        self, gid: np.ndarray, size: int, rows: np.ndarray | None = None
    ) -> tuple[np.ndarray, np.ndarray]:
        """Per-element (actual, forecast) aggregates for one cuboid."""

        def agg(col: np.ndarray) -> np.ndarray:
            vals = col if rows is None else col[rows]
            return np.bincount(gid, weights=vals, minlength=size)

        if self.measure_kind == "derived":
            v = _safe_ratio(agg(self.actual_num), agg(self.actual_den))
            f = _safe_ratio(agg(self.forecast_num), agg(self.forecast_den))
            return v, f
        return agg(self.actual), agg(self.forecast)

    def totals(self, rows: np.ndarray | None = None) -> tuple[float, float]:
        """Aggregate (actual, forecast) of the fully aggregated element."""

        def total(col: np.ndarray) -> float:
            return float(col.sum() if rows is None else col[rows].sum())

        if self.measure_kind == "derived":
            av, ad = total(self.actual_num), total(self.actual_den)
            fv, fd = total(self.forecast_num), total(self.forecast_den)
            return (av / ad if ad else 0.0), (fv / fd if fd else 0.0)
        return total(self.actual), total(self.forecast)

    def descendant_mask(self, element: Element) -> np.ndarray:
        """Boolean row mask of the element's descendant leaves (itself included)."""
        if len(element.coords) != self.dimension:
            raise ValueError("element dimension does not match the table schema")
        mask = np.ones(len(self), dtype=bool)
        for i, c in enumerate(element.coords):
            if c != WILDCARD:
                mask &= self.coords[:, i] == c
        return mask

    def element_at(self, row: int) -> Element:
        return Element(tuple(int(c) for c in self.coords[row]))

    def scaled(self, factor: float) -> "LeafTable":
        """Copy with every measure column multiplied by a positive constant."""
        if factor <= 0:
            raise ValueError("scale factor must be positive")
        if self.measure_kind == "derived":
            return LeafTable(
                self.schema,
                self.coords,
                numerator=(self.actual_num * factor, self.forecast_num * factor),
                denominator=(self.actual_den * factor, self.forecast_den * factor),
                validate=False,
            )
        return LeafTable(
            self.schema,
            self.coords,
            self.actual * factor,
            self.forecast * factor,
            validate=False,
        )


def leaf_descendants(element: Element, table: LeafTable) -> np.ndarray:
    """Row indices of the element's descendant leaves in the table."""
    return np.flatnonzero(table.descendant_mask(element))


def aggregate(element: Element, table: LeafTable) -> tuple[float, float]:
    """(actual, forecast) aggregate of one element over its descendant leaves."""
    rows = leaf_descendants(element, table)
    if table.measure_kind == "derived":
        av = float(table.actual_num[rows].sum())
        ad = float(table.actual_den[rows].sum())
        fv = float(table.forecast_num[rows].sum())
        fd = float(table.forecast_den[rows].sum())
        return (av / ad if ad else 0.0), (fv / fd if fd else 0.0)
    return float(table.actual[rows].sum()), float(table.forecast[rows].sum())


def overall_change(table: LeafTable) -> float:
    """v(M) − f(M) for the fully aggregated element; error when zero."""
    total_v, total_f = table.totals()
    change = total_v - total_f
    if change == 0:
        raise NoOverallAnomalyError(
            "no overall anomaly: aggregated actual equals aggregated forecast"
        )
    return change


def explanatory_power(element: Element, table: LeafTable) -> float:
    """Fraction of the overall change explained by the element's own change."""
    change = overall_change(table)
    v, f = aggregate(element, table)
    return (v - f) / change


def table_from_rows(
    schema: AttributeSchema,
    rows: Iterable[Sequence[str]],
    actual: Iterable[float],
    forecast: Iterable[float],
) -> LeafTable:
    """Convenience constructor from value strings (tests, tiny fixtures)."""
    encoded = np.array(
        [
            [schema.value_id(i, v) for i, v in enumerate(row)]
            for row in rows
        ],
        dtype=np.int32,
    ).reshape(-1, schema.dimension)
    return LeafTable(
        schema,
        encoded,
        np.asarray(list(actual), dtype=np.float64),
        np.asarray(list(forecast), dtype=np.float64),
    )
