"""Shared fixtures and independent brute-force oracles.

The oracles here intentionally avoid the library's vectorized paths: they are
plain python loops over rows, so the fast implementations are checked against
an independent route.
"""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from rootloc import (
    AttributeSchema,
    Element,
    LeafTable,
    WILDCARD,
    table_from_rows,
)


@pytest.fixture
def two_attr_schema() -> AttributeSchema:
    return AttributeSchema(("DataCenter", "DeviceType"), (("X", "Y"), ("D1", "D2", "D3")))


@pytest.fixture
def worked_example(two_attr_schema) -> LeafTable:
    """The five-leaf instance whose full trace is hand-derived in the tests."""
    return table_from_rows(
        two_attr_schema,
        [("X", "D1"), ("X", "D2"), ("Y", "D1"), ("Y", "D2"), ("Y", "D3")],
        [10, 3, 15, 30, 100],
        [30, 10, 14, 30, 102],
    )


def small_schema(cardinalities: tuple[int, ...]) -> AttributeSchema:
    names = tuple(f"attr{i}" for i in range(len(cardinalities)))
    values = tuple(
        tuple(f"v{i}_{j}" for j in range(n)) for i, n in enumerate(cardinalities)
    )
    return AttributeSchema(names, values)


def random_table(
    rng: np.random.Generator,
    cardinalities: tuple[int, ...],
    *,
    keep_fraction: float = 0.8,
    zero_fraction: float = 0.15,
    require_change: bool = True,
) -> LeafTable:
    """Random sparse table over a small schema; rows unique by construction."""
    schema = small_schema(cardinalities)
    grid = np.array(list(itertools.product(*[range(n) for n in cardinalities])), dtype=np.int32)
    keep = rng.random(len(grid)) < keep_fraction
    if not keep.any():
        keep[rng.integers(0, len(grid))] = True
    coords = grid[keep]
    n = coords.shape[0]
    actual = np.round(rng.gamma(2.0, 50.0, n), 3)
    forecast = np.round(actual * (1.0 + 0.3 * rng.standard_normal(n)), 3)
    forecast = np.maximum(forecast, 0.0)
    zeros = rng.random(n) < zero_fraction
    actual[zeros] = 0.0
    forecast[zeros] = 0.0
    if require_change and actual.sum() == forecast.sum():
        actual[0] += 7.0
    return LeafTable(schema, coords, actual, forecast)


def all_elements(table: LeafTable) -> list[Element]:
    """Every element with at least one leaf row, in lexicographic order."""
    d = table.dimension
    out: list[Element] = []
    for layer in range(1, d + 1):
        for attrs in itertools.combinations(range(d), layer):
            seen = sorted(
                {tuple(int(table.coords[r, a]) for a in attrs) for r in range(len(table))}
            )
            for values in seen:
                coords = [WILDCARD] * d
                for a, value in zip(attrs, values):
                    coords[a] = value
                out.append(Element(tuple(coords)))
    return out


def brute_descendant_rows(element: Element, table: LeafTable) -> list[int]:
    rows = []
    for r in range(len(table)):
        row = table.coords[r]
        if all(
            c == WILDCARD or int(row[i]) == c for i, c in enumerate(element.coords)
        ):
            rows.append(r)
    return rows


def brute_is_descendant(candidate: Element, ancestor: Element) -> bool:
    if candidate == ancestor:
        return False
    return all(
        a == WILDCARD or c == a
        for c, a in zip(candidate.coords, ancestor.coords)
    )


def brute_deviation(v: float, f: float) -> float:
    return 0.0 if v + f == 0 else 2.0 * (f - v) / (f + v)


def brute_search(
    table: LeafTable,
    weights,
    risk_threshold: float,
    power_threshold: float,
    *,
    sign: float = 1.0,
    alive: list[bool] | None = None,
) -> tuple[Element, int] | None:
    """Plain-python rerun of one search pass: (winner, layer) or None.

    Aggregation, risk, and explanatory power are recomputed with row loops
    over the surviving leaves; candidate selection follows max explanatory
    power with first-in-lexicographic-order tie-break.
    """
    n = len(table)
    live = [True] * n if alive is None else list(alive)
    change = float(table.actual.sum() - table.forecast.sum())  # frozen full-table change

    def element_rows(element: Element) -> list[int]:
        return [r for r in brute_descendant_rows(element, table) if live[r]]

    d = table.dimension
    for layer in range(1, d + 1):
        best: tuple[float, int, Element] | None = None
        order = 0
        for element in (e for e in all_elements(table) if e.layer == layer):
            rows = element_rows(element)
            if not rows:
                continue
            v_el = float(sum(table.actual[r] for r in rows))
            f_el = float(sum(table.forecast[r] for r in rows))
            ep = sign * (v_el - f_el) / change

            w_abn = sum(
                float(weights.weight[r]) for r in rows if int(weights.partition[r]) == 1
            )
            w_nrm = sum(
                float(weights.weight[r]) for r in rows if int(weights.partition[r]) == 0
            )
            r_abn = w_abn / (w_nrm + w_abn + 1.0)

            if layer == d or len(rows) == 1:
                # leaves and single-leaf aggregates fit the ripple identity
                r_rip = 0.0
            else:
                adjusted = 0.0
                total = 0.0
                for r in rows:
                    v, f = float(table.actual[r]), float(table.forecast[r])
                    expected = v if f_el == 0 else f * v_el / f_el
                    if expected + v > 0:
                        adjusted += 2.0 * abs(expected - v) / (expected + v)
                    total += abs(brute_deviation(v, f))
                r_rip = adjusted / total if total > 0 else 0.0

            risk = r_abn - r_rip
            if risk >= risk_threshold and ep >= power_threshold:
                if best is None or ep > best[0]:
                    best = (ep, order, element)
            order += 1
        if best is not None:
            return best[2], layer
    return None
