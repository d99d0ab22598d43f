"""Risk scoring of candidate elements.

The risk of an element combines two ratios: how much of the weighted leaf mass
under it is abnormal (abnormal_ratio), and how far its descendant leaves drift
from the proportional change a true root cause would impose on them
(ripple_ratio). risk = abnormal_ratio - ripple_ratio, always < 1.

These are the plain per-element implementations; the search engine in
``localize`` recomputes the same quantities with vectorized group aggregations,
and the test suite cross-checks the two paths against each other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datamodel import Element, LeafTable, aggregate, leaf_descendants
from .partition import Partition, WeightedLeafSet


@dataclass(frozen=True)
class RiskBreakdown:
    """Full decomposition of one element's risk score."""

    risk: float
    abnormal_ratio: float
    ripple_ratio: float
    abnormal_weight: float
    normal_weight: float
    adjusted_deviation: float
    total_deviation: float
    forecast_fallback: bool = False


def abnormal_mass(
    element: Element, weights: WeightedLeafSet, table: LeafTable
) -> tuple[float, float]:
    """Weighted abnormal and normal leaf mass under the element.

    ZERO leaves contribute nothing by construction (their weight is 0).
    """
    rows = leaf_descendants(element, table)
    part = weights.partition[rows]
    w = weights.weight[rows]
    w_abnormal = float(w[part == Partition.ABNORMAL].sum())
    w_normal = float(w[part == Partition.NORMAL].sum())
    return w_abnormal, w_normal


def abnormal_ratio(abnormal_weight: float, normal_weight: float) -> float:
    """abnormal / (normal + abnormal + 1); the +1 damps fully aggregated elements."""
    return abnormal_weight / (normal_weight + abnormal_weight + 1.0)


def ripple_expected(element: Element, leaf: int, table: LeafTable) -> float:
    """Actual value the leaf would have if the element were a clean root cause.

    Scales the leaf's forecast by the element's actual/forecast ratio. When the
    element's forecast aggregate is 0 the leaf is treated as perfectly
    explained (expected = its own actual).
    """
    v_el, f_el = aggregate(element, table)
    if f_el == 0:
        return float(table.actual[leaf])
    return float(table.forecast[leaf]) * v_el / f_el


def ripple_ratio(element: Element, weights: WeightedLeafSet, table: LeafTable) -> float:
    """Residual deviation after adjusting descendants for the ripple effect.

    Ratio of the deviation mass that survives rescaling the leaves by the
    element's own change to the raw deviation mass. 0 means the element's
    leaves move exactly proportionally; leaf elements always score 0.
    """
    rows = leaf_descendants(element, table)
    # a single descendant leaf satisfies the ripple identity exactly:
    # expected = f * (v/f) = v, so the residual is 0, not float noise
    if rows.size <= 1:
        return 0.0
    adjusted, total = _ripple_sums(element, rows, weights, table)
    return adjusted / total if total > 0 else 0.0


def _ripple_sums(
    element: Element,
    rows: np.ndarray,
    weights: WeightedLeafSet,
    table: LeafTable,
) -> tuple[float, float]:
    v_el, f_el = aggregate(element, table)
    v = table.actual[rows]
    f = table.forecast[rows]
    if f_el == 0:
        expected = v.copy()
    else:
        expected = f * (v_el / f_el)
    denom = expected + v
    terms = np.zeros_like(denom)
    np.divide(2.0 * np.abs(expected - v), denom, out=terms, where=denom != 0)
    adjusted = float(terms.sum())
    total = float(np.abs(weights.scores[rows]).sum())
    return adjusted, total


def risk_score(
    element: Element, weights: WeightedLeafSet, table: LeafTable
) -> RiskBreakdown:
    """Combined risk of one element with its full decomposition."""
    rows = leaf_descendants(element, table)
    part = weights.partition[rows]
    w = weights.weight[rows]
    w_abnormal = float(w[part == Partition.ABNORMAL].sum())
    w_normal = float(w[part == Partition.NORMAL].sum())
    r_abn = abnormal_ratio(w_abnormal, w_normal)

    _, f_el = aggregate(element, table)
    fallback = f_el == 0 and rows.size > 0
    if rows.size == 0:
        adjusted = total = 0.0
    else:
        adjusted, total = _ripple_sums(element, rows, weights, table)
    # leaf elements and single-leaf aggregates fit the ripple identity exactly
    exact_fit = element.layer == table.dimension or rows.size <= 1
    r_rip = 0.0 if exact_fit or total == 0 else adjusted / total

    return RiskBreakdown(
        risk=r_abn - r_rip,
        abnormal_ratio=r_abn,
        ripple_ratio=r_rip,
        abnormal_weight=w_abnormal,
        normal_weight=w_normal,
        adjusted_deviation=adjusted,
        total_deviation=total,
        forecast_fallback=fallback,
    )
