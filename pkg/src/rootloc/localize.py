"""Layer-ordered element search and iterative root-cause-set construction.

The search walks cuboid layers from coarse to fine and returns, from the first
layer containing any qualifying element, the qualifier with the highest
explanatory power. Qualification means risk >= risk_threshold and explanatory
power >= an absolute threshold derived once from the abnormal partition. The
outer loop removes the winner's descendant leaves and repeats until the
remaining abnormal leaves explain less than that threshold.

Scoring inside the search is vectorized per cuboid: leaves are bucketed by a
mixed-radix group id whose integer order equals the lexicographic element
order, so argmax over the bucket arrays reproduces the deterministic tie-break
(first element in lexicographic order among equal explanatory powers).
Cuboids within a layer could be scored concurrently; the sequential merge used
here is already deterministic and the scan exits at the first qualifying
layer.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .datamodel import (
    Element,
    LeafTable,
    WILDCARD,
    enumerate_cuboids,
    overall_change,
)
from .partition import Partition, WeightedLeafSet, partition_and_weight
from .risk import RiskBreakdown


@dataclass(frozen=True)
class LocalizerConfig:
    """Tunable thresholds, pruning depth, and ablation switches.

    Defaults reproduce the reference configuration: risk_threshold 0.5,
    power_fraction 0.02, pruning restricted to the first layer.
    """

    risk_threshold: float = 0.5
    power_fraction: float = 0.02
    prune_layers: int = 1
    no_outlier_removal: bool = False
    no_abnormal_ratio: bool = False
    no_ripple_ratio: bool = False
    no_weights: bool = False
    max_iterations: int | None = None
    outlier_trim: int = 5

    def __post_init__(self) -> None:
        if not 0 < self.power_fraction <= 1:
            raise ValueError("power_fraction must be in (0, 1]")
        if self.prune_layers < 0:
            raise ValueError("prune_layers must be >= 0")
        if self.outlier_trim < 0:
            raise ValueError("outlier_trim must be >= 0")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


def ablation_variants(base: LocalizerConfig | None = None) -> dict[str, LocalizerConfig]:
    """The four single-component ablation configs derived from a base config."""
    base = base or LocalizerConfig()
    return {
        "no_outlier_removal": replace(base, no_outlier_removal=True),
        "no_abnormal_ratio": replace(base, no_abnormal_ratio=True),
        "no_ripple_ratio": replace(base, no_ripple_ratio=True),
        "no_weights": replace(base, no_weights=True),
    }


@dataclass(frozen=True)
class LocatedElement:
    """One returned element with the evidence it was selected on."""

    element: Element
    risk: RiskBreakdown
    explanatory_power: float
    layer: int
    iteration: int


@dataclass
class RootCauseSet:
    """Ordered localization result; elements appear in discovery order."""

    elements: list[Element] = field(default_factory=list)
    reports: list[LocatedElement] = field(default_factory=list)
    termination: str = "explained"
    power_threshold: float = 0.0
    sign: float = 1.0

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)


@dataclass(frozen=True)
class _Candidate:
    element: Element
    explanatory_power: float
    layer: int
    breakdown: RiskBreakdown


@dataclass
class _Slices:
    """Columns restricted to the surviving leaves of one search pass."""

    v: np.ndarray
    f: np.ndarray
    w_abnormal: np.ndarray
    w_normal: np.ndarray
    abs_ds: np.ndarray
    ep_pos: np.ndarray
    components: tuple[np.ndarray, ...] | None = None

    ep_pos_total: float = 0.0

    def restrict(self, sel: np.ndarray) -> "_Slices":
        return _Slices(
            v=self.v[sel],
            f=self.f[sel],
            w_abnormal=self.w_abnormal[sel],
            w_normal=self.w_normal[sel],
            abs_ds=self.abs_ds[sel],
            ep_pos=self.ep_pos[sel],
            components=(
                tuple(c[sel] for c in self.components)
                if self.components is not None
                else None
            ),
            ep_pos_total=self.ep_pos_total,
        )


def _safe_div(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros_like(num, dtype=np.float64)
    np.divide(num, den, out=out, where=den != 0)
    return out


class _SearchEngine:
    """Vectorized per-cuboid scorer over the surviving leaves of one instance."""

    def __init__(
        self,
        table: LeafTable,
        weights: WeightedLeafSet,
        ep_scale: float,
        config: LocalizerConfig,
    ) -> None:
        self.table = table
        self.config = config
        self.ep_scale = ep_scale
        self.cards = table.schema.cardinalities
        d = table.dimension
        self.cuboids_by_layer: list[list] = [[] for _ in range(d + 1)]
        for cuboid in enumerate_cuboids(table.schema):
            self.cuboids_by_layer[cuboid.layer].append(cuboid)

        w = weights.weight
        self.w_abnormal = np.where(weights.partition == Partition.ABNORMAL, w, 0.0)
        self.w_normal = np.where(weights.partition == Partition.NORMAL, w, 0.0)
        self.abs_ds = np.abs(weights.scores)
        # sign-normalized leaf explanatory power, for the pruning bound
        ep_leaf = (table.actual - table.forecast) * ep_scale
        self.ep_pos_leaf = np.maximum(ep_leaf, 0.0)

    def search(
        self, alive: np.ndarray, power_threshold: float, risk_threshold: float
    ) -> _Candidate | None:
        rows = np.flatnonzero(alive)
        if rows.size == 0:
            return None
        table = self.table
        cols = [table.coords[rows, a].astype(np.int64) for a in range(table.dimension)]
        ep_pos = self.ep_pos_leaf[rows]
        sub = _Slices(
            v=table.actual[rows],
            f=table.forecast[rows],
            w_abnormal=self.w_abnormal[rows],
            w_normal=self.w_normal[rows],
            abs_ds=self.abs_ds[rows],
            ep_pos=ep_pos,
            components=(
                tuple(
                    col[rows]
                    for col in (
                        table.actual_num,
                        table.actual_den,
                        table.forecast_num,
                        table.forecast_den,
                    )
                )
                if table.measure_kind == "derived"
                else None
            ),
            ep_pos_total=float(ep_pos.sum()),
        )
        for layer in range(1, table.dimension + 1):
            best: _Candidate | None = None
            for cuboid in self.cuboids_by_layer[layer]:
                cand = self._score_cuboid(cuboid, cols, sub, power_threshold, risk_threshold)
                if cand is not None and (
                    best is None or cand.explanatory_power > best.explanatory_power
                ):
                    best = cand
            if best is not None:
                return best
        return None

    def _score_cuboid(
        self,
        cuboid,
        cols: list[np.ndarray],
        sub: _Slices,
        power_threshold: float,
        risk_threshold: float,
    ) -> _Candidate | None:
        attrs = cuboid.attributes
        gid = cols[attrs[0]].copy()
        size = self.cards[attrs[0]]
        for a in attrs[1:]:
            gid *= self.cards[a]
            gid += cols[a]
            size *= self.cards[a]

        counts = np.bincount(gid, minlength=size)
        scored = counts > 0
        n_existing = int(np.count_nonzero(counts))

        # The potential-power bound relies on additive aggregation; a derived
        # quotient can rise while every leaf quotient falls (Simpson-style),
        # so pruning is a fundamental-measure-only optimization. Skipping the
        # bound is always sound, which allows a cost gate: an element is
        # prunable only when its share of the positive leaf power falls below
        # the threshold, and the average element holds (leaves/elements) of
        # it, so cuboids whose elements are fewer than total/(4*threshold)
        # clear the bound wholesale and the pass would be pure overhead.
        worth_pruning = (
            cuboid.layer <= self.config.prune_layers
            and sub.components is None
            and 4.0 * power_threshold * n_existing > sub.ep_pos_total
        )
        if worth_pruning:
            ep_plus = np.bincount(gid, weights=sub.ep_pos, minlength=size)
            scored &= ep_plus >= power_threshold
            if not scored.any():
                return None
            # every remaining aggregation only needs the surviving elements,
            # so the leaf passes shrink to their descendant rows
            if scored.sum() < n_existing:
                sel = scored[gid]
                gid = gid[sel]
                sub = sub.restrict(sel)

        if sub.components is not None:
            num_v, den_v, num_f, den_f = (
                np.bincount(gid, weights=c, minlength=size) for c in sub.components
            )
            v_el = _safe_div(num_v, den_v)
            f_el = _safe_div(num_f, den_f)
        else:
            v_el = np.bincount(gid, weights=sub.v, minlength=size)
            f_el = np.bincount(gid, weights=sub.f, minlength=size)
        ep_el = (v_el - f_el) * self.ep_scale

        w_abn = np.bincount(gid, weights=sub.w_abnormal, minlength=size)
        w_nrm = np.bincount(gid, weights=sub.w_normal, minlength=size)
        if self.config.no_abnormal_ratio:
            r_abn = np.ones(size)
        else:
            r_abn = w_abn / (w_nrm + w_abn + 1.0)

        total_dev = np.bincount(gid, weights=sub.abs_ds, minlength=size)
        is_leaf_layer = cuboid.layer == self.table.dimension
        if self.config.no_ripple_ratio or is_leaf_layer:
            adjusted = np.zeros(size)
            r_rip = np.zeros(size)
        else:
            adjusted = self._ripple_residual(gid, size, sub, v_el, f_el)
            r_rip = _safe_div(adjusted, total_dev)
            # single-leaf elements satisfy the ripple identity exactly
            # (expected = f * v/f = v); keep float noise off the boundary
            r_rip[counts == 1] = 0.0

        risk = r_abn - r_rip
        candidates = scored & (risk >= risk_threshold) & (ep_el >= power_threshold)
        if not candidates.any():
            return None

        idx = int(np.argmax(np.where(candidates, ep_el, -np.inf)))
        breakdown = RiskBreakdown(
            risk=float(risk[idx]),
            abnormal_ratio=float(r_abn[idx]),
            ripple_ratio=float(r_rip[idx]),
            abnormal_weight=float(w_abn[idx]),
            normal_weight=float(w_nrm[idx]),
            adjusted_deviation=float(adjusted[idx]),
            total_deviation=float(total_dev[idx]),
            forecast_fallback=bool(f_el[idx] == 0),
        )
        return _Candidate(
            element=self._element_for(attrs, idx),
            explanatory_power=float(ep_el[idx]),
            layer=cuboid.layer,
            breakdown=breakdown,
        )

    def _ripple_residual(
        self,
        gid: np.ndarray,
        size: int,
        sub: _Slices,
        v_el: np.ndarray,
        f_el: np.ndarray,
    ) -> np.ndarray:
        ratio = _safe_div(v_el, f_el)
        expected = sub.f * ratio[gid]
        zero_forecast = f_el == 0
        if zero_forecast.any():
            # zero forecast aggregate: leaves count as perfectly explained
            fallback = zero_forecast[gid]
            expected[fallback] = sub.v[fallback]
        numer = np.abs(expected - sub.v)
        numer += numer
        denom = expected + sub.v
        # a + v = 0 forces the numerator to 0 as well; dodge the 0/0
        empty = denom == 0.0
        if empty.any():
            denom[empty] = 1.0
        numer /= denom
        return np.bincount(gid, weights=numer, minlength=size)

    def _element_for(self, attrs: tuple[int, ...], gid: int) -> Element:
        coords = [WILDCARD] * self.table.dimension
        for a in reversed(attrs):
            coords[a] = gid % self.cards[a]
            gid //= self.cards[a]
        return Element(tuple(coords))


def max_potential_ep(element: Element, table: LeafTable, *, sign: float = 1.0) -> float:
    """Best explanatory power any subset of the element's leaves can reach.

    Sum of the positive leaf explanatory powers under the element; an element
    below the selection threshold on this bound can be discarded together with
    all of its descendants without affecting the result.
    """
    change = overall_change(table)
    mask = table.descendant_mask(element)
    ep = (table.actual[mask] - table.forecast[mask]) * (sign / change)
    return float(np.maximum(ep, 0.0).sum())


def element_search(
    weights: WeightedLeafSet,
    table: LeafTable,
    risk_threshold: float,
    power_threshold: float,
    config: LocalizerConfig | None = None,
    *,
    sign: float = 1.0,
    alive: np.ndarray | None = None,
) -> Element | None:
    """Single search pass: best qualifying element of the lowest qualifying layer.

    Returns None when no element in any layer reaches both thresholds.
    """
    config = config or LocalizerConfig()
    engine = _SearchEngine(table, weights, sign / overall_change(table), config)
    if alive is None:
        alive = np.ones(len(table), dtype=bool)
    candidate = engine.search(alive, power_threshold, risk_threshold)
    return candidate.element if candidate is not None else None


def localize(table: LeafTable, config: LocalizerConfig | None = None) -> RootCauseSet:
    """Full localization of one instance.

    Partitions and weighs the leaves once, normalizes the explanatory-power
    sign so the abnormal partition explains a positive share, fixes the
    absolute power threshold from that share, then alternates element search
    and leaf removal until the surviving abnormal leaves fall below the
    threshold. Pure function of (table, config); concurrent callers over the
    same immutable table get identical results.
    """
    config = config or LocalizerConfig()
    if len(table) == 0:
        raise ValueError("cannot localize an empty table")
    change = overall_change(table)

    weights = partition_and_weight(
        table, trim=not config.no_outlier_removal, trim_k=config.outlier_trim
    )
    if config.no_weights:
        weights = weights.with_unit_weights()

    ep_leaf = (table.actual - table.forecast) / change
    abnormal = weights.abnormal
    explained = float(ep_leaf[abnormal].sum())
    sign = -1.0 if explained < 0 else 1.0
    explained *= sign
    power_threshold = config.power_fraction * explained

    result = RootCauseSet(power_threshold=power_threshold, sign=sign)
    if explained == 0:
        return result

    engine = _SearchEngine(table, weights, sign / change, config)
    ep_signed = ep_leaf * sign
    alive = np.ones(len(table), dtype=bool)
    cap = config.max_iterations if config.max_iterations is not None else len(table)

    while explained >= power_threshold:
        if len(result.elements) >= cap:
            result.termination = "iteration_cap"
            return result
        candidate = engine.search(alive, power_threshold, config.risk_threshold)
        if candidate is None:
            result.termination = "no_candidate"
            return result
        alive &= ~table.descendant_mask(candidate.element)
        explained = float(ep_signed[alive & abnormal].sum())
        result.elements.append(candidate.element)
        result.reports.append(
            LocatedElement(
                element=candidate.element,
                risk=candidate.breakdown,
                explanatory_power=candidate.explanatory_power,
                layer=candidate.layer,
                iteration=len(result.elements) - 1,
            )
        )

    result.termination = "explained"
    return result
