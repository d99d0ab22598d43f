"""Two-way partitioning of leaf elements with distance-based weights.

The leaves of an instance are split around a data-derived threshold into an
abnormal and a normal partition, with leaves that carry no information
(actual = forecast = 0) set aside at weight 0. The threshold mirrors the
largest absolute deviation score on the side opposite the anomaly, after
discarding a few extreme unique values, so the normal band is estimated from
the data itself.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .datamodel import LeafTable, deviation_scores


class Partition(IntEnum):
    NORMAL = 0
    ABNORMAL = 1
    ZERO = 2


@dataclass
class WeightedLeafSet:
    """Per-leaf weight and partition flag, plus the chosen threshold.

    ``direction`` is the sign of the abnormal deviation scores: +1 when the
    anomaly pushes forecasts above actuals, -1 for the mirror case.
    """

    weight: np.ndarray
    partition: np.ndarray
    threshold: float
    direction: int
    scores: np.ndarray

    def __len__(self) -> int:
        return self.weight.shape[0]

    @property
    def abnormal(self) -> np.ndarray:
        return self.partition == Partition.ABNORMAL

    @property
    def normal(self) -> np.ndarray:
        return self.partition == Partition.NORMAL

    @property
    def zero(self) -> np.ndarray:
        return self.partition == Partition.ZERO

    def with_unit_weights(self) -> "WeightedLeafSet":
        """Copy with every non-ZERO leaf weight set to 1 (weight ablation)."""
        weight = np.where(self.partition == Partition.ZERO, 0.0, 1.0)
        return WeightedLeafSet(
            weight, self.partition.copy(), self.threshold, self.direction, self.scores
        )


def trim_outliers(scores: np.ndarray, k: int = 5) -> np.ndarray:
    """Drop every entry whose value is among the k largest or k smallest uniques.

    Applied only when there are more than 2k + 1 unique values; smaller score
    sets are returned unchanged so the threshold selection never runs on an
    emptied multiset.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise ValueError("scores must be non-empty")
    if k <= 0:
        return scores
    uniques = np.unique(scores)
    if uniques.size <= 2 * k + 1:
        return scores
    lo, hi = uniques[k], uniques[-k - 1]
    return scores[(scores >= lo) & (scores <= hi)]


def partition_and_weight(
    table: LeafTable, *, trim: bool = True, trim_k: int = 5
) -> WeightedLeafSet:
    """Split the table's leaves into partitions and assign weights.

    The threshold t is the negated extreme of the (outlier-trimmed) deviation
    scores on the side opposite the anomaly. Abnormal leaves weigh min(|ds|, 1),
    normal leaves min(|t - ds|, 1), and leaves with both values 0 weigh 0.
    Comparisons at exactly t are inclusive on the abnormal side.
    """
    if len(table) == 0:
        raise ValueError("cannot partition an empty table")

    ds = deviation_scores(table.actual, table.forecast)
    trimmed = trim_outliers(ds, trim_k) if trim else ds
    lo, hi = float(trimmed.min()), float(trimmed.max())

    if abs(lo) < abs(hi):
        t, direction = -lo, 1
        abnormal = ds >= t
    else:
        t, direction = -hi, -1
        abnormal = ds <= t

    zero = (table.actual == 0) & (table.forecast == 0)
    abnormal &= ~zero

    partition = np.full(len(table), Partition.NORMAL, dtype=np.int8)
    partition[abnormal] = Partition.ABNORMAL
    partition[zero] = Partition.ZERO

    weight = np.minimum(np.abs(t - ds), 1.0)
    weight[abnormal] = np.minimum(np.abs(ds[abnormal]), 1.0)
    weight[zero] = 0.0

    return WeightedLeafSet(weight, partition, float(t), direction, ds)
