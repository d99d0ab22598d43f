"""Root-cause localization for multi-dimensional measures.

Given leaf-level actual and forecast values for an anomalous interval, the
localizer returns the minimal set of (possibly aggregated) attribute-value
elements that best explains the anomaly. The package also ships the synthetic
benchmark generator and the element-level F1 evaluation harness used to
validate it.
"""

from .datamodel import (
    AttributeSchema,
    Cuboid,
    Element,
    ElementParseError,
    LeafTable,
    NoOverallAnomalyError,
    WILDCARD,
    aggregate,
    deviation_score,
    deviation_scores,
    element_space_size,
    enumerate_cuboids,
    explanatory_power,
    format_element,
    is_descendant,
    leaf_descendants,
    parse_element,
    table_from_rows,
)
from .evaluate import EvalReport, ablation_study, parameter_sweep, run_benchmark, score_f1
from .generate import (
    Anomaly,
    DatasetSpec,
    GeneratedDataset,
    GroundTruth,
    generate_dataset,
    generate_instance,
    preset,
)
from .io import read_instance, read_truth, write_dataset, write_instance, write_truth
from .localize import (
    LocalizerConfig,
    LocatedElement,
    RootCauseSet,
    ablation_variants,
    element_search,
    localize,
    max_potential_ep,
)
from .partition import Partition, WeightedLeafSet, partition_and_weight, trim_outliers
from .risk import (
    RiskBreakdown,
    abnormal_mass,
    abnormal_ratio,
    ripple_expected,
    ripple_ratio,
    risk_score,
)

__all__ = [
    "AttributeSchema",
    "Anomaly",
    "Cuboid",
    "DatasetSpec",
    "Element",
    "ElementParseError",
    "EvalReport",
    "GeneratedDataset",
    "GroundTruth",
    "LeafTable",
    "LocalizerConfig",
    "LocatedElement",
    "NoOverallAnomalyError",
    "Partition",
    "RiskBreakdown",
    "RootCauseSet",
    "WILDCARD",
    "WeightedLeafSet",
    "ablation_study",
    "ablation_variants",
    "abnormal_mass",
    "abnormal_ratio",
    "aggregate",
    "deviation_score",
    "deviation_scores",
    "element_search",
    "element_space_size",
    "enumerate_cuboids",
    "explanatory_power",
    "format_element",
    "generate_dataset",
    "generate_instance",
    "is_descendant",
    "leaf_descendants",
    "localize",
    "max_potential_ep",
    "parameter_sweep",
    "parse_element",
    "partition_and_weight",
    "preset",
    "read_instance",
    "read_truth",
    "ripple_expected",
    "ripple_ratio",
    "risk_score",
    "run_benchmark",
    "score_f1",
    "table_from_rows",
    "trim_outliers",
    "write_dataset",
    "write_instance",
    "write_truth",
]
