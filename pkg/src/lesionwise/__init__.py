"""Lesion-wise evaluation and whole-tumor residual label fusion for 3D
brain-tumor segmentations."""

__version__ = "0.1.0"

from .errors import LesionwiseError
from .fusion import FusionMode, SubregionTriplet, decompose, fuse, split_subregions
from .labels import (
    ADULT,
    COMPARISON,
    PEDIATRIC,
    SUBREGIONS,
    LabelMap,
    LabelSchema,
    Region,
    derive_region,
    extract_mask,
    remap_to_comparison,
)
from .metrics import (
    LesionMatch,
    MatchKind,
    MetricParams,
    PercentileMethod,
    RegionScores,
    boundary,
    dice,
    distance_transform,
    hd95,
    lesionwise_eval,
    precision_recall,
)
from .morphology import ComponentMap, Connectivity, connected_components, dilate, filter_small
from .phantom import (
    DegradationOp,
    LesionSpec,
    PhantomSpec,
    ShellSpec,
    brute_force_hd95,
    degrade,
    generate_phantom,
)
from .report import CaseReport, CohortReport, aggregate, emit, eval_case
from .volume import (
    BinaryMask,
    Geometry,
    Volume,
    check_geometry_match,
    coords_at,
    linear_index,
    read_nifti,
    write_nifti,
)

__all__ = [
    "ADULT",
    "BinaryMask",
    "COMPARISON",
    "CaseReport",
    "CohortReport",
    "ComponentMap",
    "Connectivity",
    "DegradationOp",
    "FusionMode",
    "Geometry",
    "LabelMap",
    "LabelSchema",
    "LesionMatch",
    "LesionSpec",
    "LesionwiseError",
    "MatchKind",
    "MetricParams",
    "PEDIATRIC",
    "PercentileMethod",
    "PhantomSpec",
    "Region",
    "RegionScores",
    "SUBREGIONS",
    "ShellSpec",
    "SubregionTriplet",
    "Volume",
    "aggregate",
    "boundary",
    "brute_force_hd95",
    "check_geometry_match",
    "connected_components",
    "coords_at",
    "decompose",
    "degrade",
    "derive_region",
    "dice",
    "dilate",
    "distance_transform",
    "emit",
    "eval_case",
    "extract_mask",
    "filter_small",
    "fuse",
    "generate_phantom",
    "hd95",
    "lesionwise_eval",
    "linear_index",
    "precision_recall",
    "read_nifti",
    "remap_to_comparison",
    "split_subregions",
    "write_nifti",
]
