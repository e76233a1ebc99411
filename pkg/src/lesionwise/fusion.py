"""Combine a whole-tumor mask with ET/CC/ED subregion masks into a 4-label map.

The residual rule: every whole-tumor voxel not claimed by ET, CC or ED is
labeled NET. Two overlay semantics are exposed because subregion voxels may
fall outside the whole-tumor mask when the two predictions disagree:

* STRICT (default): subregions are clipped to the whole-tumor support, so
  the fused map's whole tumor equals the input mask exactly.
* UNION: stray subregion voxels are kept and extend the tumor support.

In both modes the NET voxels are exactly ``wt & ~(et | cc | ed)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DisjointnessError, WrongSchemaError
from .labels import PEDIATRIC, LabelMap, LabelSchema, derive_region, extract_mask, Region
from .volume import BinaryMask, check_geometry_match


class FusionMode(str, Enum):
    STRICT = "strict"
    UNION = "union"


@dataclass
class SubregionTriplet:
    """The three directly-delineated subregion masks. Must be pairwise disjoint."""

    et: BinaryMask
    cc: BinaryMask
    ed: BinaryMask

    def __post_init__(self):
        check_geometry_match(self.et.geometry, self.cc.geometry)
        check_geometry_match(self.et.geometry, self.ed.geometry)
        overlap = (self.et.data & self.cc.data) | (self.et.data & self.ed.data) | (
            self.cc.data & self.ed.data
        )
        n = int(np.count_nonzero(overlap))
        if n:
            raise DisjointnessError(f"subregion masks overlap on {n} voxels")

    @property
    def union(self) -> np.ndarray:
        return self.et.data | self.cc.data | self.ed.data


def fuse(
    wt: BinaryMask,
    subregions: SubregionTriplet,
    mode: FusionMode = FusionMode.STRICT,
    schema: LabelSchema = PEDIATRIC,
) -> LabelMap:
    """Overlay subregions onto the whole-tumor mask; residual becomes NET."""
    check_geometry_match(wt.geometry, subregions.et.geometry)
    if schema.kind != "pediatric":
        raise WrongSchemaError(f"fusion emits a pediatric map; got schema '{schema.name}'")
    net = wt.data & ~subregions.union
    data = np.zeros(wt.geometry.dims, dtype=np.uint8)
    data[net] = schema.code("NET")
    for symbol, mask in (("ET", subregions.et), ("CC", subregions.cc), ("ED", subregions.ed)):
        claimed = mask.data & wt.data if mode is FusionMode.STRICT else mask.data
        data[claimed] = schema.code(symbol)
    return LabelMap(wt.geometry, data, schema)


def decompose(label_map: LabelMap) -> tuple[BinaryMask, SubregionTriplet]:
    """Split a pediatric map into its whole-tumor mask and ET/CC/ED triplet.

    ``fuse(wt, triplet, STRICT)`` reproduces the input exactly.
    """
    if label_map.schema.kind != "pediatric":
        raise WrongSchemaError(f"decompose needs a pediatric map, got '{label_map.schema.name}'")
    wt = derive_region(label_map, Region.WT)
    triplet = SubregionTriplet(
        et=derive_region(label_map, Region.ET),
        cc=derive_region(label_map, Region.CC),
        ed=derive_region(label_map, Region.ED),
    )
    return wt, triplet


def split_subregions(label_map: LabelMap) -> SubregionTriplet:
    """Adapter: turn a 3-label map (codes for ET, CC, ED) into a SubregionTriplet.

    Accepts any schema defining ET, CC and ED; voxels carrying any other
    nonzero code are rejected, since they would be silently dropped.
    """
    schema = label_map.schema
    for symbol in ("ET", "CC", "ED"):
        if symbol not in schema.code_map:
            raise WrongSchemaError(
                f"schema '{schema.name}' does not define {symbol}; cannot split subregions"
            )
    allowed = {0, schema.code("ET"), schema.code("CC"), schema.code("ED")}
    present = set(np.unique(label_map.data).tolist())
    extra = present - allowed
    if extra:
        raise WrongSchemaError(
            f"map carries codes {sorted(extra)} besides ET/CC/ED; refusing to drop them"
        )
    return SubregionTriplet(
        et=extract_mask(label_map, {schema.code("ET")}),
        cc=extract_mask(label_map, {schema.code("CC")}),
        ed=extract_mask(label_map, {schema.code("ED")}),
    )


def subregion_voxels_outside(wt: BinaryMask, subregions: SubregionTriplet) -> int:
    """Count of subregion voxels falling outside the whole-tumor mask.

    Nonzero counts signal disagreement between the two model outputs; the
    count is surfaced in fuse summaries and reports.
    """
    check_geometry_match(wt.geometry, subregions.et.geometry)
    return int(np.count_nonzero(subregions.union & ~wt.data))
