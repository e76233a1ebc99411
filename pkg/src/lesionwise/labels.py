"""Label schemas and the derived-region algebra (WT, TC, NC, ...).

Two annotation conventions are supported natively: the pediatric scheme
with subregions ET / NET / CC / ED and the adult scheme with ET / NCR / ED.
A third "comparison" scheme (ET / NC / ED) is the common space the two can
be projected into, with NC = NET u CC on pediatric maps. Integer codes are
never fixed by the conventions themselves; the defaults below follow the
public challenge encodings and every schema is overridable via config.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (
    DimensionMismatchError,
    LabelSchemaError,
    RegionUndefinedError,
    UnknownCodeError,
    UnsupportedDatatypeError,
    WrongSchemaError,
)
from .volume import BinaryMask, Geometry, Volume


class Region(str, Enum):
    WT = "WT"
    TC = "TC"
    NC = "NC"
    ET = "ET"
    NET = "NET"
    CC = "CC"
    ED = "ED"
    NCR = "NCR"


_SYMBOLS = {"ET", "NET", "CC", "ED", "NCR", "NC"}

_KIND_BY_SYMBOLS = {
    frozenset({"ET", "NET", "CC", "ED"}): "pediatric",
    frozenset({"ET", "NCR", "ED"}): "adult",
    frozenset({"ET", "NC", "ED"}): "comparison",
    frozenset({"ET", "CC", "ED"}): "subregions",
}

# Constituent subregion symbols of each derived region, per schema kind.
_CONSTITUENTS = {
    "pediatric": {
        Region.WT: frozenset({"ET", "NET", "CC", "ED"}),
        Region.TC: frozenset({"ET", "NET", "CC"}),
        Region.NC: frozenset({"NET", "CC"}),
        Region.ET: frozenset({"ET"}),
        Region.NET: frozenset({"NET"}),
        Region.CC: frozenset({"CC"}),
        Region.ED: frozenset({"ED"}),
    },
    "adult": {
        Region.WT: frozenset({"ET", "NCR", "ED"}),
        Region.TC: frozenset({"ET", "NCR"}),
        Region.NC: frozenset({"NCR"}),
        Region.ET: frozenset({"ET"}),
        Region.NCR: frozenset({"NCR"}),
        Region.ED: frozenset({"ED"}),
    },
    "comparison": {
        Region.WT: frozenset({"ET", "NC", "ED"}),
        Region.TC: frozenset({"ET", "NC"}),
        Region.NC: frozenset({"NC"}),
        Region.ET: frozenset({"ET"}),
        Region.ED: frozenset({"ED"}),
    },
    "subregions": {
        Region.ET: frozenset({"ET"}),
        Region.CC: frozenset({"CC"}),
        Region.ED: frozenset({"ED"}),
    },
}

# Region rows reported by default, mirroring the table layouts per label space.
DEFAULT_REGIONS = {
    "pediatric": (Region.WT, Region.TC, Region.ET, Region.NET, Region.CC, Region.ED),
    "adult": (Region.WT, Region.TC, Region.ET, Region.NCR, Region.ED),
    "comparison": (Region.WT, Region.TC, Region.ET, Region.NC, Region.ED),
}


@dataclass(frozen=True)
class LabelSchema:
    """Mapping from subregion symbols to the integer codes used in label volumes."""

    name: str
    code_map: dict[str, int]

    def __post_init__(self):
        symbols = frozenset(self.code_map)
        if symbols not in _KIND_BY_SYMBOLS:
            raise LabelSchemaError(
                f"schema '{self.name}' has symbol set {sorted(symbols)}; expected one of "
                f"{[sorted(s) for s in _KIND_BY_SYMBOLS]}"
            )
        codes = list(self.code_map.values())
        if any(not isinstance(c, int) or c < 1 or c > 255 for c in codes):
            raise LabelSchemaError(f"schema '{self.name}' codes must be integers in 1..255: {self.code_map}")
        if len(set(codes)) != len(codes):
            raise LabelSchemaError(f"schema '{self.name}' codes must be distinct: {self.code_map}")

    @property
    def kind(self) -> str:
        return _KIND_BY_SYMBOLS[frozenset(self.code_map)]

    @property
    def codes(self) -> frozenset[int]:
        return frozenset(self.code_map.values())

    def code(self, symbol: str) -> int:
        return self.code_map[symbol]


PEDIATRIC = LabelSchema("pediatric", {"ET": 1, "NET": 2, "CC": 3, "ED": 4})
ADULT = LabelSchema("adult", {"NCR": 1, "ED": 2, "ET": 3})
COMPARISON = LabelSchema("comparison", {"ET": 1, "NC": 2, "ED": 3})
SUBREGIONS = LabelSchema("subregions", {"ET": 1, "CC": 3, "ED": 4})

DEFAULT_SCHEMAS = {s.name: s for s in (PEDIATRIC, ADULT, COMPARISON, SUBREGIONS)}


@dataclass
class LabelMap:
    """uint8 label volume tagged with the schema its codes belong to."""

    geometry: Geometry
    data: np.ndarray
    schema: LabelSchema

    def __post_init__(self):
        if self.data.dtype != np.uint8:
            raise UnsupportedDatatypeError(f"label data must be uint8, got {self.data.dtype}")
        if self.data.shape != self.geometry.dims:
            raise DimensionMismatchError(
                f"label shape {self.data.shape} does not match dims {self.geometry.dims}"
            )
        allowed = np.zeros(256, dtype=bool)
        allowed[0] = True
        allowed[list(self.schema.codes)] = True
        if not allowed[self.data].all():
            bad = np.unique(self.data[~allowed[self.data]])
            raise UnknownCodeError(
                f"volume contains codes {bad.tolist()} not in schema '{self.schema.name}' "
                f"{self.schema.code_map}"
            )

    @classmethod
    def from_volume(cls, volume: Volume, schema: LabelSchema) -> "LabelMap":
        if volume.data.dtype != np.uint8:
            raise UnsupportedDatatypeError(
                f"label volumes must be uint8, got {volume.data.dtype}"
            )
        return cls(volume.geometry, volume.data, schema)

    def to_volume(self) -> Volume:
        return Volume(self.geometry, self.data)

    def voxel_counts(self) -> dict[str, int]:
        """Voxel count per subregion symbol, plus background."""
        counts = np.bincount(self.data.ravel(), minlength=256)
        out = {"background": int(counts[0])}
        for symbol, code in self.schema.code_map.items():
            out[symbol] = int(counts[code])
        return out


def extract_mask(label_map: LabelMap, codes) -> BinaryMask:
    """Binary mask of the voxels whose code lies in ``codes``."""
    codes = set(codes)
    unknown = codes - set(label_map.schema.codes) - {0}
    if unknown:
        raise UnknownCodeError(
            f"codes {sorted(unknown)} not in schema '{label_map.schema.name}' (or 0)"
        )
    lut = np.zeros(256, dtype=bool)
    if codes:
        lut[list(codes)] = True
    return BinaryMask(label_map.geometry, lut[label_map.data])


def region_constituents(schema: LabelSchema, region: Region) -> frozenset[str]:
    """Subregion symbols making up ``region`` under the schema, or an error."""
    table = _CONSTITUENTS[schema.kind]
    if region not in table:
        raise RegionUndefinedError(f"region {region.value} is undefined for schema '{schema.name}'")
    return table[region]


def derive_region(label_map: LabelMap, region: Region) -> BinaryMask:
    """Binary mask of a derived region (union of its constituent subregions)."""
    symbols = region_constituents(label_map.schema, region)
    return extract_mask(label_map, {label_map.schema.code(s) for s in symbols})


def remap_to_comparison(label_map: LabelMap, target: LabelSchema = COMPARISON) -> LabelMap:
    """Project a pediatric map into the 3-class comparison space (NC = NET u CC)."""
    if label_map.schema.kind != "pediatric":
        raise WrongSchemaError(
            f"remap_to_comparison needs a pediatric map, got schema '{label_map.schema.name}'"
        )
    if target.kind != "comparison":
        raise WrongSchemaError(f"target schema '{target.name}' is not a comparison schema")
    src = label_map.schema
    lut = np.zeros(256, dtype=np.uint8)
    lut[src.code("ET")] = target.code("ET")
    lut[src.code("NET")] = target.code("NC")
    lut[src.code("CC")] = target.code("NC")
    lut[src.code("ED")] = target.code("ED")
    return LabelMap(label_map.geometry, lut[label_map.data], target)


def adult_to_comparison(label_map: LabelMap, target: LabelSchema = COMPARISON) -> LabelMap:
    """Relabel an adult map into the comparison space (NC = NCR)."""
    if label_map.schema.kind != "adult":
        raise WrongSchemaError(
            f"adult_to_comparison needs an adult map, got schema '{label_map.schema.name}'"
        )
    if target.kind != "comparison":
        raise WrongSchemaError(f"target schema '{target.name}' is not a comparison schema")
    src = label_map.schema
    lut = np.zeros(256, dtype=np.uint8)
    lut[src.code("ET")] = target.code("ET")
    lut[src.code("NCR")] = target.code("NC")
    lut[src.code("ED")] = target.code("ED")
    return LabelMap(label_map.geometry, lut[label_map.data], target)
