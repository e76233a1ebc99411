"""Seeded synthetic tumor phantoms, controlled degradations, and a brute-force HD95.

Phantoms are label-space only: each lesion is a stack of nested ellipsoids
sharing one center, discretized by the voxel-center rule (a voxel belongs
to an ellipsoid iff its center satisfies the ellipsoid inequality). Shell k
is ellipsoid k minus ellipsoid k+1, painted with its assigned subregion.

All randomness flows through numpy's PCG64 generator seeded from the spec's
64-bit seed, so a given spec reproduces bit-identical volumes anywhere.

Degradation semantics (the degraded region always takes precedence):

* erode: voxels leaving the region become background.
* dilate: voxels entering the region take its code, overwriting neighbors;
  dilating WT labels the grown ring NET (the residual class).
* shift: the region translates by an integer voxel offset; vacated voxels
  become background, landing voxels are overwritten, voxels shifted off the
  grid are dropped. Shifting WT moves the whole labeled content.
* drop: the region's voxels become background.
* speckle_fp: adds cubic false-positive blobs of the region's code on
  background voxels only (side ``2*blob_radius + 1``).
"""

from __future__ import annotations

import math
from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import ndimage

from .errors import DegradationError, PhantomSpecError, WrongSchemaError
from .labels import PEDIATRIC, LabelMap, LabelSchema, Region
from .metrics import MetricParams, PercentileMethod
from .morphology import dilate_array
from .volume import BinaryMask, Geometry, check_geometry_match

_SHELL_LABELS = ("ET", "NET", "CC", "ED")


class ShellSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    label: Literal["ET", "NET", "CC", "ED"]
    semi_axes: tuple[float, float, float]

    @model_validator(mode="after")
    def _positive(self):
        if any(a <= 0 for a in self.semi_axes):
            raise ValueError(f"semi-axes must be positive, got {self.semi_axes}")
        return self


class LesionSpec(BaseModel):
    """One lesion: nested ellipsoid shells, outermost first."""

    model_config = ConfigDict(frozen=True)

    center: tuple[float, float, float]
    shells: tuple[ShellSpec, ...] = Field(min_length=1)

    @model_validator(mode="after")
    def _nested(self):
        for outer, inner in zip(self.shells, self.shells[1:]):
            if not all(i < o for i, o in zip(inner.semi_axes, outer.semi_axes)):
                raise ValueError(
                    f"shells must shrink strictly on every axis: {outer.semi_axes} -> {inner.semi_axes}"
                )
        return self

    @property
    def outer_axes(self) -> tuple[float, float, float]:
        return self.shells[0].semi_axes


class PhantomSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    n_lesions: int = Field(default=0, ge=0)
    lesions: tuple[LesionSpec, ...] | None = None
    seed: int = 0

    @model_validator(mode="after")
    def _consistent(self):
        if any(d < 1 for d in self.dims):
            raise ValueError(f"dims must be positive, got {self.dims}")
        if any(s <= 0 for s in self.spacing):
            raise ValueError(f"spacing must be positive, got {self.spacing}")
        if self.lesions is not None and len(self.lesions) != self.n_lesions:
            raise ValueError(
                f"n_lesions is {self.n_lesions} but {len(self.lesions)} lesions are listed"
            )
        return self


def _check_in_bounds(lesion: LesionSpec, dims) -> None:
    for c, a, d in zip(lesion.center, lesion.outer_axes, dims):
        if c - a < 0 or c + a > d - 1:
            raise PhantomSpecError(
                f"lesion at {lesion.center} with outer axes {lesion.outer_axes} "
                f"exceeds grid {dims}"
            )


def _paint_lesion(data: np.ndarray, lesion: LesionSpec, schema: LabelSchema) -> list[int]:
    """Paint shells outermost-first (inner shells overwrite); returns shell voxel counts."""
    cx, cy, cz = lesion.center
    lo = [max(int(math.floor(c - a)), 0) for c, a in zip(lesion.center, lesion.outer_axes)]
    hi = [min(int(math.ceil(c + a)) + 1, d) for c, a, d in zip(lesion.center, lesion.outer_axes, data.shape)]
    x = np.arange(lo[0], hi[0], dtype=np.float64)[:, None, None] - cx
    y = np.arange(lo[1], hi[1], dtype=np.float64)[None, :, None] - cy
    z = np.arange(lo[2], hi[2], dtype=np.float64)[None, None, :] - cz
    window = data[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]
    counts = []
    for shell in lesion.shells:
        ax, ay, az = shell.semi_axes
        inside = (x / ax) ** 2 + (y / ay) ** 2 + (z / az) ** 2 <= 1.0
        window[inside] = schema.code(shell.label)
        counts.append(int(np.count_nonzero(inside)))
    # Convert cumulative ellipsoid counts to per-shell counts.
    return [counts[i] - (counts[i + 1] if i + 1 < len(counts) else 0) for i in range(len(counts))]


# Shell patterns cycled by the random layout; the first two together cover
# all four pediatric labels, so any phantom with >= 2 lesions does too.
_PATTERNS = (("ED", "NET", "ET"), ("ED", "CC", "ET"), ("NET", "ET"), ("CC",))
_SHRINK = (1.0, 0.55, 0.28)
# Random lesions keep a Chebyshev gap > 2*_SEPARATION voxels so that the
# default matching zones (dilation radius 3) never reach a neighboring lesion.
_SEPARATION = 2


def _random_lesions(spec: PhantomSpec) -> tuple[LesionSpec, ...]:
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    # Rejection-sample whole layouts: a clumsy early placement can make the
    # remaining lesions unplaceable, so failures restart from scratch.
    for _ in range(60):
        lesions: list[LesionSpec] = []
        boxes: list[tuple] = []
        for i in range(spec.n_lesions):
            placed = _place_lesion(rng, spec, _PATTERNS[i % len(_PATTERNS)], boxes)
            if placed is None:
                break
            lesions.append(placed[0])
            boxes.append(placed[1])
        else:
            return tuple(lesions)
    raise PhantomSpecError(
        f"could not place {spec.n_lesions} separated lesions in grid {spec.dims}"
    )


def _place_lesion(rng, spec: PhantomSpec, pattern, boxes):
    max_axis = max(min(d // 5 for d in spec.dims), 5)
    for _ in range(60):
        axes = rng.uniform(4.5, max_axis, size=3)
        margin = [math.ceil(a) + 1 for a in axes]
        if any(d - 1 - 2 * m < 1 for m, d in zip(margin, spec.dims)):
            raise PhantomSpecError(f"grid {spec.dims} too small for random lesions")
        center = tuple(
            float(rng.integers(m, d - 1 - m, endpoint=True))
            for m, d in zip(margin, spec.dims)
        )
        box = tuple((c - a - _SEPARATION, c + a + _SEPARATION) for c, a in zip(center, axes))
        if any(_boxes_overlap(box, other) for other in boxes):
            continue
        shells = tuple(
            ShellSpec(label=label, semi_axes=tuple(float(a * _SHRINK[k]) for a in axes))
            for k, label in enumerate(pattern)
        )
        candidate = LesionSpec(center=center, shells=shells)
        if _shells_all_nonempty(candidate):
            return candidate, box
    return None


def _boxes_overlap(a, b) -> bool:
    return all(lo_a <= hi_b and lo_b <= hi_a for (lo_a, hi_a), (lo_b, hi_b) in zip(a, b))


def _shells_all_nonempty(lesion: LesionSpec) -> bool:
    probe = np.zeros([int(math.ceil(2 * a)) + 3 for a in lesion.outer_axes], dtype=np.uint8)
    centered = LesionSpec(
        center=tuple(float(a) + 1 for a in lesion.outer_axes), shells=lesion.shells
    )
    counts = _paint_lesion(probe, centered, PEDIATRIC)
    return all(c > 0 for c in counts)


def generate_phantom(spec: PhantomSpec, schema: LabelSchema = PEDIATRIC) -> LabelMap:
    """Deterministic pediatric label map for the spec (layout drawn from the seed if absent)."""
    if schema.kind != "pediatric":
        raise WrongSchemaError(f"phantoms are pediatric maps; got schema '{schema.name}'")
    lesions = spec.lesions if spec.lesions is not None else _random_lesions(spec)
    data = np.zeros(spec.dims, dtype=np.uint8)
    for lesion in lesions:
        _check_in_bounds(lesion, spec.dims)
        _paint_lesion(data, lesion, schema)
    return LabelMap(Geometry.default(spec.dims, spec.spacing), data, schema)


class Erode(BaseModel):
    model_config = ConfigDict(frozen=True)
    op: Literal["erode"] = "erode"
    region: Region
    radius: int = Field(ge=1)


class Dilate(BaseModel):
    model_config = ConfigDict(frozen=True)
    op: Literal["dilate"] = "dilate"
    region: Region
    radius: int = Field(ge=1)


class Shift(BaseModel):
    model_config = ConfigDict(frozen=True)
    op: Literal["shift"] = "shift"
    region: Region
    offset: tuple[int, int, int]


class DropLabel(BaseModel):
    model_config = ConfigDict(frozen=True)
    op: Literal["drop"] = "drop"
    region: Region


class SpeckleFp(BaseModel):
    model_config = ConfigDict(frozen=True)
    op: Literal["speckle_fp"] = "speckle_fp"
    region: Region
    n_blobs: int = Field(ge=1)
    blob_radius: int = Field(ge=1)
    seed: int = 0


DegradationOp = Annotated[Union[Erode, Dilate, Shift, DropLabel, SpeckleFp], Field(discriminator="op")]


def _erode_array(mask: np.ndarray, radius: int) -> np.ndarray:
    side = 2 * radius + 1
    return ndimage.minimum_filter(mask.view(np.uint8), size=side, mode="constant", cval=0).view(bool)


def degrade(label_map: LabelMap, ops) -> LabelMap:
    """Apply degradation ops in order; the result stays a valid pediatric map."""
    if label_map.schema.kind != "pediatric":
        raise WrongSchemaError(f"degrade needs a pediatric map, got '{label_map.schema.name}'")
    data = label_map.data.copy()
    schema = label_map.schema
    for op in ops:
        data = _apply_op(data, op, schema, label_map.geometry)
    return LabelMap(label_map.geometry, data, schema)


def _region_mask(data: np.ndarray, region: Region, schema: LabelSchema) -> np.ndarray:
    if region is Region.WT:
        return data != 0
    if region.value not in schema.code_map:
        raise DegradationError(f"region {region.value} has no code in schema '{schema.name}'")
    return data == schema.code(region.value)


def _apply_op(data: np.ndarray, op, schema: LabelSchema, geometry: Geometry) -> np.ndarray:
    mask = _region_mask(data, op.region, schema)
    if isinstance(op, Erode):
        removed = mask & ~_erode_array(mask, op.radius)
        data[removed] = 0
        return data
    if isinstance(op, Dilate):
        added = dilate_array(mask, op.radius) & ~mask
        fill = schema.code("NET") if op.region is Region.WT else schema.code(op.region.value)
        data[added] = fill
        return data
    if isinstance(op, Shift):
        if all(o == 0 for o in op.offset):
            return data
        if any(abs(o) >= d for o, d in zip(op.offset, data.shape)):
            raise DegradationError(f"shift offset {op.offset} exceeds grid {data.shape}")
        moved_values = _shift_values(np.where(mask, data, 0), op.offset)
        data[mask] = 0
        landing = moved_values != 0
        if op.region is Region.WT:
            data[landing] = moved_values[landing]
        else:
            data[landing] = schema.code(op.region.value)
        return data
    if isinstance(op, DropLabel):
        data[mask] = 0
        return data
    if isinstance(op, SpeckleFp):
        return _speckle(data, op, schema)
    raise DegradationError(f"unknown degradation op {op!r}")


def _shift_values(values: np.ndarray, offset) -> np.ndarray:
    out = np.zeros_like(values)
    src = []
    dst = []
    for o, d in zip(offset, values.shape):
        if o >= 0:
            src.append(slice(0, d - o))
            dst.append(slice(o, d))
        else:
            src.append(slice(-o, d))
            dst.append(slice(0, d + o))
    out[tuple(dst)] = values[tuple(src)]
    return out


def _speckle(data: np.ndarray, op: SpeckleFp, schema: LabelSchema) -> np.ndarray:
    if op.region is Region.WT:
        raise DegradationError("speckle_fp needs a single label region, not WT")
    code = schema.code(op.region.value)
    rng = np.random.Generator(np.random.PCG64(op.seed))
    r = op.blob_radius
    side = 2 * r + 1
    if any(d < side for d in data.shape):
        raise DegradationError(f"blob radius {r} does not fit grid {data.shape}")
    placed = 0
    for _ in range(1000 * op.n_blobs):
        if placed == op.n_blobs:
            break
        center = tuple(int(rng.integers(r, d - r)) for d in data.shape)
        window = tuple(slice(c - r, c + r + 1) for c in center)
        if data[window].any():
            continue
        data[window] = code
        placed += 1
    if placed < op.n_blobs:
        raise DegradationError(
            f"placed only {placed} of {op.n_blobs} blobs; not enough clear background"
        )
    return data


def brute_force_hd95(
    a: BinaryMask,
    b: BinaryMask,
    spacing=None,
    params: MetricParams | None = None,
) -> float:
    """Exhaustive-pairwise HD95 oracle; same conventions as metrics.hd95.

    Intended for small masks (tests cap around 20^3): it scans all boundary
    voxel pairs directly and never shares code with the production path.
    """
    params = params or MetricParams()
    check_geometry_match(a.geometry, b.geometry)
    if spacing is None:
        spacing = a.geometry.spacing
    scale = np.asarray(spacing, dtype=np.float64)
    if a.is_empty and b.is_empty:
        return params.empty_pair_hd95
    if a.is_empty or b.is_empty:
        return params.hd95_penalty
    pa = np.argwhere(_scan_boundary(a.data)).astype(np.float64) * scale
    pb = np.argwhere(_scan_boundary(b.data)).astype(np.float64) * scale
    pairwise = np.sqrt(((pa[:, None, :] - pb[None, :, :]) ** 2).sum(axis=2))
    forward = _scan_percentile(pairwise.min(axis=1), params.percentile_method)
    backward = _scan_percentile(pairwise.min(axis=0), params.percentile_method)
    return max(forward, backward)


def _scan_boundary(mask: np.ndarray) -> np.ndarray:
    padded = np.pad(mask, 1, constant_values=False)
    interior = np.ones_like(mask)
    for axis in range(3):
        for step in (-1, 1):
            neighbor = np.roll(padded, step, axis=axis)[1:-1, 1:-1, 1:-1]
            interior = interior & neighbor
    return mask & ~interior


def _scan_percentile(distances: np.ndarray, method: PercentileMethod) -> float:
    ordered = sorted(float(d) for d in distances)
    n = len(ordered)
    if method is PercentileMethod.NEAREST_RANK:
        rank = math.ceil(0.95 * n)
        return ordered[max(rank, 1) - 1]
    position = (n - 1) * 0.95
    lower = math.floor(position)
    fraction = position - lower
    if lower + 1 >= n:
        return ordered[-1]
    return ordered[lower] + (ordered[lower + 1] - ordered[lower]) * fraction
