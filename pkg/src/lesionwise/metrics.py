"""Volumetric and lesion-wise segmentation metrics.

Conventions, all of them configurable through :class:`MetricParams`:

* Dice of two empty masks is ``empty_pair_dice`` (default 1.0).
* HD95 is the maximum of the two directed 95th-percentile distances between
  boundary voxels (a boundary voxel is a foreground voxel with at least one
  6-face neighbor that is background or outside the grid). Distances are
  Euclidean in mm, honoring anisotropic spacing. Two empty masks score
  ``empty_pair_hd95``; exactly one empty mask scores ``hd95_penalty``.
* The lesion-wise protocol: connected components of ground truth and
  prediction (same connectivity) are filtered by ``min_lesion_size``; each
  ground-truth lesion is dilated by ``dilation_radius`` to form its matching
  zone; prediction components are assigned to every zone they intersect.
  A ground-truth lesion is scored against the union of its assigned
  prediction components; unassigned entries on either side score dice 0 and
  the HD95 penalty. Lesion-wise dice/HD95 are unweighted means over all
  match entries (matched + missed + false positives).

Precision and recall are voxel-level. Percentiles use linear interpolation
on the sorted distance list by default; a nearest-rank variant is provided
so the oracle and the main path can be pinned to one shared definition.
"""

from __future__ import annotations

import math
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import ndimage

from .errors import EmptyMaskError
from .morphology import Connectivity, dilate_array, filter_small_array, label_array
from .volume import BinaryMask, check_geometry_match

_FACE6 = ndimage.generate_binary_structure(3, 1)


class PercentileMethod(str, Enum):
    LINEAR_INTERP = "linear"
    NEAREST_RANK = "nearest_rank"


class MatchKind(str, Enum):
    MATCHED = "matched"
    MISSED_GT = "missed_gt"
    FALSE_POSITIVE = "false_positive"


class MetricParams(BaseModel):
    """Knobs of the evaluation protocol, echoed into every report."""

    model_config = ConfigDict(frozen=True)

    connectivity: Connectivity = Connectivity.FULL26
    dilation_radius: int = Field(default=3, ge=1)
    min_lesion_size: int = Field(default=50, ge=1)
    hd95_penalty: float = Field(default=374.0, gt=0)
    empty_pair_dice: float = Field(default=1.0, ge=0, le=1)
    empty_pair_hd95: float = Field(default=0.0, ge=0)
    percentile_method: PercentileMethod = PercentileMethod.LINEAR_INTERP


class LesionMatch(BaseModel):
    """Score record for one ground-truth lesion or one spurious prediction."""

    kind: MatchKind
    gt_lesion_id: int | None = None
    matched_pred_ids: tuple[int, ...] = ()
    dice: float
    hd95: float


class RegionScores(BaseModel):
    lesionwise_dice: float
    lesionwise_hd95: float
    voxel_dice: float
    voxel_precision: float
    voxel_recall: float
    n_matched: int = 0
    n_missed: int = 0
    n_false_positive: int = 0


def dice(a: BinaryMask, b: BinaryMask, empty_value: float = 1.0) -> float:
    """Dice overlap 2|a^b| / (|a|+|b|); ``empty_value`` when both masks are empty."""
    check_geometry_match(a.geometry, b.geometry)
    na, nb = a.count, b.count
    if na == 0 and nb == 0:
        return empty_value
    inter = int(np.count_nonzero(a.data & b.data))
    return 2.0 * inter / (na + nb)


def precision_recall(pred: BinaryMask, gt: BinaryMask) -> tuple[float, float]:
    """Voxel-level (precision, recall) with the empty-mask conventions documented above."""
    check_geometry_match(pred.geometry, gt.geometry)
    n_pred, n_gt = pred.count, gt.count
    tp = int(np.count_nonzero(pred.data & gt.data))
    if n_pred == 0:
        precision = 1.0 if n_gt == 0 else 0.0
    else:
        precision = tp / n_pred
    if n_gt == 0:
        recall = 1.0 if n_pred == 0 else 0.0
    else:
        recall = tp / n_gt
    return precision, recall


def boundary(mask: BinaryMask) -> BinaryMask:
    """Foreground voxels with a 6-face neighbor outside the mask (grid border counts)."""
    return BinaryMask(mask.geometry, _boundary_array(mask.data))


def _boundary_array(mask: np.ndarray) -> np.ndarray:
    eroded = ndimage.binary_erosion(mask, structure=_FACE6, border_value=0)
    return mask & ~eroded


def distance_transform(mask: BinaryMask, spacing=None) -> np.ndarray:
    """Exact Euclidean distance (mm) from every voxel to the nearest foreground voxel.

    Returns a float64 array of the mask's shape; foreground voxels hold 0.
    Kept in float64 rather than a storable element kind so that downstream
    comparisons are not limited by float32 quantization.
    """
    if mask.is_empty:
        raise EmptyMaskError("distance transform of an empty mask is undefined")
    if spacing is None:
        spacing = mask.geometry.spacing
    return ndimage.distance_transform_edt(~mask.data, sampling=tuple(float(s) for s in spacing))


def _percentile(distances: np.ndarray, method: PercentileMethod) -> float:
    if method is PercentileMethod.LINEAR_INTERP:
        return float(np.percentile(distances, 95.0))
    ordered = np.sort(distances)
    rank = math.ceil(0.95 * ordered.size)
    return float(ordered[max(rank, 1) - 1])


def _hd95_nonempty(a: np.ndarray, b: np.ndarray, spacing, params: MetricParams) -> float:
    """HD95 between two nonempty boolean arrays already cropped to a shared window."""
    ba = _boundary_array(a)
    bb = _boundary_array(b)
    dist_to_b = ndimage.distance_transform_edt(~bb, sampling=spacing)
    dist_to_a = ndimage.distance_transform_edt(~ba, sampling=spacing)
    forward = _percentile(dist_to_b[ba], params.percentile_method)
    backward = _percentile(dist_to_a[bb], params.percentile_method)
    return max(forward, backward)


def hd95(a: BinaryMask, b: BinaryMask, spacing=None, params: MetricParams | None = None) -> float:
    """95th-percentile symmetric boundary distance in mm."""
    params = params or MetricParams()
    check_geometry_match(a.geometry, b.geometry)
    if spacing is None:
        spacing = a.geometry.spacing
    spacing = tuple(float(s) for s in spacing)
    a_empty, b_empty = a.is_empty, b.is_empty
    if a_empty and b_empty:
        return params.empty_pair_hd95
    if a_empty or b_empty:
        return params.hd95_penalty
    window = _joint_slices(a.data, b.data, margin=1)
    return _hd95_nonempty(a.data[window], b.data[window], spacing, params)


def _axis_bounds(arr: np.ndarray, axis: int):
    other = tuple(i for i in range(3) if i != axis)
    hit = np.flatnonzero(arr.any(axis=other))
    if hit.size == 0:
        return None
    return int(hit[0]), int(hit[-1])


def _joint_slices(a: np.ndarray, b: np.ndarray, margin: int):
    """Bounding window of the union of two masks, grown by ``margin``, or None if both empty.

    The margin is clamped at the grid border, which preserves the
    border-counts-as-outside boundary rule inside the window.
    """
    slices = []
    for axis in range(3):
        ba = _axis_bounds(a, axis)
        bb = _axis_bounds(b, axis)
        if ba is None and bb is None:
            return None
        lo = min(x[0] for x in (ba, bb) if x is not None)
        hi = max(x[1] for x in (ba, bb) if x is not None)
        slices.append(slice(max(lo - margin, 0), min(hi + margin + 1, a.shape[axis])))
    return tuple(slices)


def _expand_slices(slices, margin: int, shape) -> tuple:
    return tuple(
        slice(max(s.start - margin, 0), min(s.stop + margin, dim))
        for s, dim in zip(slices, shape)
    )


def _union_slices(s1, s2) -> tuple:
    return tuple(slice(min(a.start, b.start), max(a.stop, b.stop)) for a, b in zip(s1, s2))


def lesionwise_eval(
    pred: BinaryMask,
    gt: BinaryMask,
    spacing=None,
    params: MetricParams | None = None,
) -> tuple[list[LesionMatch], RegionScores]:
    """Run the lesion-wise matching protocol for one region.

    Returns the per-lesion match entries (ground-truth lesions in id order,
    then false positives in prediction id order) and the aggregated
    RegionScores. When neither mask has a component surviving the size
    filter, the lesion-wise scores fall back to the empty-pair conventions.
    """
    params = params or MetricParams()
    check_geometry_match(pred.geometry, gt.geometry)
    if spacing is None:
        spacing = pred.geometry.spacing
    spacing = tuple(float(s) for s in spacing)

    voxel_dice = dice(pred, gt, empty_value=params.empty_pair_dice)
    voxel_precision, voxel_recall = precision_recall(pred, gt)

    window = _joint_slices(pred.data, gt.data, margin=1)
    matches: list[LesionMatch] = []
    if window is not None:
        p = pred.data[window]
        g = gt.data[window]
        g_lab, g_sizes = label_array(g, params.connectivity)
        g_lab, g_sizes = filter_small_array(g_lab, g_sizes, params.min_lesion_size)
        p_lab, p_sizes = label_array(p, params.connectivity)
        p_lab, p_sizes = filter_small_array(p_lab, p_sizes, params.min_lesion_size)
        n_gt = g_sizes.size - 1
        n_pred = p_sizes.size - 1

        g_objects = ndimage.find_objects(g_lab) if n_gt else []
        p_objects = ndimage.find_objects(p_lab) if n_pred else []
        radius = params.dilation_radius
        assigned: set[int] = set()

        for gid in range(1, n_gt + 1):
            zone_window = _expand_slices(g_objects[gid - 1], radius, g.shape)
            lesion = g_lab[zone_window] == gid
            zone = dilate_array(lesion, radius)
            pred_ids = np.unique(p_lab[zone_window][zone])
            pred_ids = pred_ids[pred_ids != 0]
            if pred_ids.size == 0:
                matches.append(
                    LesionMatch(kind=MatchKind.MISSED_GT, gt_lesion_id=gid,
                                dice=0.0, hd95=params.hd95_penalty)
                )
                continue
            assigned.update(int(i) for i in pred_ids)
            pair_window = g_objects[gid - 1]
            for pid in pred_ids:
                pair_window = _union_slices(pair_window, p_objects[int(pid) - 1])
            pair_window = _expand_slices(pair_window, 1, g.shape)
            lesion = g_lab[pair_window] == gid
            pred_union = np.isin(p_lab[pair_window], pred_ids)
            inter = int(np.count_nonzero(lesion & pred_union))
            union_voxels = int(p_sizes[pred_ids].sum())
            pair_dice = 2.0 * inter / (int(g_sizes[gid]) + union_voxels)
            pair_hd95 = _hd95_nonempty(lesion, pred_union, spacing, params)
            matches.append(
                LesionMatch(
                    kind=MatchKind.MATCHED,
                    gt_lesion_id=gid,
                    matched_pred_ids=tuple(sorted(int(i) for i in pred_ids)),
                    dice=pair_dice,
                    hd95=pair_hd95,
                )
            )

        for pid in range(1, n_pred + 1):
            if pid not in assigned:
                matches.append(
                    LesionMatch(kind=MatchKind.FALSE_POSITIVE, matched_pred_ids=(pid,),
                                dice=0.0, hd95=params.hd95_penalty)
                )

    if matches:
        lesionwise_dice = float(np.mean([m.dice for m in matches]))
        lesionwise_hd95 = float(np.mean([m.hd95 for m in matches]))
    else:
        lesionwise_dice = params.empty_pair_dice
        lesionwise_hd95 = params.empty_pair_hd95

    scores = RegionScores(
        lesionwise_dice=lesionwise_dice,
        lesionwise_hd95=lesionwise_hd95,
        voxel_dice=voxel_dice,
        voxel_precision=voxel_precision,
        voxel_recall=voxel_recall,
        n_matched=sum(m.kind is MatchKind.MATCHED for m in matches),
        n_missed=sum(m.kind is MatchKind.MISSED_GT for m in matches),
        n_false_positive=sum(m.kind is MatchKind.FALSE_POSITIVE for m in matches),
    )
    return matches, scores
