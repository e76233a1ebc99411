"""Structural primitives: 3D connected components, dilation, size filtering.

Component ids are assigned deterministically: components are numbered
1..count by their minimum linear voxel index (x fastest), independent of
the labeling algorithm's traversal order. Dilation uses the Chebyshev
(cubic) structuring element of side ``2*radius + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import ndimage

from .volume import BinaryMask, Geometry


class Connectivity(Enum):
    FACE6 = 6
    FULL26 = 26

    @property
    def structure(self) -> np.ndarray:
        return ndimage.generate_binary_structure(3, 1 if self is Connectivity.FACE6 else 3)


@dataclass
class ComponentMap:
    """Partition of a mask's foreground into connected components.

    ``labels`` holds uint32 component ids (0 = background); ``sizes`` maps
    id -> voxel count for ids 1..count.
    """

    geometry: Geometry
    labels: np.ndarray
    sizes: dict[int, int]
    connectivity: Connectivity

    @property
    def count(self) -> int:
        return len(self.sizes)

    def component_mask(self, component_id: int) -> BinaryMask:
        return BinaryMask(self.geometry, self.labels == component_id)


def label_array(mask: np.ndarray, connectivity: Connectivity) -> tuple[np.ndarray, np.ndarray]:
    """Label a boolean array; ids ordered by minimum x-fastest linear index.

    Returns (labels uint32, sizes int64 array indexed by id, sizes[0] = 0).
    """
    raw, n = ndimage.label(mask, structure=connectivity.structure)
    if n == 0:
        return raw.astype(np.uint32), np.zeros(1, dtype=np.int64)
    flat = raw.ravel(order="F")
    nonzero = np.flatnonzero(flat)
    # Reverse assignment: the earliest occurrence of each id wins.
    first_seen = np.zeros(n + 1, dtype=np.int64)
    first_seen[flat[nonzero[::-1]]] = nonzero[::-1]
    order = np.argsort(first_seen[1:], kind="stable") + 1
    remap = np.zeros(n + 1, dtype=np.uint32)
    remap[order] = np.arange(1, n + 1, dtype=np.uint32)
    labels = remap[raw]
    sizes = np.bincount(remap[flat[nonzero]], minlength=n + 1).astype(np.int64)
    return labels, sizes


def filter_small_array(labels: np.ndarray, sizes: np.ndarray, min_size: int) -> tuple[np.ndarray, np.ndarray]:
    """Drop components below ``min_size`` voxels; recompact ids preserving order."""
    keep = sizes >= min_size
    keep[0] = False
    if keep[1:].all():
        return labels, sizes
    remap = np.zeros(sizes.size, dtype=np.uint32)
    kept_ids = np.flatnonzero(keep)
    remap[kept_ids] = np.arange(1, kept_ids.size + 1, dtype=np.uint32)
    new_sizes = np.concatenate([[0], sizes[kept_ids]]).astype(np.int64)
    return remap[labels], new_sizes


def connected_components(mask: BinaryMask, connectivity: Connectivity = Connectivity.FULL26) -> ComponentMap:
    """Maximal-component partition of the mask's foreground."""
    labels, sizes = label_array(mask.data, connectivity)
    size_map = {int(i): int(sizes[i]) for i in range(1, sizes.size)}
    return ComponentMap(mask.geometry, labels, size_map, connectivity)


def dilate_array(mask: np.ndarray, radius: int) -> np.ndarray:
    side = 2 * int(radius) + 1
    out = ndimage.maximum_filter(mask.view(np.uint8), size=side, mode="constant", cval=0)
    return out.view(bool)


def dilate(mask: BinaryMask, radius: int) -> BinaryMask:
    """Chebyshev dilation: voxels within chessboard distance <= radius of foreground."""
    if radius < 1:
        raise ValueError(f"dilation radius must be >= 1, got {radius}")
    return BinaryMask(mask.geometry, dilate_array(mask.data, radius))


def filter_small(components: ComponentMap, min_size: int) -> ComponentMap:
    """Remove components smaller than ``min_size`` voxels from a ComponentMap."""
    sizes = np.zeros(components.count + 1, dtype=np.int64)
    for i, s in components.sizes.items():
        sizes[i] = s
    labels, new_sizes = filter_small_array(components.labels, sizes, min_size)
    size_map = {int(i): int(new_sizes[i]) for i in range(1, new_sizes.size)}
    return ComponentMap(components.geometry, labels, size_map, components.connectivity)
