"""Shared builders for test inputs."""

from __future__ import annotations

import numpy as np

from lesionwise import PEDIATRIC, BinaryMask, Geometry, LabelMap


def mask(data, spacing=(1.0, 1.0, 1.0)) -> BinaryMask:
    return BinaryMask.from_array(np.asarray(data, dtype=bool), spacing)


def random_mask(dims, density: float, seed: int, spacing=(1.0, 1.0, 1.0)) -> BinaryMask:
    rng = np.random.Generator(np.random.PCG64(seed))
    return mask(rng.random(dims) < density, spacing)


def pediatric_map(data, spacing=(1.0, 1.0, 1.0), schema=PEDIATRIC) -> LabelMap:
    arr = np.asarray(data, dtype=np.uint8)
    return LabelMap(Geometry.default(arr.shape, spacing), arr, schema)


def cube(dims, lo, hi, spacing=(1.0, 1.0, 1.0)) -> BinaryMask:
    arr = np.zeros(dims, dtype=bool)
    arr[lo[0] : hi[0], lo[1] : hi[1], lo[2] : hi[2]] = True
    return mask(arr, spacing)
