"""3D volumes with grid geometry, and NIfTI-1 file I/O.

Axis convention used throughout the package: arrays have shape
``(nx, ny, nz)`` and are indexed ``data[x, y, z]``. The linear voxel index
is ``i = x + nx * (y + ny * z)`` (x fastest), which is exactly the order of
a NIfTI payload; serialization therefore uses ``ravel(order="F")``.

Only NIfTI-1 single-file images are handled. Honored header fields:
sizeof_hdr, dim, datatype, bitpix, pixdim, vox_offset, scl_slope/scl_inter
(files with slope outside {0, 1} or nonzero intercept are rejected),
srow_x/y/z and magic ``n+1``. NIfTI-2 and .hdr/.img pairs are rejected.
Supported voxel datatypes: uint8, int16, float32.
"""

from __future__ import annotations

import gzip
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatchError,
    GeometryMismatchError,
    InvalidMaskError,
    NotANiftiError,
    UnsupportedDatatypeError,
    UnsupportedFormatError,
    VolumeIOError,
)

DEFAULT_SPACING_TOL_MM = 1e-4

SUPPORTED_DTYPES = (np.uint8, np.int16, np.float32)

# NIfTI-1 datatype code <-> numpy dtype for the supported element kinds.
_DTYPE_BY_CODE = {2: np.dtype(np.uint8), 4: np.dtype(np.int16), 16: np.dtype(np.float32)}
_CODE_BY_DTYPE = {np.dtype(np.uint8): 2, np.dtype(np.int16): 4, np.dtype(np.float32): 16}

_HEADER_FIELDS = [
    ("sizeof_hdr", "i4"),
    ("data_type", "S10"),
    ("db_name", "S18"),
    ("extents", "i4"),
    ("session_error", "i2"),
    ("regular", "S1"),
    ("dim_info", "u1"),
    ("dim", "i2", (8,)),
    ("intent_p1", "f4"),
    ("intent_p2", "f4"),
    ("intent_p3", "f4"),
    ("intent_code", "i2"),
    ("datatype", "i2"),
    ("bitpix", "i2"),
    ("slice_start", "i2"),
    ("pixdim", "f4", (8,)),
    ("vox_offset", "f4"),
    ("scl_slope", "f4"),
    ("scl_inter", "f4"),
    ("slice_end", "i2"),
    ("slice_code", "u1"),
    ("xyzt_units", "u1"),
    ("cal_max", "f4"),
    ("cal_min", "f4"),
    ("slice_duration", "f4"),
    ("toffset", "f4"),
    ("glmax", "i4"),
    ("glmin", "i4"),
    ("descrip", "S80"),
    ("aux_file", "S24"),
    ("qform_code", "i2"),
    ("sform_code", "i2"),
    ("quatern_b", "f4"),
    ("quatern_c", "f4"),
    ("quatern_d", "f4"),
    ("qoffset_x", "f4"),
    ("qoffset_y", "f4"),
    ("qoffset_z", "f4"),
    ("srow_x", "f4", (4,)),
    ("srow_y", "f4", (4,)),
    ("srow_z", "f4", (4,)),
    ("intent_name", "S16"),
    ("magic", "S4"),
]

_HEADER_SIZE = 348
_NIFTI2_SIZEOF = 540


def _header_dtype(byteorder: str) -> np.dtype:
    return np.dtype(_HEADER_FIELDS).newbyteorder(byteorder)


def orientation_from_affine(affine: np.ndarray) -> str:
    """Three-letter anatomical code of the voxel axes, RAS-positive convention."""
    letters = (("L", "R"), ("P", "A"), ("I", "S"))
    code = []
    for j in range(3):
        col = affine[:3, j]
        i = int(np.argmax(np.abs(col)))
        code.append(letters[i][1] if col[i] > 0 else letters[i][0])
    return "".join(code)


@dataclass(frozen=True, eq=False)
class Geometry:
    """Grid geometry: voxel counts, spacing in mm, and voxel-to-world affine."""

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    affine: np.ndarray = field(repr=False)
    orientation_code: str = ""

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        spacing = tuple(float(s) for s in self.spacing)
        if len(dims) != 3 or any(d < 1 for d in dims):
            raise DimensionMismatchError(f"dims must be three counts >= 1, got {dims}")
        if len(spacing) != 3 or any(s <= 0 for s in spacing):
            raise DimensionMismatchError(f"spacing must be three positive mm values, got {spacing}")
        affine = np.array(self.affine, dtype=np.float64)
        if affine.shape != (4, 4):
            raise DimensionMismatchError(f"affine must be 4x4, got shape {affine.shape}")
        if np.linalg.det(affine[:3, :3]) == 0:
            raise DimensionMismatchError("affine upper-left 3x3 block is singular")
        affine.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "affine", affine)
        if not self.orientation_code:
            object.__setattr__(self, "orientation_code", orientation_from_affine(affine))

    @classmethod
    def default(cls, dims, spacing=(1.0, 1.0, 1.0)) -> "Geometry":
        """Axis-aligned geometry with the affine implied by the spacing."""
        affine = np.diag([spacing[0], spacing[1], spacing[2], 1.0])
        return cls(dims=tuple(dims), spacing=tuple(spacing), affine=affine)

    @property
    def voxel_count(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    def translated(self, offset: tuple[int, int, int]) -> "Geometry":
        """Geometry of a subgrid starting at ``offset`` voxels (dims unchanged here)."""
        shift = np.eye(4)
        shift[:3, 3] = offset
        return Geometry(self.dims, self.spacing, self.affine @ shift, self.orientation_code)

    def with_dims(self, dims: tuple[int, int, int]) -> "Geometry":
        return Geometry(dims, self.spacing, self.affine, self.orientation_code)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Geometry):
            return NotImplemented
        return (
            self.dims == other.dims
            and self.spacing == other.spacing
            and np.array_equal(self.affine, other.affine)
            and self.orientation_code == other.orientation_code
        )


def check_geometry_match(a: Geometry, b: Geometry, spacing_tol: float = DEFAULT_SPACING_TOL_MM) -> None:
    """Raise GeometryMismatchError unless dims are equal and spacing agrees within tolerance."""
    if a.dims != b.dims:
        raise GeometryMismatchError(f"dims differ: {a.dims} vs {b.dims}", a=a, b=b)
    for sa, sb in zip(a.spacing, b.spacing):
        if abs(sa - sb) > spacing_tol:
            raise GeometryMismatchError(
                f"spacing differs beyond {spacing_tol} mm: {a.spacing} vs {b.spacing}", a=a, b=b
            )


def linear_index(dims: tuple[int, int, int], x: int, y: int, z: int) -> int:
    """Linear voxel index with x fastest-varying (NIfTI payload order)."""
    nx, ny, _ = dims
    return x + nx * (y + ny * z)


def coords_at(dims: tuple[int, int, int], index: int) -> tuple[int, int, int]:
    """Inverse of linear_index."""
    nx, ny, _ = dims
    return index % nx, (index // nx) % ny, index // (nx * ny)


@dataclass
class Volume:
    """Dense scalar grid plus its geometry. Element kind: uint8, int16 or float32."""

    geometry: Geometry
    data: np.ndarray

    def __post_init__(self):
        if self.data.dtype not in _CODE_BY_DTYPE:
            raise UnsupportedDatatypeError(
                f"volume dtype {self.data.dtype} not supported (uint8, int16, float32)"
            )
        if self.data.shape != self.geometry.dims:
            raise DimensionMismatchError(
                f"data shape {self.data.shape} does not match dims {self.geometry.dims}"
            )


@dataclass
class BinaryMask:
    """A volume restricted to {0, 1}, stored as booleans."""

    geometry: Geometry
    data: np.ndarray

    def __post_init__(self):
        if self.data.dtype != np.bool_:
            raise InvalidMaskError(f"mask data must be boolean, got dtype {self.data.dtype}")
        if self.data.shape != self.geometry.dims:
            raise DimensionMismatchError(
                f"mask shape {self.data.shape} does not match dims {self.geometry.dims}"
            )

    @classmethod
    def from_array(cls, data, spacing=(1.0, 1.0, 1.0)) -> "BinaryMask":
        arr = np.asarray(data)
        if arr.dtype != np.bool_:
            if not np.isin(arr, (0, 1)).all():
                raise InvalidMaskError("array contains values outside {0, 1}")
            arr = arr.astype(bool)
        return cls(Geometry.default(arr.shape, spacing), arr)

    @classmethod
    def from_volume(cls, volume: Volume) -> "BinaryMask":
        bad = np.unique(volume.data[(volume.data != 0) & (volume.data != 1)])
        if bad.size:
            raise InvalidMaskError(f"volume is not binary; values outside {{0, 1}}: {bad[:8].tolist()}")
        return cls(volume.geometry, volume.data.astype(bool))

    def to_volume(self) -> Volume:
        return Volume(self.geometry, self.data.astype(np.uint8))

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.data))

    @property
    def is_empty(self) -> bool:
        return not self.data.any()


def _open_for_read(path: Path):
    with open(path, "rb") as f:
        magic = f.read(2)
    if magic == b"\x1f\x8b":
        return gzip.open(path, "rb")
    return open(path, "rb")


def read_nifti(path) -> Volume:
    """Read a NIfTI-1 single-file image (optionally gzipped) into a Volume."""
    path = Path(path)
    try:
        with _open_for_read(path) as f:
            raw_header = f.read(_HEADER_SIZE)
            if len(raw_header) < _HEADER_SIZE:
                raise NotANiftiError(f"{path}: file shorter than a NIfTI-1 header")
            header, byteorder = _parse_header(raw_header, path)
            dims, dtype, vox_offset = _validate_header(header, path)
            f.read(vox_offset - _HEADER_SIZE)
            n_bytes = int(np.prod(dims)) * dtype.itemsize
            payload = f.read(n_bytes)
    except OSError as exc:
        raise VolumeIOError(f"{path}: {exc}") from exc
    except (zlib.error, EOFError) as exc:
        raise VolumeIOError(f"{path}: corrupt gzip stream ({exc})") from exc
    if len(payload) < n_bytes:
        raise DimensionMismatchError(
            f"{path}: payload holds {len(payload)} bytes, header dims {dims} require {n_bytes}"
        )
    data = np.frombuffer(payload, dtype=dtype.newbyteorder(byteorder)).astype(dtype, copy=True)
    data = data.reshape(dims, order="F")

    spacing = tuple(float(s) for s in header["pixdim"][0][1:4])
    affine = _affine_from_header(header, spacing)
    geometry = Geometry(dims=dims, spacing=spacing, affine=affine)
    return Volume(geometry, data)


def _parse_header(raw: bytes, path: Path):
    sizeof_le = int(np.frombuffer(raw[:4], dtype="<i4")[0])
    sizeof_be = int(np.frombuffer(raw[:4], dtype=">i4")[0])
    if sizeof_le == _HEADER_SIZE:
        byteorder = "<"
    elif sizeof_be == _HEADER_SIZE:
        byteorder = ">"
    elif _NIFTI2_SIZEOF in (sizeof_le, sizeof_be):
        raise UnsupportedFormatError(f"{path}: NIfTI-2 images are not supported")
    else:
        raise NotANiftiError(f"{path}: sizeof_hdr is {sizeof_le}, not {_HEADER_SIZE}")
    header = np.frombuffer(raw, dtype=_header_dtype(byteorder), count=1)
    magic = bytes(header["magic"][0]).rstrip(b"\x00")
    if magic == b"ni1":
        raise UnsupportedFormatError(f"{path}: header/payload .hdr/.img pairs are not supported")
    if magic != b"n+1":
        raise NotANiftiError(f"{path}: bad magic {magic!r}")
    return header, byteorder


def _validate_header(header, path: Path):
    dim = header["dim"][0]
    ndim = int(dim[0])
    if ndim == 4 and int(dim[4]) == 1:
        ndim = 3
    if ndim != 3:
        raise DimensionMismatchError(f"{path}: expected a 3D image, dim is {dim.tolist()}")
    dims = tuple(int(d) for d in dim[1:4])
    if any(d < 1 for d in dims):
        raise DimensionMismatchError(f"{path}: non-positive dims {dims}")

    code = int(header["datatype"][0])
    if code not in _DTYPE_BY_CODE:
        raise UnsupportedDatatypeError(
            f"{path}: datatype code {code} not supported (uint8=2, int16=4, float32=16)"
        )
    dtype = _DTYPE_BY_CODE[code]
    if int(header["bitpix"][0]) != dtype.itemsize * 8:
        raise NotANiftiError(
            f"{path}: bitpix {int(header['bitpix'][0])} inconsistent with datatype code {code}"
        )

    slope = float(header["scl_slope"][0])
    inter = float(header["scl_inter"][0])
    if slope not in (0.0, 1.0) or inter != 0.0:
        raise UnsupportedDatatypeError(
            f"{path}: scaled voxel data unsupported (scl_slope={slope}, scl_inter={inter})"
        )

    pixdim = header["pixdim"][0][1:4]
    if any(p <= 0 for p in pixdim):
        raise NotANiftiError(f"{path}: non-positive pixdim {pixdim.tolist()}")

    vox_offset = int(header["vox_offset"][0])
    if vox_offset < _HEADER_SIZE:
        raise NotANiftiError(f"{path}: vox_offset {vox_offset} below header size")
    return dims, dtype, vox_offset


def _affine_from_header(header, spacing) -> np.ndarray:
    affine = np.eye(4)
    affine[0, :] = header["srow_x"][0]
    affine[1, :] = header["srow_y"][0]
    affine[2, :] = header["srow_z"][0]
    if np.linalg.det(affine[:3, :3]) == 0:
        # No usable sform rows; fall back to a spacing-scaled identity.
        affine = np.diag([spacing[0], spacing[1], spacing[2], 1.0])
    return affine


def write_nifti(volume: Volume, path, compress: bool | None = None) -> None:
    """Write a Volume as a NIfTI-1 single-file image.

    ``compress=None`` gzips when the path ends in ``.gz``. Gzip output is
    deterministic (fixed mtime, no embedded filename), so identical volumes
    produce byte-identical files.
    """
    path = Path(path)
    if compress is None:
        compress = path.suffix == ".gz"

    header = np.zeros(1, dtype=_header_dtype("<"))
    nx, ny, nz = volume.geometry.dims
    header["sizeof_hdr"] = _HEADER_SIZE
    header["dim"] = [[3, nx, ny, nz, 1, 1, 1, 1]]
    header["datatype"] = _CODE_BY_DTYPE[volume.data.dtype]
    header["bitpix"] = volume.data.dtype.itemsize * 8
    pixdim = np.zeros(8, dtype=np.float32)
    pixdim[0] = 1.0
    pixdim[1:4] = volume.geometry.spacing
    header["pixdim"] = pixdim
    header["vox_offset"] = float(_HEADER_SIZE + 4)
    header["scl_slope"] = 1.0
    header["scl_inter"] = 0.0
    header["xyzt_units"] = 2  # mm
    header["sform_code"] = 1
    affine = volume.geometry.affine.astype(np.float32)
    header["srow_x"] = affine[0, :]
    header["srow_y"] = affine[1, :]
    header["srow_z"] = affine[2, :]
    header["magic"] = b"n+1"

    payload = np.ascontiguousarray(volume.data.ravel(order="F")).astype(
        volume.data.dtype.newbyteorder("<"), copy=False
    )
    try:
        with open(path, "wb") as raw:
            if compress:
                with gzip.GzipFile(filename="", mode="wb", fileobj=raw, mtime=0) as f:
                    _write_stream(f, header, payload)
            else:
                _write_stream(raw, header, payload)
    except OSError as exc:
        raise VolumeIOError(f"{path}: {exc}") from exc


def _write_stream(f, header, payload) -> None:
    f.write(header.tobytes())
    f.write(b"\x00\x00\x00\x00")  # no header extensions
    f.write(payload.tobytes())
