"""Exception hierarchy with stable machine-readable error codes.

Every error carries a ``code`` string that is kept stable across releases:
the CLI prints it on its error line and the HTTP service returns it in the
``error`` field of failure payloads.
"""

from __future__ import annotations


class LesionwiseError(Exception):
    """Base class for all errors raised by this package."""

    code = "error"


class VolumeIOError(LesionwiseError):
    code = "io-error"


class NotANiftiError(LesionwiseError):
    """File is not a parseable NIfTI-1 image (bad magic or malformed header)."""

    code = "not-a-nifti"


class UnsupportedFormatError(LesionwiseError):
    """Recognised but unsupported container (NIfTI-2, .hdr/.img pairs)."""

    code = "unsupported-format"


class UnsupportedDatatypeError(LesionwiseError):
    code = "unsupported-datatype"


class DimensionMismatchError(LesionwiseError):
    code = "dimension-mismatch"


class GeometryMismatchError(LesionwiseError):
    """Two grids that must be co-registered are not.

    Carries both geometries as ``a`` and ``b``.
    """

    code = "geometry-mismatch"

    def __init__(self, message, a=None, b=None):
        super().__init__(message)
        self.a = a
        self.b = b


class InvalidMaskError(LesionwiseError):
    """Volume expected to be binary contains values outside {0, 1}."""

    code = "not-binary"


class LabelSchemaError(LesionwiseError):
    code = "invalid-schema"


class UnknownCodeError(LesionwiseError):
    code = "unknown-code"


class RegionUndefinedError(LesionwiseError):
    code = "region-undefined-for-schema"


class WrongSchemaError(LesionwiseError):
    code = "wrong-schema"


class SchemaIncompatibleError(LesionwiseError):
    code = "schema-incompatible"


class DisjointnessError(LesionwiseError):
    """Subregion masks that must not overlap do."""

    code = "disjointness-violation"


class EmptyMaskError(LesionwiseError):
    code = "empty-mask"


class PhantomSpecError(LesionwiseError):
    code = "spec-out-of-bounds"


class DegradationError(LesionwiseError):
    code = "invalid-op-parameters"


class InconsistentRegionsError(LesionwiseError):
    code = "inconsistent-region-sets"


class ConfigError(LesionwiseError):
    code = "config-error"
