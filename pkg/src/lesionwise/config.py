"""Flat key-value config files (strict: unknown keys are errors).

Grammar: one ``key = value`` pair per line; blank lines and lines starting
with ``#`` are ignored; anything after a ``#`` in a value is a comment.
Duplicate keys are rejected.

Run-config keys (``--config`` of the eval/fuse commands)::

    metrics.connectivity          6 | 26
    metrics.dilation_radius       integer >= 1
    metrics.min_lesion_size       integer >= 1
    metrics.hd95_penalty          mm, > 0
    metrics.empty_pair_dice       score in [0, 1]
    metrics.empty_pair_hd95       mm, >= 0
    metrics.percentile_method     linear | nearest_rank
    fusion.mode                   strict | union
    io.compress                   true | false
    eval.pred_schema              pediatric | adult | comparison
    eval.gt_schema                pediatric | adult | comparison
    eval.regions                  comma list, e.g. WT,TC,ET,NC,ED
    schema.<name>.<SYMBOL>        integer code override, e.g. schema.pediatric.ET = 1

Phantom spec files (the ``phantom`` command) use the same syntax::

    phantom.dims                  nx,ny,nz
    phantom.spacing               sx,sy,sz (mm, default 1,1,1)
    phantom.seed                  64-bit integer (default 0)
    phantom.n_lesions             integer (layout drawn from the seed if no
                                  lesion.* keys are given)
    lesion.<i>.center             x,y,z (voxel coordinates)
    lesion.<i>.shell.<k>          LABEL ax,ay,az  (outermost shell is k=1)
    degrade.<j>                   erode REGION RADIUS | dilate REGION RADIUS |
                                  shift REGION dx,dy,dz | drop REGION |
                                  speckle_fp REGION N_BLOBS BLOB_RADIUS SEED
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from pydantic import ValidationError

from .errors import ConfigError, LabelSchemaError
from .fusion import FusionMode
from .labels import DEFAULT_SCHEMAS, LabelSchema, Region
from .metrics import Connectivity, MetricParams, PercentileMethod
from .phantom import DropLabel, Dilate, Erode, LesionSpec, PhantomSpec, ShellSpec, Shift, SpeckleFp


def parse_kv_text(text: str, source: str = "<config>") -> dict[str, str]:
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.split("#", 1)[0].strip()
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in pairs:
            raise ConfigError(f"{source}:{lineno}: duplicate key '{key}'")
        pairs[key] = value
    return pairs


def _int(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {value!r}") from None


def _float(key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {value!r}") from None


def _bool(key: str, value: str) -> bool:
    low = value.lower()
    if low in ("true", "false"):
        return low == "true"
    raise ConfigError(f"{key}: expected true or false, got {value!r}")


def _triple(key: str, value: str, cast):
    parts = [p.strip() for p in value.split(",")]
    if len(parts) != 3:
        raise ConfigError(f"{key}: expected three comma-separated values, got {value!r}")
    try:
        return tuple(cast(p) for p in parts)
    except ValueError:
        raise ConfigError(f"{key}: could not parse {value!r}") from None


@dataclass
class RunConfig:
    """Resolved run configuration: schemas with overrides, metric params, modes."""

    schemas: dict[str, LabelSchema] = field(default_factory=lambda: dict(DEFAULT_SCHEMAS))
    params: MetricParams = field(default_factory=MetricParams)
    fusion_mode: FusionMode = FusionMode.STRICT
    compress: bool | None = None
    pred_schema: str = "pediatric"
    gt_schema: str = "pediatric"
    regions: tuple[Region, ...] | None = None


_METRIC_KEYS = {
    "metrics.connectivity": ("connectivity", lambda k, v: _enum(k, _int(k, v), Connectivity)),
    "metrics.dilation_radius": ("dilation_radius", _int),
    "metrics.min_lesion_size": ("min_lesion_size", _int),
    "metrics.hd95_penalty": ("hd95_penalty", _float),
    "metrics.empty_pair_dice": ("empty_pair_dice", _float),
    "metrics.empty_pair_hd95": ("empty_pair_hd95", _float),
    "metrics.percentile_method": ("percentile_method", lambda k, v: _enum(k, v, PercentileMethod)),
}

_SCHEMA_KEY = re.compile(r"^schema\.(pediatric|adult|comparison|subregions)\.([A-Z]+)$")


def _enum(key: str, value, enum_cls):
    try:
        return enum_cls(value)
    except ValueError:
        options = ", ".join(str(e.value) for e in enum_cls)
        raise ConfigError(f"{key}: expected one of {options}, got {value!r}") from None


def load_run_config(path) -> RunConfig:
    return parse_run_config(Path(path).read_text(), source=str(path))


def parse_run_config(text: str, source: str = "<config>") -> RunConfig:
    pairs = parse_kv_text(text, source)
    metric_overrides: dict = {}
    schema_codes: dict[str, dict[str, int]] = {}
    cfg = RunConfig()

    for key, value in pairs.items():
        if key in _METRIC_KEYS:
            name, parse = _METRIC_KEYS[key]
            metric_overrides[name] = parse(key, value)
        elif key == "fusion.mode":
            cfg.fusion_mode = _enum(key, value, FusionMode)
        elif key == "io.compress":
            cfg.compress = _bool(key, value)
        elif key == "eval.pred_schema":
            cfg.pred_schema = _schema_name(key, value)
        elif key == "eval.gt_schema":
            cfg.gt_schema = _schema_name(key, value)
        elif key == "eval.regions":
            cfg.regions = tuple(_enum(key, part.strip(), Region) for part in value.split(","))
        elif m := _SCHEMA_KEY.match(key):
            schema_codes.setdefault(m.group(1), {})[m.group(2)] = _int(key, value)
        else:
            raise ConfigError(f"{source}: unknown key '{key}'")

    if metric_overrides:
        try:
            cfg.params = MetricParams(**metric_overrides)
        except ValidationError as exc:
            raise ConfigError(f"{source}: invalid metric params: {exc}") from None
    for name, overrides in schema_codes.items():
        code_map = dict(DEFAULT_SCHEMAS[name].code_map)
        unknown = set(overrides) - set(code_map)
        if unknown:
            raise ConfigError(f"{source}: schema '{name}' has no symbol(s) {sorted(unknown)}")
        code_map.update(overrides)
        try:
            cfg.schemas[name] = LabelSchema(name, code_map)
        except LabelSchemaError as exc:
            raise ConfigError(f"{source}: {exc}") from None
    return cfg


def _schema_name(key: str, value: str) -> str:
    if value not in ("pediatric", "adult", "comparison"):
        raise ConfigError(f"{key}: expected pediatric, adult or comparison, got {value!r}")
    return value


def metric_params_config_text(params: MetricParams) -> str:
    """Render metric params in the config-file grammar (parses back equal)."""
    return (
        f"metrics.connectivity = {params.connectivity.value}\n"
        f"metrics.dilation_radius = {params.dilation_radius}\n"
        f"metrics.min_lesion_size = {params.min_lesion_size}\n"
        f"metrics.hd95_penalty = {params.hd95_penalty!r}\n"
        f"metrics.empty_pair_dice = {params.empty_pair_dice!r}\n"
        f"metrics.empty_pair_hd95 = {params.empty_pair_hd95!r}\n"
        f"metrics.percentile_method = {params.percentile_method.value}\n"
    )


def load_phantom_file(path) -> tuple[PhantomSpec, list]:
    return parse_phantom_spec(Path(path).read_text(), source=str(path))


def parse_phantom_spec(text: str, source: str = "<spec>") -> tuple[PhantomSpec, list]:
    """Parse a phantom spec file into (PhantomSpec, degradation ops)."""
    pairs = parse_kv_text(text, source)
    dims = None
    spacing = (1.0, 1.0, 1.0)
    seed = 0
    n_lesions: int | None = None
    lesion_centers: dict[int, tuple] = {}
    lesion_shells: dict[int, dict[int, ShellSpec]] = {}
    degradations: dict[int, object] = {}

    for key, value in pairs.items():
        if key == "phantom.dims":
            dims = _triple(key, value, int)
        elif key == "phantom.spacing":
            spacing = _triple(key, value, float)
        elif key == "phantom.seed":
            seed = _int(key, value)
        elif key == "phantom.n_lesions":
            n_lesions = _int(key, value)
        elif m := re.match(r"^lesion\.(\d+)\.center$", key):
            lesion_centers[int(m.group(1))] = _triple(key, value, float)
        elif m := re.match(r"^lesion\.(\d+)\.shell\.(\d+)$", key):
            lesion_shells.setdefault(int(m.group(1)), {})[int(m.group(2))] = _shell(key, value)
        elif m := re.match(r"^degrade\.(\d+)$", key):
            degradations[int(m.group(1))] = _degradation(key, value)
        else:
            raise ConfigError(f"{source}: unknown key '{key}'")

    if dims is None:
        raise ConfigError(f"{source}: phantom.dims is required")

    lesions = None
    indices = sorted(set(lesion_centers) | set(lesion_shells))
    if indices:
        if indices != list(range(1, len(indices) + 1)):
            raise ConfigError(f"{source}: lesion indices must be 1..N, got {indices}")
        lesions = []
        for i in indices:
            if i not in lesion_centers:
                raise ConfigError(f"{source}: lesion.{i}.center is missing")
            shells = lesion_shells.get(i, {})
            if sorted(shells) != list(range(1, len(shells) + 1)) or not shells:
                raise ConfigError(f"{source}: lesion.{i} shells must be numbered 1..K")
            try:
                lesions.append(
                    LesionSpec(
                        center=lesion_centers[i],
                        shells=tuple(shells[k] for k in sorted(shells)),
                    )
                )
            except ValidationError as exc:
                raise ConfigError(f"{source}: lesion.{i}: {exc}") from None
        if n_lesions is None:
            n_lesions = len(lesions)

    ops = []
    if degradations:
        order = sorted(degradations)
        if order != list(range(1, len(order) + 1)):
            raise ConfigError(f"{source}: degrade indices must be 1..N, got {order}")
        ops = [degradations[i] for i in order]

    try:
        spec = PhantomSpec(
            dims=dims,
            spacing=spacing,
            seed=seed,
            n_lesions=n_lesions or 0,
            lesions=tuple(lesions) if lesions is not None else None,
        )
    except ValidationError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return spec, ops


def _shell(key: str, value: str) -> ShellSpec:
    parts = value.split(None, 1)
    if len(parts) != 2:
        raise ConfigError(f"{key}: expected 'LABEL ax,ay,az', got {value!r}")
    label, axes = parts
    try:
        return ShellSpec(label=label, semi_axes=_triple(key, axes, float))
    except ValidationError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def _degradation(key: str, value: str):
    parts = value.split()
    if not parts:
        raise ConfigError(f"{key}: empty degradation")
    op, args = parts[0], parts[1:]
    try:
        if op == "erode" and len(args) == 2:
            return Erode(region=_enum(key, args[0], Region), radius=_int(key, args[1]))
        if op == "dilate" and len(args) == 2:
            return Dilate(region=_enum(key, args[0], Region), radius=_int(key, args[1]))
        if op == "shift" and len(args) == 2:
            return Shift(region=_enum(key, args[0], Region), offset=_triple(key, args[1], int))
        if op == "drop" and len(args) == 1:
            return DropLabel(region=_enum(key, args[0], Region))
        if op == "speckle_fp" and len(args) == 4:
            return SpeckleFp(
                region=_enum(key, args[0], Region),
                n_blobs=_int(key, args[1]),
                blob_radius=_int(key, args[2]),
                seed=_int(key, args[3]),
            )
    except ValidationError as exc:
        raise ConfigError(f"{key}: {exc}") from None
    raise ConfigError(
        f"{key}: bad op {value!r}; expected erode/dilate REGION RADIUS, shift REGION dx,dy,dz, "
        f"drop REGION, or speckle_fp REGION N_BLOBS BLOB_RADIUS SEED"
    )
