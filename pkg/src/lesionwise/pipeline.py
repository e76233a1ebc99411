"""File-level orchestration used by the HTTP service endpoints.

All functions take and return plain data (paths, reports, summaries);
errors surface as LesionwiseError subclasses with stable codes.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .config import RunConfig, load_phantom_file, load_run_config
from .errors import ConfigError, LesionwiseError, VolumeIOError
from .fusion import FusionMode, fuse, split_subregions, subregion_voxels_outside
from .labels import LabelMap
from .phantom import PhantomSpec, degrade, generate_phantom
from .report import (
    CohortReport,
    aggregate,
    cases_csv,
    cohort_csv,
    emit,
    eval_case,
    parse_cases_csv,
)
from .volume import BinaryMask, read_nifti, write_nifti

EVAL_FORMATS = ("csv", "json", "md")


@dataclass
class CaseRef:
    case_id: str
    pred_path: str
    gt_path: str


@dataclass
class CaseFailure:
    case_id: str
    error: str
    detail: str


def _load_config(config_path) -> RunConfig:
    if config_path is None:
        return RunConfig()
    try:
        return load_run_config(config_path)
    except OSError as exc:
        raise VolumeIOError(f"{config_path}: {exc}") from exc


def run_fuse(
    wt_path,
    subregions_path,
    out_path,
    mode: FusionMode | None = None,
    config_path=None,
) -> dict:
    """Fuse a whole-tumor mask file with a 3-label subregion file into one map."""
    cfg = _load_config(config_path)
    wt = BinaryMask.from_volume(read_nifti(wt_path))
    sub_map = LabelMap.from_volume(read_nifti(subregions_path), cfg.schemas["subregions"])
    triplet = split_subregions(sub_map)
    fused = fuse(wt, triplet, mode or cfg.fusion_mode, schema=cfg.schemas["pediatric"])
    write_nifti(fused.to_volume(), out_path, compress=cfg.compress)
    return {
        "out_path": str(out_path),
        "voxel_counts": fused.voxel_counts(),
        "subregion_outside_wt": subregion_voxels_outside(wt, triplet),
    }


def read_manifest(path) -> list[CaseRef]:
    """Manifest lines: ``case_id,pred_path,gt_path``; relative paths resolve
    against the manifest's directory."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise VolumeIOError(f"{path}: {exc}") from exc
    base = path.parent
    cases = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 3 or not all(parts):
            raise ConfigError(f"{path}:{lineno}: expected 'case_id,pred_path,gt_path'")
        case_id, pred, gt = parts
        cases.append(CaseRef(case_id, str(base / pred), str(base / gt)))
    if not cases:
        raise ConfigError(f"{path}: manifest lists no cases")
    return cases


def _eval_one(case: CaseRef, cfg: RunConfig):
    pred = LabelMap.from_volume(read_nifti(case.pred_path), cfg.schemas[cfg.pred_schema])
    gt = LabelMap.from_volume(read_nifti(case.gt_path), cfg.schemas[cfg.gt_schema])
    return eval_case(
        pred, gt, regions=cfg.regions, params=cfg.params, case_id=case.case_id
    )


def run_eval(
    cases: list[CaseRef],
    out_dir,
    config_path=None,
    jobs: int = 1,
    formats=EVAL_FORMATS,
) -> tuple[CohortReport | None, list[CaseFailure], list[str]]:
    """Evaluate a cohort; per-case failures are recorded and skipped."""
    cfg = _load_config(config_path)
    for fmt in formats:
        if fmt not in EVAL_FORMATS:
            raise ConfigError(f"unknown report format '{fmt}' (expected csv, json or md)")

    reports = []
    failures: list[CaseFailure] = []

    def evaluate(case: CaseRef):
        try:
            return case, _eval_one(case, cfg), None
        except LesionwiseError as exc:
            return case, None, CaseFailure(case.case_id, exc.code, str(exc))
        except OSError as exc:
            return case, None, CaseFailure(case.case_id, "io-error", str(exc))

    if jobs > 1 and len(cases) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(evaluate, cases))
    else:
        outcomes = [evaluate(c) for c in cases]
    for _, report, failure in outcomes:
        if failure is not None:
            failures.append(failure)
        else:
            reports.append(report)

    if not reports:
        return None, failures, []
    cohort = aggregate(reports)
    written = write_report_files(cohort, out_dir, formats)
    return cohort, failures, written


def write_report_files(cohort: CohortReport, out_dir, formats=EVAL_FORMATS) -> list[str]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    try:
        if "csv" in formats:
            (out_dir / "cases.csv").write_text(cases_csv(cohort))
            (out_dir / "cohort.csv").write_text(cohort_csv(cohort))
            written += [str(out_dir / "cases.csv"), str(out_dir / "cohort.csv")]
        if "json" in formats:
            (out_dir / "report.json").write_text(emit(cohort, "json"))
            written.append(str(out_dir / "report.json"))
        if "md" in formats:
            (out_dir / "report.md").write_text(emit(cohort, "markdown"))
            written.append(str(out_dir / "report.md"))
    except OSError as exc:
        raise VolumeIOError(f"{out_dir}: {exc}") from exc
    return written


def run_phantom(
    spec_path=None,
    spec: PhantomSpec | None = None,
    degradations=(),
    out_dir=".",
    compress: bool = False,
) -> dict:
    """Generate a phantom ground truth (and a degraded prediction if requested)."""
    if (spec_path is None) == (spec is None):
        raise ConfigError("provide exactly one of spec_path or an inline spec")
    if spec_path is not None:
        spec, degradations = load_phantom_file(spec_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    suffix = ".nii.gz" if compress else ".nii"

    gt = generate_phantom(spec)
    gt_path = out_dir / f"phantom_gt{suffix}"
    write_nifti(gt.to_volume(), gt_path, compress=compress)
    result = {
        "gt_path": str(gt_path),
        "pred_path": None,
        "voxel_counts": gt.voxel_counts(),
    }
    if degradations:
        pred = degrade(gt, degradations)
        pred_path = out_dir / f"phantom_pred{suffix}"
        write_nifti(pred.to_volume(), pred_path, compress=compress)
        result["pred_path"] = str(pred_path)
        result["pred_voxel_counts"] = pred.voxel_counts()
    return result


def run_reaggregate(cases_csv_path, out_dir, formats=EVAL_FORMATS) -> tuple[CohortReport, list[str]]:
    """Rebuild cohort outputs from a previously emitted per-case CSV."""
    try:
        text = Path(cases_csv_path).read_text()
    except OSError as exc:
        raise VolumeIOError(f"{cases_csv_path}: {exc}") from exc
    cohort = parse_cases_csv(text)
    written = write_report_files(cohort, out_dir, formats)
    return cohort, written
