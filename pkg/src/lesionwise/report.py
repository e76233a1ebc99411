"""Per-case and cohort evaluation reports.

A case report holds one RegionScores row per evaluated region (or an
explicit absent marker when both masks are empty for that region). The
cohort report aggregates unweighted per-region means plus an AVG column,
the row-wise mean over the region columns present.

Emission formats:

* CSV: one row per (case, region) with columns ``case_id, region, lw_dice,
  lw_hd95_mm, voxel_dice, precision, recall, n_matched, n_missed, n_fp``.
  Floats are written at full precision. Leading ``#`` comment lines carry
  the schema version, the metric parameters and the label schema, so a
  cohort can be re-aggregated from this file alone.
* JSON: the full CohortReport, versioned; parses back to an equal report.
* Markdown: the four column groups in table order (Lesion-wise Dice,
  Lesion-wise HD95 (mm), Precision, Recall); dice-like cells use three
  decimals, HD95 cells two.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from pydantic import BaseModel, Field

from .errors import InconsistentRegionsError, SchemaIncompatibleError
from .labels import (
    DEFAULT_REGIONS,
    LabelMap,
    Region,
    adult_to_comparison,
    derive_region,
    remap_to_comparison,
)
from .metrics import MetricParams, RegionScores, lesionwise_eval
from .volume import check_geometry_match

SCHEMA_VERSION = 1

CSV_COLUMNS = (
    "case_id",
    "region",
    "lw_dice",
    "lw_hd95_mm",
    "voxel_dice",
    "precision",
    "recall",
    "n_matched",
    "n_missed",
    "n_fp",
)


class RegionReport(BaseModel):
    """Scores for one region of one case; ``scores`` is None when the region
    is absent from both prediction and ground truth."""

    region: Region
    scores: RegionScores | None = None


class CaseReport(BaseModel):
    case_id: str
    schema_name: str
    regions: list[RegionReport]
    warnings: dict[str, int] = Field(default_factory=dict)
    params: MetricParams

    @property
    def region_order(self) -> tuple[Region, ...]:
        return tuple(r.region for r in self.regions)

    def scores_for(self, region: Region) -> RegionScores | None:
        for r in self.regions:
            if r.region is region:
                return r.scores
        return None


class RegionMean(BaseModel):
    """Cohort-level unweighted means for one region (None when no case has it)."""

    region: Region
    lesionwise_dice: float | None = None
    lesionwise_hd95: float | None = None
    voxel_dice: float | None = None
    voxel_precision: float | None = None
    voxel_recall: float | None = None
    n_cases: int = 0


class CohortReport(BaseModel):
    schema_version: int = SCHEMA_VERSION
    params: MetricParams
    cases: list[CaseReport]
    means: list[RegionMean]
    avg_lesionwise_dice: float | None = None
    avg_lesionwise_hd95: float | None = None


def _comparison_pair(pred: LabelMap, gt: LabelMap) -> tuple[LabelMap, LabelMap]:
    def to_comparison(m: LabelMap) -> LabelMap:
        kind = m.schema.kind
        if kind == "comparison":
            return m
        if kind == "pediatric":
            return remap_to_comparison(m)
        if kind == "adult":
            return adult_to_comparison(m)
        raise SchemaIncompatibleError(f"schema '{m.schema.name}' cannot be evaluated")

    return to_comparison(pred), to_comparison(gt)


def eval_case(
    pred: LabelMap,
    gt: LabelMap,
    regions=None,
    params: MetricParams | None = None,
    case_id: str = "case",
    n_jobs: int = 1,
    warnings: dict[str, int] | None = None,
) -> CaseReport:
    """Evaluate one prediction/ground-truth pair across the given regions.

    Maps with different label spaces are both projected into the comparison
    space first (the pediatric-to-NC remapping). Regions default to the
    table layout of the resulting label space.
    """
    params = params or MetricParams()
    check_geometry_match(pred.geometry, gt.geometry)
    if pred.schema.kind != gt.schema.kind:
        pred, gt = _comparison_pair(pred, gt)
    elif pred.schema.kind not in DEFAULT_REGIONS:
        raise SchemaIncompatibleError(
            f"schema '{pred.schema.name}' has no evaluation region set"
        )
    if regions is None:
        regions = DEFAULT_REGIONS[pred.schema.kind]
    regions = [Region(r) for r in regions]

    pred_c, gt_c = _crop_pair(pred, gt)

    def score_region(region: Region) -> RegionReport:
        pred_mask = derive_region(pred_c, region)
        gt_mask = derive_region(gt_c, region)
        if pred_mask.is_empty and gt_mask.is_empty:
            return RegionReport(region=region, scores=None)
        _, scores = lesionwise_eval(pred_mask, gt_mask, params=params)
        return RegionReport(region=region, scores=scores)

    if n_jobs > 1 and len(regions) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            reports = list(pool.map(score_region, regions))
    else:
        reports = [score_region(r) for r in regions]

    return CaseReport(
        case_id=case_id,
        schema_name=pred.schema.name,
        regions=reports,
        warnings=warnings or {},
        params=params,
    )


def _crop_pair(pred: LabelMap, gt: LabelMap) -> tuple[LabelMap, LabelMap]:
    """Crop both maps to the joint nonzero bounding box (plus margin 1).

    Everything outside is background on both sides, so all scores are
    unchanged while component labeling and distance transforms run on a
    fraction of the grid.
    """
    either = (pred.data != 0) | (gt.data != 0)
    slices = []
    for axis in range(3):
        other = tuple(i for i in range(3) if i != axis)
        hit = np.flatnonzero(either.any(axis=other))
        if hit.size == 0:
            return pred, gt
        slices.append(
            slice(max(int(hit[0]) - 1, 0), min(int(hit[-1]) + 2, pred.data.shape[axis]))
        )
    window = tuple(slices)
    offset = tuple(s.start for s in window)
    dims = tuple(s.stop - s.start for s in window)
    geometry = pred.geometry.translated(offset).with_dims(dims)
    pred_crop = LabelMap(geometry, pred.data[window], pred.schema)
    gt_geometry = gt.geometry.translated(offset).with_dims(dims)
    gt_crop = LabelMap(gt_geometry, gt.data[window], gt.schema)
    return pred_crop, gt_crop


def aggregate(reports: list[CaseReport]) -> CohortReport:
    """Cohort report from per-case reports (sorted by case id, unweighted means)."""
    if not reports:
        raise InconsistentRegionsError("cannot aggregate an empty cohort")
    order = reports[0].region_order
    params = reports[0].params
    for r in reports[1:]:
        if r.region_order != order:
            raise InconsistentRegionsError(
                f"case '{r.case_id}' region set {r.region_order} differs from {order}"
            )
        if r.params != params:
            raise InconsistentRegionsError(f"case '{r.case_id}' used different metric params")
    cases = sorted(reports, key=lambda r: r.case_id)

    means: list[RegionMean] = []
    for region in order:
        rows = [c.scores_for(region) for c in cases]
        rows = [s for s in rows if s is not None]
        if not rows:
            means.append(RegionMean(region=region))
            continue
        n = len(rows)
        means.append(
            RegionMean(
                region=region,
                lesionwise_dice=sum(s.lesionwise_dice for s in rows) / n,
                lesionwise_hd95=sum(s.lesionwise_hd95 for s in rows) / n,
                voxel_dice=sum(s.voxel_dice for s in rows) / n,
                voxel_precision=sum(s.voxel_precision for s in rows) / n,
                voxel_recall=sum(s.voxel_recall for s in rows) / n,
                n_cases=n,
            )
        )

    dice_cols = [m.lesionwise_dice for m in means if m.lesionwise_dice is not None]
    hd95_cols = [m.lesionwise_hd95 for m in means if m.lesionwise_hd95 is not None]
    return CohortReport(
        params=params,
        cases=cases,
        means=means,
        avg_lesionwise_dice=sum(dice_cols) / len(dice_cols) if dice_cols else None,
        avg_lesionwise_hd95=sum(hd95_cols) / len(hd95_cols) if hd95_cols else None,
    )


def emit(report: CohortReport, fmt: str) -> str:
    """Render a cohort report as 'csv' (per-case rows), 'json' or 'markdown'."""
    fmt = fmt.lower()
    if fmt == "csv":
        return cases_csv(report)
    if fmt == "json":
        return report.model_dump_json(indent=2)
    if fmt in ("markdown", "md"):
        return markdown_table(report)
    raise ValueError(f"unknown report format '{fmt}'")


def _fnum(value: float | None) -> str:
    return "" if value is None else repr(float(value))


def cases_csv(report: CohortReport) -> str:
    """Per-case CSV rows at full float precision, with provenance comments."""
    out = io.StringIO()
    schema_name = report.cases[0].schema_name if report.cases else ""
    out.write(f"# schema_version: {report.schema_version}\n")
    out.write(f"# schema: {schema_name}\n")
    out.write(f"# params: {report.params.model_dump_json()}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for case in report.cases:
        for row in case.regions:
            s = row.scores
            if s is None:
                writer.writerow([case.case_id, row.region.value] + [""] * 8)
            else:
                writer.writerow(
                    [
                        case.case_id,
                        row.region.value,
                        _fnum(s.lesionwise_dice),
                        _fnum(s.lesionwise_hd95),
                        _fnum(s.voxel_dice),
                        _fnum(s.voxel_precision),
                        _fnum(s.voxel_recall),
                        s.n_matched,
                        s.n_missed,
                        s.n_false_positive,
                    ]
                )
    return out.getvalue()


def cohort_csv(report: CohortReport) -> str:
    """Cohort mean rows (one per region plus AVG) at full float precision."""
    out = io.StringIO()
    out.write(f"# schema_version: {report.schema_version}\n")
    out.write(f"# params: {report.params.model_dump_json()}\n")
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["region", "lw_dice", "lw_hd95_mm", "voxel_dice", "precision", "recall", "n_cases"])
    for m in report.means:
        writer.writerow(
            [
                m.region.value,
                _fnum(m.lesionwise_dice),
                _fnum(m.lesionwise_hd95),
                _fnum(m.voxel_dice),
                _fnum(m.voxel_precision),
                _fnum(m.voxel_recall),
                m.n_cases,
            ]
        )
    writer.writerow(
        ["AVG", _fnum(report.avg_lesionwise_dice), _fnum(report.avg_lesionwise_hd95), "", "", "", ""]
    )
    return out.getvalue()


def parse_cases_csv(text: str) -> CohortReport:
    """Rebuild a cohort report from a per-case CSV emitted by cases_csv."""
    params = MetricParams()
    schema_name = ""
    rows = []
    for line in text.splitlines():
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("params:"):
                params = MetricParams.model_validate_json(body.split(":", 1)[1].strip())
            elif body.startswith("schema:"):
                schema_name = body.split(":", 1)[1].strip()
            continue
        if line.strip():
            rows.append(line)
    reader = csv.reader(rows)
    header = next(reader, None)
    if header is None or tuple(header) != CSV_COLUMNS:
        raise InconsistentRegionsError(f"unexpected CSV header {header}")
    per_case: dict[str, list[RegionReport]] = {}
    for rec in reader:
        case_id, region_name = rec[0], rec[1]
        if rec[2] == "":
            scores = None
        else:
            scores = RegionScores(
                lesionwise_dice=float(rec[2]),
                lesionwise_hd95=float(rec[3]),
                voxel_dice=float(rec[4]),
                voxel_precision=float(rec[5]),
                voxel_recall=float(rec[6]),
                n_matched=int(rec[7]),
                n_missed=int(rec[8]),
                n_false_positive=int(rec[9]),
            )
        per_case.setdefault(case_id, []).append(RegionReport(region=Region(region_name), scores=scores))
    reports = [
        CaseReport(case_id=cid, schema_name=schema_name, regions=regions, params=params)
        for cid, regions in per_case.items()
    ]
    return aggregate(reports)


def parse_json(text: str) -> CohortReport:
    return CohortReport.model_validate_json(text)


_COMPARISON_SET = frozenset(DEFAULT_REGIONS["comparison"])


def markdown_table(report: CohortReport) -> str:
    """Cohort table with the column groups ordered as in the standard layout."""
    regions = [m.region for m in report.means]
    with_avg = frozenset(regions) == _COMPARISON_SET
    n = len(regions) + (1 if with_avg else 0)
    pr_regions = [r for r in (Region.WT, Region.TC) if r in regions]
    if not pr_regions:
        pr_regions = regions[:1]
    k = len(pr_regions)

    group_row = (
        [""]
        + ["Lesion-wise Dice Scores"] + [""] * (n - 1)
        + ["Lesion-wise HD95 (mm)"] + [""] * (n - 1)
        + ["Precision"] + [""] * (k - 1)
        + ["Recall"] + [""] * (k - 1)
    )
    name_row = (
        ["Case"]
        + [r.value for r in regions] + (["AVG"] if with_avg else [])
        + [r.value for r in regions] + (["AVG"] if with_avg else [])
        + [r.value for r in pr_regions]
        + [r.value for r in pr_regions]
    )

    def fmt3(v):
        return "" if v is None else f"{v:.3f}"

    def fmt2(v):
        return "" if v is None else f"{v:.2f}"

    def case_row(case: CaseReport) -> list[str]:
        by_region = {r.region: r.scores for r in case.regions}
        dices = [by_region[r] for r in regions]
        row = [case.case_id]
        dice_vals = [None if s is None else s.lesionwise_dice for s in dices]
        hd_vals = [None if s is None else s.lesionwise_hd95 for s in dices]
        if with_avg:
            present_d = [v for v in dice_vals if v is not None]
            present_h = [v for v in hd_vals if v is not None]
            dice_vals = dice_vals + [sum(present_d) / len(present_d) if present_d else None]
            hd_vals = hd_vals + [sum(present_h) / len(present_h) if present_h else None]
        row += [fmt3(v) for v in dice_vals]
        row += [fmt2(v) for v in hd_vals]
        row += [fmt3(None if by_region[r] is None else by_region[r].voxel_precision) for r in pr_regions]
        row += [fmt3(None if by_region[r] is None else by_region[r].voxel_recall) for r in pr_regions]
        return row

    mean_by_region = {m.region: m for m in report.means}
    dice_means = [mean_by_region[r].lesionwise_dice for r in regions]
    hd_means = [mean_by_region[r].lesionwise_hd95 for r in regions]
    if with_avg:
        dice_means = dice_means + [report.avg_lesionwise_dice]
        hd_means = hd_means + [report.avg_lesionwise_hd95]
    mean_row = (
        ["cohort-mean"]
        + [fmt3(v) for v in dice_means]
        + [fmt2(v) for v in hd_means]
        + [fmt3(mean_by_region[r].voxel_precision) for r in pr_regions]
        + [fmt3(mean_by_region[r].voxel_recall) for r in pr_regions]
    )

    lines = [
        "| " + " | ".join(group_row) + " |",
        "|" + "|".join([" --- "] * len(group_row)) + "|",
        "| " + " | ".join(name_row) + " |",
    ]
    for case in report.cases:
        lines.append("| " + " | ".join(case_row(case)) + " |")
    lines.append("| " + " | ".join(mean_row) + " |")
    params_note = json.loads(report.params.model_dump_json())
    lines.append("")
    lines.append(f"Protocol parameters: `{json.dumps(params_note, sort_keys=True)}`")
    return "\n".join(lines) + "\n"
