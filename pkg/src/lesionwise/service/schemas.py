"""Pydantic request/response models of the HTTP service.

All paths are interpreted on the server's filesystem; the bundled CLI runs
the service in-process by default, so paths behave like local CLI paths.
"""

from __future__ import annotations

from pydantic import BaseModel, Field, model_validator

from ..fusion import FusionMode
from ..metrics import MetricParams
from ..phantom import DegradationOp, PhantomSpec
from ..report import CohortReport


class HealthResponse(BaseModel):
    status: str
    version: str


class DefaultsResponse(BaseModel):
    params: MetricParams
    schemas: dict[str, dict[str, int]]
    fusion_mode: FusionMode


class ErrorResponse(BaseModel):
    error: str
    detail: str


class FuseRequest(BaseModel):
    wt_path: str
    subregions_path: str
    out_path: str
    mode: FusionMode | None = None
    config_path: str | None = None


class FuseResponse(BaseModel):
    out_path: str
    voxel_counts: dict[str, int]
    subregion_outside_wt: int


class EvalCaseRef(BaseModel):
    case_id: str
    pred_path: str
    gt_path: str


class EvalRequest(BaseModel):
    cases: list[EvalCaseRef] | None = None
    manifest_path: str | None = None
    out_dir: str
    config_path: str | None = None
    jobs: int = Field(default=1, ge=1)
    formats: list[str] = Field(default_factory=lambda: ["csv", "json", "md"])

    @model_validator(mode="after")
    def _one_source(self):
        if (self.cases is None) == (self.manifest_path is None):
            raise ValueError("provide exactly one of cases or manifest_path")
        if self.cases is not None and not self.cases:
            raise ValueError("cases must not be empty")
        return self


class CaseFailureModel(BaseModel):
    case_id: str
    error: str
    detail: str


class EvalResponse(BaseModel):
    cohort: CohortReport | None
    failures: list[CaseFailureModel]
    written: list[str]


class PhantomRequest(BaseModel):
    spec_path: str | None = None
    spec: PhantomSpec | None = None
    degradations: list[DegradationOp] = Field(default_factory=list)
    out_dir: str
    compress: bool = False

    @model_validator(mode="after")
    def _one_source(self):
        if (self.spec_path is None) == (self.spec is None):
            raise ValueError("provide exactly one of spec_path or spec")
        if self.spec_path is not None and self.degradations:
            raise ValueError("inline degradations only combine with an inline spec")
        return self


class PhantomResponse(BaseModel):
    gt_path: str
    pred_path: str | None = None
    voxel_counts: dict[str, int]
    pred_voxel_counts: dict[str, int] | None = None


class ReaggregateRequest(BaseModel):
    cases_csv_path: str
    out_dir: str
    formats: list[str] = Field(default_factory=lambda: ["csv", "json", "md"])


class ReaggregateResponse(BaseModel):
    cohort: CohortReport
    written: list[str]
