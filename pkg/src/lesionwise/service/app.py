"""FastAPI service exposing fuse / eval / phantom / report over HTTP.

Domain errors map to HTTP 422 with a stable ``error`` code; per-case
evaluation failures are not HTTP errors and come back in the response body.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..config import RunConfig
from ..errors import LesionwiseError
from ..pipeline import CaseRef, run_eval, run_fuse, run_phantom, run_reaggregate, read_manifest
from . import schemas


def create_app() -> FastAPI:
    app = FastAPI(title="lesionwise", version=__version__)

    @app.exception_handler(LesionwiseError)
    def _domain_error(request: Request, exc: LesionwiseError):
        return JSONResponse(status_code=422, content={"error": exc.code, "detail": str(exc)})

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.get("/defaults", response_model=schemas.DefaultsResponse)
    def defaults():
        cfg = RunConfig()
        return schemas.DefaultsResponse(
            params=cfg.params,
            schemas={name: dict(s.code_map) for name, s in cfg.schemas.items()},
            fusion_mode=cfg.fusion_mode,
        )

    @app.post("/fuse", response_model=schemas.FuseResponse, responses={422: {"model": schemas.ErrorResponse}})
    def fuse_endpoint(req: schemas.FuseRequest):
        summary = run_fuse(
            req.wt_path, req.subregions_path, req.out_path,
            mode=req.mode, config_path=req.config_path,
        )
        return schemas.FuseResponse(**summary)

    @app.post("/eval", response_model=schemas.EvalResponse, responses={422: {"model": schemas.ErrorResponse}})
    def eval_endpoint(req: schemas.EvalRequest):
        if req.manifest_path is not None:
            cases = read_manifest(req.manifest_path)
        else:
            cases = [CaseRef(c.case_id, c.pred_path, c.gt_path) for c in req.cases]
        cohort, failures, written = run_eval(
            cases, req.out_dir, config_path=req.config_path, jobs=req.jobs, formats=tuple(req.formats)
        )
        return schemas.EvalResponse(
            cohort=cohort,
            failures=[schemas.CaseFailureModel(case_id=f.case_id, error=f.error, detail=f.detail) for f in failures],
            written=written,
        )

    @app.post("/phantom", response_model=schemas.PhantomResponse, responses={422: {"model": schemas.ErrorResponse}})
    def phantom_endpoint(req: schemas.PhantomRequest):
        result = run_phantom(
            spec_path=req.spec_path,
            spec=req.spec,
            degradations=req.degradations,
            out_dir=req.out_dir,
            compress=req.compress,
        )
        return schemas.PhantomResponse(**result)

    @app.post("/report", response_model=schemas.ReaggregateResponse, responses={422: {"model": schemas.ErrorResponse}})
    def report_endpoint(req: schemas.ReaggregateRequest):
        cohort, written = run_reaggregate(req.cases_csv_path, req.out_dir, formats=tuple(req.formats))
        return schemas.ReaggregateResponse(cohort=cohort, written=written)

    return app
