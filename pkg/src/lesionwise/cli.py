"""Command-line client for the lesionwise service.

The CLI is a thin HTTP client: every subcommand builds a request and sends
it to the service. By default the service app runs in-process (no server
needed); pass ``--server URL`` or set ``LESIONWISE_SERVER`` to target a
running instance instead (which must share the filesystem, since requests
carry paths).

Exit codes: 0 success, 1 partial cohort failure, 2 usage or input error.
Errors print one machine-parsable line: ``error: <code>: <detail>``.
"""

from __future__ import annotations

import argparse
import asyncio
import os
import sys
from pathlib import Path

import httpx


def _send(server: str | None, method: str, path: str, body: dict | None = None):
    """POST/GET against a remote server or the in-process service app."""
    if server:
        try:
            with httpx.Client(base_url=server, timeout=None) as client:
                response = client.request(method, path, json=body)
                return response.status_code, response.json()
        except httpx.HTTPError as exc:
            return None, {"error": "io-error", "detail": f"server {server}: {exc}"}
        except ValueError as exc:
            return None, {"error": "io-error", "detail": f"server {server}: bad response ({exc})"}

    from .service.app import create_app

    transport = httpx.ASGITransport(app=create_app())

    async def call():
        async with httpx.AsyncClient(transport=transport, base_url="http://service", timeout=None) as client:
            response = await client.request(method, path, json=body)
            return response.status_code, response.json()

    return asyncio.run(call())


def _fail(payload: dict) -> int:
    if "error" in payload:
        code = payload["error"]
        detail = payload.get("detail", "")
    else:
        # Request-validation failures arrive as {"detail": [...]}.
        code = "bad-request"
        detail = str(payload.get("detail", payload))
    print(f"error: {code}: {detail}", file=sys.stderr)
    return 2


def _case_stem(path: str) -> str:
    name = Path(path).name
    for suffix in (".gz", ".nii"):
        if name.endswith(suffix):
            name = name[: -len(suffix)]
    return name


def cmd_fuse(args) -> int:
    body = {
        "wt_path": str(Path(args.wt).resolve()),
        "subregions_path": str(Path(args.subregions).resolve()),
        "out_path": str(Path(args.out).resolve()),
        "mode": args.mode,
        "config_path": str(Path(args.config).resolve()) if args.config else None,
    }
    status, payload = _send(args.server, "POST", "/fuse", body)
    if status != 200:
        return _fail(payload)
    counts = " ".join(f"{k}={v}" for k, v in payload["voxel_counts"].items())
    print(f"fused {payload['out_path']} {counts} subregion_outside_wt={payload['subregion_outside_wt']}")
    return 0


def cmd_eval(args) -> int:
    if args.manifest and (args.pred or args.gt):
        print("error: config-error: use either --manifest or --pred/--gt, not both", file=sys.stderr)
        return 2
    body = {
        "out_dir": str(Path(args.out).resolve()),
        "config_path": str(Path(args.config).resolve()) if args.config else None,
        "jobs": args.jobs,
        "formats": args.format,
    }
    if args.manifest:
        body["manifest_path"] = str(Path(args.manifest).resolve())
    else:
        if not args.pred or len(args.pred) != len(args.gt or []):
            print("error: config-error: --pred and --gt must pair up (or use --manifest)", file=sys.stderr)
            return 2
        ids = args.case_id or [_case_stem(p) for p in args.pred]
        if len(ids) != len(args.pred):
            print("error: config-error: --case-id count must match --pred", file=sys.stderr)
            return 2
        body["cases"] = [
            {"case_id": cid, "pred_path": str(Path(p).resolve()), "gt_path": str(Path(g).resolve())}
            for cid, p, g in zip(ids, args.pred, args.gt)
        ]
    status, payload = _send(args.server, "POST", "/eval", body)
    if status != 200:
        return _fail(payload)
    for failure in payload["failures"]:
        print(
            f"error-case: {failure['case_id']}: {failure['error']}: {failure['detail']}",
            file=sys.stderr,
        )
    cohort = payload["cohort"]
    if cohort is not None:
        n = len(cohort["cases"])
        avg_d = cohort["avg_lesionwise_dice"]
        avg_h = cohort["avg_lesionwise_hd95"]
        avg = ""
        if avg_d is not None and avg_h is not None:
            avg = f" avg_lw_dice={avg_d:.3f} avg_lw_hd95={avg_h:.2f}"
        print(f"evaluated {n} case(s){avg}")
        for path in payload["written"]:
            print(f"wrote {path}")
    return 1 if payload["failures"] else 0


def cmd_phantom(args) -> int:
    body = {
        "spec_path": str(Path(args.spec).resolve()),
        "out_dir": str(Path(args.out).resolve()),
        "compress": args.compress,
    }
    status, payload = _send(args.server, "POST", "/phantom", body)
    if status != 200:
        return _fail(payload)
    counts = " ".join(f"{k}={v}" for k, v in payload["voxel_counts"].items())
    print(f"wrote {payload['gt_path']} {counts}")
    if payload["pred_path"]:
        print(f"wrote {payload['pred_path']}")
    return 0


def cmd_report(args) -> int:
    body = {
        "cases_csv_path": str(Path(args.cases_csv).resolve()),
        "out_dir": str(Path(args.out).resolve()),
        "formats": args.format,
    }
    status, payload = _send(args.server, "POST", "/report", body)
    if status != 200:
        return _fail(payload)
    for path in payload["written"]:
        print(f"wrote {path}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


def _formats(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lesionwise",
        description="Whole-tumor residual label fusion and lesion-wise evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    default_server = os.environ.get("LESIONWISE_SERVER") or None

    def add_server(p):
        p.add_argument("--server", default=default_server,
                       help="service URL (default: run the service in-process)")

    p = sub.add_parser("fuse", help="fuse a whole-tumor mask with a 3-label subregion map")
    p.add_argument("wt", help="whole-tumor binary mask NIfTI")
    p.add_argument("subregions", help="3-label (ET/CC/ED) NIfTI")
    p.add_argument("out", help="output fused NIfTI path")
    p.add_argument("--mode", choices=["strict", "union"], default=None)
    p.add_argument("--config", default=None)
    add_server(p)
    p.set_defaults(handler=cmd_fuse)

    p = sub.add_parser("eval", help="evaluate prediction/ground-truth pairs")
    p.add_argument("--manifest", default=None, help="CSV manifest: case_id,pred_path,gt_path")
    p.add_argument("--pred", action="append", default=None, help="prediction NIfTI (repeatable)")
    p.add_argument("--gt", action="append", default=None, help="ground-truth NIfTI (repeatable)")
    p.add_argument("--case-id", action="append", default=None, help="case id per --pred (repeatable)")
    p.add_argument("--out", required=True, help="output directory for reports")
    p.add_argument("--config", default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--format", type=_formats, default=["csv", "json", "md"],
                   help="comma list of csv,json,md (default all)")
    add_server(p)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("phantom", help="generate a synthetic phantom from a spec file")
    p.add_argument("spec", help="phantom spec file")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--compress", action="store_true")
    add_server(p)
    p.set_defaults(handler=cmd_phantom)

    p = sub.add_parser("report", help="re-aggregate cohort outputs from a per-case CSV")
    p.add_argument("cases_csv", help="cases.csv emitted by eval")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--format", type=_formats, default=["csv", "json", "md"])
    add_server(p)
    p.set_defaults(handler=cmd_report)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(handler=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
