from __future__ import annotations

import numpy as np
import pytest
from fastapi.testclient import TestClient

from lesionwise import (
    PhantomSpec,
    decompose,
    generate_phantom,
    read_nifti,
    write_nifti,
)
from lesionwise.labels import SUBREGIONS, PEDIATRIC, LabelMap
from lesionwise.report import parse_json
from lesionwise.service.app import create_app


@pytest.fixture()
def client():
    return TestClient(create_app())


def write_phantom_pair(tmp_path, seed=0, dims=(40, 40, 32)):
    """Write a phantom gt and matching wt + subregion files; returns paths."""
    gt = generate_phantom(PhantomSpec(dims=dims, n_lesions=2, seed=seed))
    gt_path = tmp_path / f"gt{seed}.nii.gz"
    write_nifti(gt.to_volume(), gt_path)
    wt, trip = decompose(gt)
    wt_path = tmp_path / f"wt{seed}.nii.gz"
    write_nifti(wt.to_volume(), wt_path)
    sub = np.zeros(dims, dtype=np.uint8)
    sub[trip.et.data] = SUBREGIONS.code("ET")
    sub[trip.cc.data] = SUBREGIONS.code("CC")
    sub[trip.ed.data] = SUBREGIONS.code("ED")
    sub_path = tmp_path / f"sub{seed}.nii.gz"
    write_nifti(LabelMap(gt.geometry, sub, SUBREGIONS).to_volume(), sub_path)
    return gt, gt_path, wt_path, sub_path


def test_health_and_defaults(client):
    assert client.get("/health").json()["status"] == "ok"
    defaults = client.get("/defaults").json()
    assert defaults["params"]["hd95_penalty"] == 374.0
    assert defaults["schemas"]["pediatric"] == {"ET": 1, "NET": 2, "CC": 3, "ED": 4}
    assert defaults["fusion_mode"] == "strict"


def test_fuse_endpoint_round_trip(client, tmp_path):
    gt, _, wt_path, sub_path = write_phantom_pair(tmp_path, seed=1)
    out_path = tmp_path / "fused.nii.gz"
    resp = client.post(
        "/fuse",
        json={"wt_path": str(wt_path), "subregions_path": str(sub_path), "out_path": str(out_path)},
    )
    assert resp.status_code == 200
    body = resp.json()
    assert body["subregion_outside_wt"] == 0
    fused = read_nifti(out_path)
    assert np.array_equal(fused.data, gt.data)
    assert body["voxel_counts"] == gt.voxel_counts()


def test_fuse_geometry_mismatch_maps_to_422(client, tmp_path):
    _, _, wt_path, _ = write_phantom_pair(tmp_path, seed=2)
    _, _, _, sub_path = write_phantom_pair(tmp_path, seed=3, dims=(30, 30, 24))
    resp = client.post(
        "/fuse",
        json={
            "wt_path": str(wt_path),
            "subregions_path": str(sub_path),
            "out_path": str(tmp_path / "x.nii"),
        },
    )
    assert resp.status_code == 422
    assert resp.json()["error"] == "geometry-mismatch"


def test_eval_endpoint_with_inline_cases(client, tmp_path):
    gt, gt_path, _, _ = write_phantom_pair(tmp_path, seed=4)
    out_dir = tmp_path / "out"
    resp = client.post(
        "/eval",
        json={
            "cases": [{"case_id": "c1", "pred_path": str(gt_path), "gt_path": str(gt_path)}],
            "out_dir": str(out_dir),
        },
    )
    assert resp.status_code == 200
    body = resp.json()
    assert body["failures"] == []
    cohort = parse_json((out_dir / "report.json").read_text())
    assert cohort.avg_lesionwise_dice == 1.0
    assert {p.split("/")[-1] for p in body["written"]} == {
        "cases.csv", "cohort.csv", "report.json", "report.md",
    }


def test_eval_endpoint_partial_failure(client, tmp_path):
    _, gt_path, _, _ = write_phantom_pair(tmp_path, seed=5)
    resp = client.post(
        "/eval",
        json={
            "cases": [
                {"case_id": "ok", "pred_path": str(gt_path), "gt_path": str(gt_path)},
                {"case_id": "bad", "pred_path": str(tmp_path / "missing.nii"), "gt_path": str(gt_path)},
            ],
            "out_dir": str(tmp_path / "out2"),
        },
    )
    assert resp.status_code == 200
    body = resp.json()
    assert len(body["failures"]) == 1
    assert body["failures"][0]["case_id"] == "bad"
    assert len(body["cohort"]["cases"]) == 1


def test_eval_requires_exactly_one_source(client, tmp_path):
    resp = client.post("/eval", json={"out_dir": str(tmp_path)})
    assert resp.status_code == 422


def test_phantom_endpoint_inline_spec(client, tmp_path):
    resp = client.post(
        "/phantom",
        json={
            "spec": {"dims": [24, 24, 20], "n_lesions": 1, "seed": 8},
            "degradations": [{"op": "drop", "region": "ED"}],
            "out_dir": str(tmp_path),
        },
    )
    assert resp.status_code == 200
    body = resp.json()
    gt = read_nifti(body["gt_path"])
    assert gt.data.any()
    pred = read_nifti(body["pred_path"])
    assert not (pred.data == PEDIATRIC.code("ED")).any()
    assert body["pred_voxel_counts"]["ED"] == 0


def test_phantom_endpoint_spec_file(client, tmp_path):
    spec_path = tmp_path / "spec.cfg"
    spec_path.write_text(
        "phantom.dims = 20,20,16\n"
        "lesion.1.center = 10,10,8\n"
        "lesion.1.shell.1 = NET 5,5,4\n"
    )
    resp = client.post("/phantom", json={"spec_path": str(spec_path), "out_dir": str(tmp_path / "p")})
    assert resp.status_code == 200
    counts = resp.json()["voxel_counts"]
    assert counts["NET"] > 0 and counts["ET"] == 0


def test_phantom_bad_spec_maps_to_422(client, tmp_path):
    spec_path = tmp_path / "bad.cfg"
    spec_path.write_text("phantom.wibble = 1\n")
    resp = client.post("/phantom", json={"spec_path": str(spec_path), "out_dir": str(tmp_path)})
    assert resp.status_code == 422
    assert resp.json()["error"] == "config-error"


def test_report_endpoint_reaggregates(client, tmp_path):
    _, gt_path, _, _ = write_phantom_pair(tmp_path, seed=6)
    out_dir = tmp_path / "out3"
    client.post(
        "/eval",
        json={
            "cases": [{"case_id": "c", "pred_path": str(gt_path), "gt_path": str(gt_path)}],
            "out_dir": str(out_dir),
        },
    )
    redo_dir = tmp_path / "redo"
    resp = client.post(
        "/report",
        json={"cases_csv_path": str(out_dir / "cases.csv"), "out_dir": str(redo_dir)},
    )
    assert resp.status_code == 200
    original = parse_json((out_dir / "report.json").read_text())
    rebuilt = parse_json((redo_dir / "report.json").read_text())
    assert rebuilt.means == original.means
    assert rebuilt.avg_lesionwise_hd95 == original.avg_lesionwise_hd95
