"""HTTP service: endpoint behavior and error mapping."""

from __future__ import annotations

import base64
import json

import pytest
from fastapi.testclient import TestClient

from fixture_tools import bundle, manifest_row, write_manifest_file, write_pgm
from textgate.service import create_app


@pytest.fixture()
def client():
    with TestClient(create_app()) as c:
        yield c


def b64_pgm(tmp_path, name="m.pgm", squares=((8, 20),), side=32):
    path = tmp_path / name
    write_pgm(path, side=side, squares=squares)
    return base64.b64encode(path.read_bytes()).decode("ascii")


def test_healthz(client):
    resp = client.get("/healthz")
    assert resp.status_code == 200
    assert resp.json()["status"] == "ok"


# --------------------------------------------------------------------------- #
# /localize

def test_localize_finds_block(client, tmp_path):
    resp = client.post("/localize", json={"mask_pgm_b64": b64_pgm(tmp_path)})
    assert resp.status_code == 200
    body = resp.json()
    assert body["width"] == 32 and body["height"] == 32
    (block,) = body["blocks"]
    assert block["rank"] == 0
    assert (block["x_min"], block["y_min"]) == (3, 3)  # 8 - padding 5
    assert (block["x_max"], block["y_max"]) == (25, 25)


def test_localize_empty_mask_gives_no_blocks(client, tmp_path):
    resp = client.post("/localize",
                       json={"mask_pgm_b64": b64_pgm(tmp_path, squares=())})
    assert resp.status_code == 200
    assert resp.json()["blocks"] == []


def test_localize_rejects_bad_base64(client):
    resp = client.post("/localize", json={"mask_pgm_b64": "@@not-base64@@"})
    assert resp.status_code == 400
    assert resp.json()["detail"]["kind"] == "validation"


def test_localize_rejects_truncated_pgm(client):
    payload = base64.b64encode(b"P5\n9 9\n255\nxx").decode()
    resp = client.post("/localize", json={"mask_pgm_b64": payload})
    assert resp.status_code == 400
    assert "truncated" in resp.json()["detail"]["message"]


def test_localize_rejects_bad_config(client, tmp_path):
    resp = client.post("/localize", json={"mask_pgm_b64": b64_pgm(tmp_path),
                                          "padding": -2})
    assert resp.status_code == 400


def test_unknown_request_field_is_422(client, tmp_path):
    resp = client.post("/localize", json={"mask_pgm_b64": b64_pgm(tmp_path),
                                          "paddding": 3})
    assert resp.status_code == 422


# --------------------------------------------------------------------------- #
# /score

def test_score_toy_identical_texts_confident(client):
    resp = client.post("/score", json={"t1": "exit", "t2": "exit",
                                       "t3": "exit"})
    assert resp.status_code == 200
    body = resp.json()
    assert body["breakdown"]["confidence"] == 1.0
    assert body["decision"] == {"outcome": "confident", "final_text": "exit"}


def test_score_replay_embeddings(client):
    resp = client.post("/score", json={
        "t1": "exit", "t2": "door sign", "t3": "uxit",
        "embedder": "replay",
        "embeddings": {"exit": [1.0, 0.0], "door sign": [1.0, 0.0],
                       "uxit": [0.0, 1.0]},
    })
    assert resp.status_code == 200
    body = resp.json()
    assert body["breakdown"]["s1"] == 1.0
    assert body["breakdown"]["s3"] == 0.0
    assert body["breakdown"]["selected"] == "t1"


def test_score_replay_missing_text_is_adapter_error(client):
    resp = client.post("/score", json={
        "t1": "exit", "t2": "door", "t3": "exit",
        "embedder": "replay", "embeddings": {"exit": [1.0]},
    })
    assert resp.status_code == 502
    assert resp.json()["detail"]["kind"] == "adapter"


def test_score_replay_without_embeddings_is_validation_error(client):
    resp = client.post("/score", json={"t1": "a", "t2": "b", "t3": "c",
                                       "embedder": "replay"})
    assert resp.status_code == 400


def test_score_rejects_bad_weights(client):
    resp = client.post("/score", json={"t1": "a", "t2": "b", "t3": "c",
                                       "alpha": 0.9, "beta": 0.4})
    assert resp.status_code == 400


# --------------------------------------------------------------------------- #
# /run

def run_payload(tmp_path, **overrides):
    rows = [manifest_row(tmp_path, "good", bundle("exit")),
            manifest_row(tmp_path, "weak",
                         {"t1": "qq vv", "t2": "blue tarp on a fence",
                          "t3_by_rank": ["zzzz"], "fallback_text": "push"},
                         ground_truth=("push",))]
    manifest = write_manifest_file(tmp_path, rows)
    payload = {"manifest_path": str(manifest)}
    payload.update(overrides)
    return payload


def test_run_reports_metrics_and_writes_files(client, tmp_path):
    out = tmp_path / "out"
    resp = client.post("/run", json=run_payload(tmp_path, out_dir=str(out)))
    assert resp.status_code == 200
    body = resp.json()
    assert body["images"] == 2 and body["failed_images"] == 0
    assert body["metrics"]["accuracy"] == 1.0
    assert body["metrics"]["cbr"] == 1 and body["metrics"]["fallbacks"] == 1
    assert (out / "trace.jsonl").exists()
    assert (out / "metrics.jsonl").exists()
    resolved = json.loads((out / "config.resolved.json").read_text())
    assert resolved["tau"] == 0.8 and resolved["command"] == "run"
    assert len((out / "trace.jsonl").read_text().splitlines()) == 2


def test_run_is_byte_identical_across_invocations(client, tmp_path):
    payload = run_payload(tmp_path)
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    client.post("/run", json=dict(payload, out_dir=str(out1)))
    client.post("/run", json=dict(payload, out_dir=str(out2)))
    assert (out1 / "trace.jsonl").read_bytes() == \
        (out2 / "trace.jsonl").read_bytes()
    assert (out1 / "metrics.jsonl").read_bytes() == \
        (out2 / "metrics.jsonl").read_bytes()


def test_run_missing_manifest_is_400(client, tmp_path):
    resp = client.post("/run",
                       json={"manifest_path": str(tmp_path / "nope.jsonl")})
    assert resp.status_code == 400
    assert resp.json()["detail"]["kind"] == "io"


def test_run_remote_backend_requires_endpoint(client, tmp_path):
    resp = client.post("/run", json=run_payload(tmp_path, backend="remote"))
    assert resp.status_code == 400


def test_run_keeps_going_past_broken_image(client, tmp_path):
    rows = [manifest_row(tmp_path, "broken", None),
            manifest_row(tmp_path, "good", bundle("exit"))]
    manifest = write_manifest_file(tmp_path, rows)
    resp = client.post("/run", json={"manifest_path": str(manifest)})
    assert resp.status_code == 200
    assert resp.json()["failed_images"] == 1


# --------------------------------------------------------------------------- #
# /ablate and /scenarios

def test_ablate_rows(client, tmp_path):
    payload = run_payload(tmp_path)
    payload["grid"] = [[0.6, 0.4, 0.75], [0.6, 0.4, 0.85]]
    resp = client.post("/ablate", json=payload)
    assert resp.status_code == 200
    rows = resp.json()["rows"]
    assert [r["tau"] for r in rows] == [0.75, 0.85]
    assert rows[0]["fallbacks"] <= rows[1]["fallbacks"]


def test_scenarios_none_all_fallback(client, tmp_path):
    rows = [manifest_row(tmp_path, f"img{i}", bundle("exit"))
            for i in range(3)]
    manifest = write_manifest_file(tmp_path, rows)
    resp = client.post("/scenarios", json={"manifest_path": str(manifest),
                                           "scenario": "none"})
    assert resp.status_code == 200
    body = resp.json()
    assert body["metrics"]["fallbacks"] == 3
    assert body["metrics"]["cbr"] == 0
    assert body["metrics"]["scenario"] == "none"


def test_scenarios_rejects_unknown_name(client, tmp_path):
    manifest = write_manifest_file(
        tmp_path, [manifest_row(tmp_path, "a", bundle("exit"))])
    resp = client.post("/scenarios", json={"manifest_path": str(manifest),
                                           "scenario": "garbled"})
    assert resp.status_code == 422  # literal enum in the request model


# --------------------------------------------------------------------------- #
# /maskmetrics

def test_maskmetrics_hand_counts(client, tmp_path):
    a = tmp_path / "a.pgm"
    b = tmp_path / "b.pgm"
    a.write_bytes(b"P5\n4 1\n255\n" + bytes([255, 255, 0, 0]))
    b.write_bytes(b"P5\n4 1\n255\n" + bytes([0, 255, 255, 0]))
    resp = client.post("/maskmetrics", json={
        "pred_pgm_b64": base64.b64encode(a.read_bytes()).decode(),
        "gt_pgm_b64": base64.b64encode(b.read_bytes()).decode(),
    })
    assert resp.status_code == 200
    body = resp.json()
    assert body["fg_iou"] == pytest.approx(1 / 3)
    assert body["f1_foreground"] == pytest.approx(0.5)


def test_maskmetrics_dimension_mismatch_is_400(client, tmp_path):
    a = tmp_path / "a.pgm"
    b = tmp_path / "b.pgm"
    a.write_bytes(b"P5\n2 1\n255\n\x00\x00")
    b.write_bytes(b"P5\n3 1\n255\n\x00\x00\x00")
    resp = client.post("/maskmetrics", json={
        "pred_pgm_b64": base64.b64encode(a.read_bytes()).decode(),
        "gt_pgm_b64": base64.b64encode(b.read_bytes()).decode(),
    })
    assert resp.status_code == 400
