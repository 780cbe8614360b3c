from __future__ import annotations

import time

import pytest
from fastapi.testclient import TestClient

from matchaudit.service import create_app
from matchaudit.synth import generate


@pytest.fixture
def client(tmp_path):
    app = create_app(root=tmp_path / "service-root")
    with TestClient(app) as c:
        yield c


def _wait_for_job(client, job_id, timeout=60.0):
    deadline = time.time() + timeout
    while time.time() < deadline:
        status = client.get(f"/jobs/{job_id}").json()
        if status["state"] in ("done", "failed"):
            return status
        time.sleep(0.05)
    raise AssertionError("job did not finish in time")


def _upload_files(tmp_path, seed=3):
    gen = tmp_path / "gen"
    meta = generate("scores", seed, gen)
    return gen, meta


def test_create_session_and_summary(client):
    sid = client.post("/sessions").json()["session_id"]
    summary = client.get(f"/sessions/{sid}").json()
    assert summary["state"] == "created"


def test_unknown_session_is_404(client):
    response = client.get("/sessions/nope")
    assert response.status_code == 404
    assert response.json()["detail"]["code"] == "unknown_session"


def test_audit_before_scores_is_409(client, tmp_path):
    gen, meta = _upload_files(tmp_path)
    sid = client.post("/sessions").json()["session_id"]
    import json as json_mod

    with (gen / "tableA.csv").open("rb") as a, (gen / "tableB.csv").open("rb") as b, \
            (gen / "train.csv").open("rb") as tr, (gen / "valid.csv").open("rb") as va, \
            (gen / "test.csv").open("rb") as te:
        response = client.post(
            f"/sessions/{sid}/dataset",
            files={"table_a": a, "table_b": b, "train": tr, "valid": va, "test": te},
            data={"sensitive": json_mod.dumps(meta["sensitive"]), "mode": "match-and-evaluate"},
        )
    assert response.status_code == 200, response.text
    response = client.post(f"/sessions/{sid}/audit", json={"measures": ["tprp"]})
    assert response.status_code == 409
    assert response.json()["detail"]["code"] == "out_of_order"


def test_evaluate_only_upload_lists_external_matcher(client, tmp_path):
    gen, meta = _upload_files(tmp_path)
    sid = client.post("/sessions").json()["session_id"]
    import json as json_mod

    with (gen / "tableA.csv").open("rb") as a, (gen / "tableB.csv").open("rb") as b, \
            (gen / "test.csv").open("rb") as te, (gen / "scores_biased.csv").open("rb") as sc:
        response = client.post(
            f"/sessions/{sid}/dataset",
            files={"table_a": a, "table_b": b, "test": te, "scores": sc},
            data={
                "sensitive": json_mod.dumps(meta["sensitive"]),
                "mode": "evaluate-only",
                "scores_name": "mine",
            },
        )
    assert response.status_code == 200, response.text
    summary = response.json()
    assert summary["matchers"] == ["external:mine"]
    assert summary["state"] == "matched"
    catalog = client.get(f"/sessions/{sid}/matchers").json()["matchers"]
    external = [m for m in catalog if m["matcher_id"] == "external:mine"]
    assert external and external[0]["trained"] is True


def test_bad_sensitive_spec_is_400(client, tmp_path):
    gen, _ = _upload_files(tmp_path)
    sid = client.post("/sessions").json()["session_id"]
    with (gen / "tableA.csv").open("rb") as a, (gen / "tableB.csv").open("rb") as b, \
            (gen / "test.csv").open("rb") as te:
        response = client.post(
            f"/sessions/{sid}/dataset",
            files={"table_a": a, "table_b": b, "test": te},
            data={"sensitive": "not json", "mode": "evaluate-only"},
        )
    assert response.status_code == 400
    assert response.json()["detail"]["code"] == "bad_sensitive_spec"


def test_demo_scores_walkthrough(client):
    created = client.post("/demo/datasets", json={"profile": "scores", "seed": 5}).json()
    sid = created["session_id"]
    assert created["summary"]["matchers"] == ["external:biased", "external:fair"]

    audit_body = {"measures": ["tprp"], "tau_match": 0.5, "theta_fair": 0.2}
    report = client.post(f"/sessions/{sid}/audit", json=audit_body).json()
    flagged = [(e["matcher"], e["group"]) for e in report["entries"] if e["unfair"]]
    assert flagged == [("external:biased", "gamma")]

    # idempotence: identical body returns the cached artifact verbatim
    again = client.post(f"/sessions/{sid}/audit", json=audit_body).json()
    assert again == report

    multi = client.post(
        f"/sessions/{sid}/audit/multiworkload", json={"k": 25, "seed": 2, "alpha_sig": 0.05}
    ).json()
    gamma_rows = [
        r for r in multi["rows"]
        if r["matcher"] == "external:biased" and r["group"] == "gamma"
    ]
    assert gamma_rows and gamma_rows[0]["reject"] is True

    explanation = client.post(
        f"/sessions/{sid}/explain",
        json={"matcher_id": "external:biased", "group": "gamma", "measure_id": "tprp"},
    ).json()
    assert explanation["measure_breakdown"]["driver"] == "fn"
    assert all(item["cell"] == "fn" for item in explanation["examples"]["items"])

    resolution = client.post(f"/sessions/{sid}/resolve", json={"measure_id": "tprp"}).json()
    assert resolution["frontier_indices"]
    point = resolution["points"][resolution["frontier_indices"][0]]
    strategy = client.post(
        f"/sessions/{sid}/resolve/strategy", json={"assignment": point["assignment"]}
    ).json()
    assert all(not e["unfair"] for e in strategy["entries"])


def test_demo_faculty_train_job_and_audit(client):
    created = client.post("/demo/datasets", json={"profile": "faculty", "seed": 11}).json()
    sid = created["session_id"]
    tau = created["meta"]["recommended"]["tau"]

    job = client.post(
        f"/sessions/{sid}/match",
        json={"matcher_ids": ["threshold", "decision-stump"], "seed": 11},
    ).json()
    status = _wait_for_job(client, job["job_id"])
    assert status["state"] == "done", status
    assert sorted(status["result"]["trained"]) == ["decision-stump", "threshold"]

    report = client.post(
        f"/sessions/{sid}/audit", json={"measures": ["tprp"], "tau_match": tau}
    ).json()
    flagged = {(e["matcher"], e["group"]) for e in report["entries"] if e["unfair"]}
    assert ("threshold", "gamma") in flagged
    assert not any(m == "decision-stump" for m, _ in flagged)


def test_unknown_matcher_kind_rejected(client):
    created = client.post("/demo/datasets", json={"profile": "faculty", "seed": 1}).json()
    sid = created["session_id"]
    response = client.post(f"/sessions/{sid}/match", json={"matcher_ids": ["neural-giant"]})
    assert response.status_code == 400
    assert response.json()["detail"]["code"] == "unknown_matcher"


def test_unknown_job_404(client):
    assert client.get("/jobs/missing").status_code == 404


def test_sessions_are_isolated(client):
    a = client.post("/demo/datasets", json={"profile": "scores", "seed": 1}).json()
    b = client.post("/demo/datasets", json={"profile": "faculty", "seed": 2}).json()
    summary_a = client.get(f"/sessions/{a['session_id']}").json()
    summary_b = client.get(f"/sessions/{b['session_id']}").json()
    assert summary_a["matchers"] == ["external:biased", "external:fair"]
    assert summary_b["matchers"] == []
    assert a["session_id"] != b["session_id"]


def test_spec_document_lists_endpoints(client):
    spec = client.get("/spec").json()
    for path in (
        "/sessions",
        "/sessions/{sid}/dataset",
        "/sessions/{sid}/audit",
        "/sessions/{sid}/resolve/strategy",
        "/demo/datasets",
    ):
        assert path in spec["paths"]


def test_audit_response_schema_round_trip(client):
    created = client.post("/demo/datasets", json={"profile": "scores", "seed": 9}).json()
    sid = created["session_id"]
    report = client.post(f"/sessions/{sid}/audit", json={"measures": ["tprp", "ppvp"]}).json()
    assert set(report) == {"config", "entries", "overall"}
    for entry in report["entries"]:
        assert set(entry) == {
            "matcher", "paradigm", "measure", "group", "group_value", "overall_value",
            "disparity", "mode", "unfair", "support", "annotation",
        }
        assert set(entry["support"]) == {"tp", "fp", "fn", "tn"}
        assert isinstance(entry["unfair"], bool)
