"""HTTP scenario service: endpoint contracts, caching, comparison."""

import json

import pytest
from fastapi.testclient import TestClient

from safetybn.service import create_app


@pytest.fixture()
def client():
    return TestClient(create_app())


def test_models_catalog_lists_bundled(client):
    body = client.get("/api/models").json()
    ids = {m["id"] for m in body["models"]}
    assert "fig4b_hammer_pfd" in ids
    assert len(ids) == 21


def test_graph_endpoint_shapes(client):
    body = client.get("/api/models/fig13_hammer_composite/graph").json()
    node_ids = {n["id"] for n in body["nodes"]}
    assert "pfd_p" in node_ids
    groups = {n["group"] for n in body["nodes"]}
    assert {"pfd", "quality", "hazard"} <= groups
    assert any(e["from"] == "pfd_p" for e in body["edges"])


def test_graph_unknown_model_404(client):
    assert client.get("/api/models/nope/graph").status_code == 404


def test_upload_model_and_infer(client):
    doc = {
        "version": "1",
        "title": "uploaded",
        "nodes": [
            {"id": "x", "kind": "continuous", "bounds": [0, 1],
             "cpd": {"expression": "Uniform(0, 1)"}},
        ],
    }
    r = client.post("/api/models", json=doc)
    assert r.status_code == 201
    model_id = r.json()["id"]
    r = client.post("/api/scenarios", json={"model": model_id})
    sid = r.json()["id"]
    body = client.get(f"/api/scenarios/{sid}/posteriors").json()
    assert body["nodes"]["x"]["mean"] == pytest.approx(0.5, abs=1e-6)


def test_upload_rejects_bad_document(client):
    r = client.post("/api/models", json={"version": "1", "title": "x"})
    assert r.status_code == 400
    assert r.json()["code"] == "validation_error"


def test_fig4b_evidence_flow(client):
    sid = client.post("/api/scenarios", json={"model": "fig4b_hammer_pfd"}).json()["id"]
    client.patch(f"/api/scenarios/{sid}/evidence/pfd_observed", json={"value": 10})
    client.patch(f"/api/scenarios/{sid}/evidence/pfd_demands", json={"value": 1000})
    body = client.get(f"/api/scenarios/{sid}/posteriors").json()
    assert 0.0105 <= body["nodes"]["pfd_p"]["mean"] <= 0.0115


def test_posteriors_idempotent_and_cache_invalidation(client):
    sid = client.post("/api/scenarios", json={"model": "fig4b_hammer_pfd"}).json()["id"]
    client.put(f"/api/scenarios/{sid}/evidence",
               json={"pfd_observed": 10, "pfd_demands": 1000})
    first = client.get(f"/api/scenarios/{sid}/posteriors").json()
    second = client.get(f"/api/scenarios/{sid}/posteriors").json()
    assert first == second  # idempotent without mutation

    # set -> get -> clear -> get: posteriors always reflect latest evidence
    client.patch(f"/api/scenarios/{sid}/evidence/pfd_observed", json={"value": 100})
    after_set = client.get(f"/api/scenarios/{sid}/posteriors").json()
    assert after_set["nodes"]["pfd_p"]["mean"] > first["nodes"]["pfd_p"]["mean"]
    client.patch(f"/api/scenarios/{sid}/evidence/pfd_observed", json={"value": None})
    after_clear = client.get(f"/api/scenarios/{sid}/posteriors").json()
    assert "pfd_observed" not in after_clear["evidence"]
    assert after_clear["nodes"]["pfd_p"]["mean"] != after_set["nodes"]["pfd_p"]["mean"]


def test_posteriors_subset_query(client):
    sid = client.post("/api/scenarios", json={"model": "fig4b_hammer_pfd"}).json()["id"]
    body = client.get(f"/api/scenarios/{sid}/posteriors", params={"nodes": "pfd_p"}).json()
    assert list(body["nodes"]) == ["pfd_p"]
    r = client.get(f"/api/scenarios/{sid}/posteriors", params={"nodes": "ghost"})
    assert r.status_code == 422


def test_unknown_scenario_404(client):
    assert client.get("/api/scenarios/unknown/posteriors").status_code == 404


def test_zero_probability_evidence_409(client):
    sid = client.post("/api/scenarios", json={"model": "fig4b_hammer_pfd"}).json()["id"]
    client.put(f"/api/scenarios/{sid}/evidence",
               json={"pfd_observed": 2000, "pfd_demands": 1000})
    r = client.get(f"/api/scenarios/{sid}/posteriors")
    assert r.status_code == 409
    assert r.json()["code"] == "zero_probability_evidence"


def test_out_of_domain_evidence_422(client):
    sid = client.post("/api/scenarios", json={"model": "fig4b_hammer_pfd"}).json()["id"]
    r = client.put(f"/api/scenarios/{sid}/evidence", json={"pfd_p": 1.5})
    assert r.status_code == 422


def test_interventions_endpoint(client):
    sid = client.post("/api/scenarios", json={"model": "fig4b_hammer_pfd"}).json()["id"]
    client.put(f"/api/scenarios/{sid}/evidence",
               json={"pfd_observed": 10, "pfd_demands": 1000})
    r = client.post(f"/api/scenarios/{sid}/interventions", json={"node": "pfd_p", "value": 0.3})
    assert r.status_code == 200
    body = client.get(f"/api/scenarios/{sid}/posteriors").json()
    assert body["nodes"]["pfd_p"]["point"] == pytest.approx(0.3)
    client.delete(f"/api/scenarios/{sid}/interventions/pfd_p")
    body = client.get(f"/api/scenarios/{sid}/posteriors").json()
    assert body["nodes"]["pfd_p"].get("point") is None


def test_compare_fig17b_delta(client):
    sa = client.post("/api/scenarios", json={"model": "fig17b_risk_control"}).json()["id"]
    client.put(f"/api/scenarios/{sa}/evidence",
               json={"control_control": 0.0, "control_event_probability": 0.08})
    sb = client.post("/api/scenarios", json={"model": "fig17b_risk_control"}).json()["id"]
    client.put(f"/api/scenarios/{sb}/evidence",
               json={"control_control": 0.5, "control_event_probability": 0.08})
    body = client.post("/api/compare", json={"scenarioA": sa, "scenarioB": sb}).json()
    node = body["nodes"]["control_residual_probability"]
    assert node["meanA"] == pytest.approx(0.08, abs=1e-3)
    assert node["meanB"] == pytest.approx(0.04, abs=1e-3)
    assert node["delta"] == pytest.approx(-0.04, abs=1e-3)


def test_compare_requires_same_model(client):
    sa = client.post("/api/scenarios", json={"model": "fig17b_risk_control"}).json()["id"]
    sb = client.post("/api/scenarios", json={"model": "fig4b_hammer_pfd"}).json()["id"]
    r = client.post("/api/compare", json={"scenarioA": sa, "scenarioB": sb})
    assert r.status_code == 422


def test_persistence_snapshot(tmp_path):
    app = create_app(persist_dir=tmp_path)
    with TestClient(app) as client:
        sid = client.post("/api/scenarios", json={"model": "fig4b_hammer_pfd"}).json()["id"]
        client.put(f"/api/scenarios/{sid}/evidence", json={"pfd_observed": 10})
    # shutdown hook ran on context exit
    snapshot = json.loads((tmp_path / "scenarios.json").read_text())
    assert snapshot["scenarios"][0]["evidence"] == {"pfd_observed": 10}

    app2 = create_app(persist_dir=tmp_path)
    with TestClient(app2) as client:
        body = client.get(f"/api/scenarios/{sid}").json()
        assert body["evidence"] == {"pfd_observed": 10}
