import json

import pytest
from fastapi.testclient import TestClient

from creepdb import fixtures
from creepdb.backends import ScriptedBackend
from creepdb.corpus import ingest_manifest
from creepdb.pipeline import PipelineConfig, run_pipeline
from creepdb.service import create_app
from creepdb.store import RecordFilter, Store


@pytest.fixture(scope="module")
def served(tmp_path_factory):
    root = tmp_path_factory.mktemp("svc")
    paths = fixtures.write_corpus(root / "fx")
    index = ingest_manifest(paths["manifest"])
    store = Store(root / "svc.db")
    backend = ScriptedBackend.from_file(paths["replies"])
    run_pipeline(index, PipelineConfig(), backend, store)
    client = TestClient(create_app(store))
    return client, store


def test_records_filter(served):
    client, _ = served
    r = client.get("/api/records", params={"category": "steel_iron", "t_min_K": 870, "t_max_K": 880})
    assert r.status_code == 200
    records = r.json()["records"]
    assert len(records) == 1
    assert records[0]["material"] == "X46Cr13"


def test_records_no_params_returns_all(served):
    client, store = served
    r = client.get("/api/records")
    assert r.status_code == 200
    assert len(r.json()["records"]) == len(store.query())


def test_records_reversed_range_400(served):
    client, _ = served
    r = client.get("/api/records", params={"t_min_K": 900, "t_max_K": 100})
    assert r.status_code == 400
    r = client.get("/api/records", params={"t_min_K": "abc"})
    assert r.status_code == 400
    assert r.json()["detail"][0]["field"] == "t_min_K"


def test_http_query_equals_direct_store_query(served):
    client, store = served
    cases = [
        {},
        {"category": "polymer"},
        {"material": "alloy"},
        {"s_min_MPa": 10, "s_max_MPa": 400},
        {"verdict": "Flagged"},
    ]
    for params in cases:
        got = client.get("/api/records", params=params).json()["records"]
        flt = RecordFilter(
            material=params.get("material"),
            category=params.get("category"),
            s_min_MPa=params.get("s_min_MPa"),
            s_max_MPa=params.get("s_max_MPa"),
            verdicts=(params["verdict"],) if "verdict" in params else None,
        )
        want = [r.record_id for r in store.query(flt)]
        assert [r["record_id"] for r in got] == want


def test_curve_endpoint(served):
    client, store = served
    rec = store.query()[0]
    r = client.get(f"/api/records/{rec.record_id}/curve")
    assert r.status_code == 200
    body = r.json()
    assert len(body["times"]) == len(body["strains"]) == rec.n_points
    assert client.get("/api/records/99999/curve").status_code == 404


def test_paper_endpoint(served):
    client, _ = served
    r = client.get("/api/papers/10.5555/fx.2019.001")
    assert r.status_code == 200
    assert "X46Cr13" in r.json()["title"]
    assert client.get("/api/papers/10.5555/unknown").status_code == 404


def test_stats_endpoint(served):
    client, store = served
    r = client.get("/api/stats")
    assert r.status_code == 200
    assert r.json() == json.loads(json.dumps(store.stats()))


def test_export_csv_equals_store_bytes(served):
    client, store = served
    r = client.get("/api/export.csv")
    assert r.status_code == 200
    assert r.content == store.export_csv()
    filtered = client.get("/api/export.csv", params={"category": "polymer"})
    assert filtered.content == store.export_csv(RecordFilter(category="polymer"))


def test_export_data_endpoint(served):
    client, store = served
    r = client.get("/api/export.data")
    assert r.content == store.export_json()


def test_review_state_machine(served):
    client, store = served
    flagged = store.query(RecordFilter(verdicts=("Flagged",)))
    assert flagged
    rid = flagged[0].record_id
    # approving a Valid record conflicts
    valid = store.query(RecordFilter(verdicts=("Valid",)))[0]
    assert (
        client.post("/api/review", json={"record_id": valid.record_id, "action": "approve"}).status_code
        == 409
    )
    # approve the flagged one
    r = client.post(
        "/api/review", json={"record_id": rid, "action": "approve", "note": "checked"}
    )
    assert r.status_code == 200
    assert r.json()["record"]["verdict"] == "Valid"
    assert r.json()["record"]["params_source"].endswith("human-approved")
    # repeat approve -> 409 (idempotency guard)
    assert client.post("/api/review", json={"record_id": rid, "action": "approve"}).status_code == 409
    # audit trail exists
    audit = store.audit_entries("review")
    assert audit and audit[-1]["record_id"] == rid
    # unknown record / bad action
    assert client.post("/api/review", json={"record_id": 12345, "action": "approve"}).status_code == 404
    assert client.post("/api/review", json={"record_id": rid, "action": "purge"}).status_code == 400


def test_restart_does_not_change_results(served, tmp_path):
    client, store = served
    before = client.get("/api/records").json()
    client2 = TestClient(create_app(store))
    after = client2.get("/api/records").json()
    assert before == after
