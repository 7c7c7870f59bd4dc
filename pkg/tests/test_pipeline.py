import json

import pytest

from creepdb import corpus
from creepdb.backends import ScriptedBackend
from creepdb.errors import BackendFailure
from creepdb.pipeline import (
    EXTRACTION_SKILL,
    SCREENING_SKILL,
    PipelineConfig,
    run_pipeline,
)
from creepdb.store import RecordFilter, Store


@pytest.fixture()
def run_once(fixture_index, fixture_paths, tmp_path):
    def _run(config=None, script_mutator=None):
        script = json.loads(fixture_paths["replies"].read_text())
        if script_mutator:
            script_mutator(script)
        backend = ScriptedBackend(script)
        store = Store(tmp_path / "run.db")
        cfg = config or PipelineConfig()
        report = run_pipeline(fixture_index, cfg, backend, store)
        return report, store

    return _run


def test_fixture_run_counts(run_once):
    report, store = run_once()
    assert report.collected == 6
    assert report.screened_pass == 5
    assert report.screened_fail == 1
    assert report.extracted == 5
    assert report.validated_valid == 4
    assert report.validated_flagged == 1
    assert report.validated_rejected == 0
    assert report.stored == 4
    assert report.check_funnel()
    # store contents consistent with the report
    assert len(store.query(RecordFilter(verdicts=("Valid", "Valid-TextOnly")))) == 4
    assert len(store.query(RecordFilter(verdicts=("Flagged",)))) == 1


def test_every_bundle_reaches_one_terminal_state(run_once):
    report, _ = run_once()
    terminals = {bid: t.terminal for bid, t in report.traces.items()}
    assert set(terminals) == {"d001", "d002", "d003", "d004", "d005", "d006"}
    allowed = {"stored", "flagged", "rejected-at-screening", "rejected-at-validation"}
    assert all(t in allowed for t in terminals.values())
    assert terminals["d006"] == "rejected-at-screening"
    assert terminals["d004"] == "flagged"


def test_empty_index_all_zero(tmp_path):
    manifest = tmp_path / "manifest.jsonl"
    manifest.write_text("")
    index = corpus.ingest_manifest(manifest)
    store = Store()
    report = run_pipeline(index, PipelineConfig(), ScriptedBackend({}), store)
    counts = report.to_json()["counts"]
    assert all(v == 0 for v in counts.values())


def test_backend_failure_isolated_to_one_document(run_once):
    def kill_d002(script):
        script["screening"]["d002"] = {"_fail": "backend offline"}

    report, store = run_once(script_mutator=kill_d002)
    assert report.traces["d002"].terminal == "failed:screening"
    assert "BackendFailure" in report.traces["d002"].stages["screening"]["error"]
    assert report.stored == 3  # remaining valid documents unaffected
    assert report.check_funnel()


def test_stored_dois_resolve_in_papers(run_once):
    _, store = run_once()
    for rec in store.query():
        paper = store.get_paper(rec.doi)
        assert paper.doi == rec.doi


def test_valid_records_have_evidence_and_high_r2(run_once):
    _, store = run_once()
    for rec in store.query(RecordFilter(verdicts=("Valid",))):
        assert rec.evidence["figure_id"]
        assert rec.r2 is None or rec.r2 > 0.9


def test_no_valid_record_without_homogeneity(run_once):
    """Valid records always carry an equation that passed the unit check."""
    from creepdb.formula import check_homogeneity, parse_equation

    report, store = run_once()
    for bid, trace in report.traces.items():
        v = trace.stages.get("validation")
        if v and v["verdict"] in ("Valid", "Valid-TextOnly"):
            assert v["integrity"]["pass"]


def test_tool_scope_safety(run_once):
    report, _ = run_once()
    allowed = {
        SCREENING_SKILL.persona: SCREENING_SKILL.allowed_tools,
        EXTRACTION_SKILL.persona: EXTRACTION_SKILL.allowed_tools,
        "Physics Guardrail": frozenset(
            {"validate_entry", "check_homogeneity", "evaluate_model", "fit_parameters"}
        ),
        "Data Serializer": frozenset({"insert_paper", "insert_record", "audit_event"}),
        "Bibliographic Navigator": frozenset({"boolean_search"}),
    }
    for persona, used in report.tools_by_persona.items():
        assert set(used) <= allowed[persona], f"{persona} used {used}"


def test_determinism_byte_identical_exports(fixture_index, fixture_paths, tmp_path):
    blobs = []
    for i in range(2):
        backend = ScriptedBackend.from_file(fixture_paths["replies"])
        store = Store(tmp_path / f"det{i}.db")
        run_pipeline(fixture_index, PipelineConfig(), backend, store)
        blobs.append(store.export_csv())
        store.close()
    assert blobs[0] == blobs[1]


def test_query_restricts_collection(run_once, fixture_index, fixture_paths, tmp_path):
    backend = ScriptedBackend.from_file(fixture_paths["replies"])
    store = Store(tmp_path / "q.db")
    report = run_pipeline(
        fixture_index, PipelineConfig(query="superalloy creep"), backend, store
    )
    assert report.collected == 1  # only the Ni-based bundle matches the expansion
    assert report.stored == 1


def test_audit_log_written(fixture_index, fixture_paths, tmp_path):
    backend = ScriptedBackend.from_file(fixture_paths["replies"])
    store = Store(tmp_path / "a.db")
    log_path = tmp_path / "audit.jsonl"
    run_pipeline(fixture_index, PipelineConfig(audit_log=str(log_path)), backend, store)
    lines = [json.loads(l) for l in log_path.read_text().splitlines()]
    assert len(lines) == 5
    assert {l["bundle_id"] for l in lines} == {"d001", "d002", "d003", "d004", "d005"}


def test_concurrent_matches_serial(fixture_index, fixture_paths, tmp_path):
    reports = []
    for inflight in (1, 4):
        backend = ScriptedBackend.from_file(fixture_paths["replies"])
        store = Store(tmp_path / f"c{inflight}.db")
        cfg = PipelineConfig(max_inflight=inflight)
        reports.append(run_pipeline(fixture_index, cfg, backend, store).to_json()["counts"])
        store.close()
    assert reports[0] == reports[1]


def test_flagged_record_mentions_review_band(run_once):
    report, store = run_once()
    flagged = store.query(RecordFilter(verdicts=("Flagged",)))
    assert len(flagged) == 1
    assert flagged[0].material == "AA2024"
    assert 0.5 < flagged[0].r2 <= 0.9


def test_duffing_document_round_trips_through_ode_path(run_once):
    report, store = run_once()
    rec = store.query(RecordFilter(category="metallic_glass"))[0]
    assert rec.verdict == "Valid"
    assert rec.model_name == "duffing"
    assert rec.r2 > 0.999
    assert rec.curve is not None and len(rec.curve["times"]) > 100


def test_config_round_trip(tmp_path):
    cfg = PipelineConfig(max_inflight=2, r2_valid=0.95, backend="echo")
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.__dict__))
    loaded = PipelineConfig.from_file(path)
    assert loaded == cfg


def test_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text('{"no_such_knob": 1}')
    with pytest.raises(Exception):
        PipelineConfig.from_file(path)
