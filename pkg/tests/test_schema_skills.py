import json

import pytest

from creepdb.backends import BackendRequest, RemoteBackend, ScriptedBackend, StaticBackend
from creepdb.errors import (
    BackendFailure,
    PreconditionError,
    SchemaViolation,
    ToolScopeViolation,
)
from creepdb.schema import (
    BoolF,
    EnumF,
    ListF,
    NumberF,
    Quantity,
    RecordF,
    TextF,
    optional,
    validate_output,
)
from creepdb.skills import ExecutionLog, Skill, ToolRegistry, ToolScope, invoke_skill

TEMP_SCHEMA = RecordF.of(temp=NumberF(unit="K"))


# -- validate_output ----------------------------------------------------------


def test_number_with_unit_accepted():
    value, violations = validate_output(TEMP_SCHEMA, '{"temp": "873.15 K"}')
    assert violations == []
    assert value["temp"] == Quantity(873.15, "K")


def test_bare_keys_and_values_repaired():
    value, violations = validate_output(TEMP_SCHEMA, "{temp: 873.15 K}")
    assert violations == []
    assert value["temp"] == Quantity(873.15, "K")


def test_missing_required_field_names_path():
    value, violations = validate_output(TEMP_SCHEMA, "{}")
    assert value is None
    assert violations[0][0] == "temp"


def test_nested_list_violation_path():
    schema = RecordF.of(
        points=ListF(RecordF.of(time=NumberF(unit="s"), strain=NumberF()))
    )
    raw = json.dumps({"points": [{"time": 1, "strain": 0.1}, {"time": 2}]})
    value, violations = validate_output(schema, raw)
    assert value is None
    assert violations[0][0] == "points[1].strain"


def test_wrong_dimension_rejected():
    value, violations = validate_output(TEMP_SCHEMA, '{"temp": "10 MPa"}')
    assert value is None
    assert "dimension" in violations[0][1]


def test_enum_and_bool_and_optional():
    schema = RecordF.of(
        kind=EnumF(("a", "b")), ok=BoolF(), note=optional(TextF())
    )
    value, violations = validate_output(schema, '{"kind": "b", "ok": "true"}')
    assert violations == []
    assert value == {"kind": "b", "ok": True}
    _, violations = validate_output(schema, '{"kind": "c", "ok": true}')
    assert violations[0][0] == "kind"


def test_garbage_not_parseable():
    value, violations = validate_output(TEMP_SCHEMA, "utter garbage !!")
    assert value is None
    assert violations[0][0] == "$"


def test_code_fences_stripped():
    raw = "```json\n{\"temp\": \"300 K\"}\n```"
    value, violations = validate_output(TEMP_SCHEMA, raw)
    assert violations == []


def test_min_items():
    schema = RecordF.of(xs=ListF(NumberF(), min_items=2))
    _, violations = validate_output(schema, '{"xs": [1]}')
    assert violations and violations[0][0] == "xs"


# -- invoke_skill -------------------------------------------------------------


def _skill(max_retries=2, tools=frozenset()):
    return Skill(
        name="probe",
        persona="Probe",
        instruction_template="probe {bundle_id}",
        allowed_tools=tools,
        output_schema=TEMP_SCHEMA,
        max_retries=max_retries,
    )


def test_happy_path_one_attempt():
    backend = StaticBackend(['{"temp": "300 K"}'])
    result = invoke_skill(_skill(), {"bundle_id": "x"}, backend)
    assert result.attempts == 1
    assert result.value["temp"].value == 300.0


def test_retry_then_success():
    backend = StaticBackend(["garbage", "more garbage", '{"temp": "300 K"}'])
    result = invoke_skill(_skill(max_retries=2), {"bundle_id": "x"}, backend)
    assert result.attempts == 3
    assert result.backend_calls == 3


def test_exhaustion_raises_schema_violation():
    backend = StaticBackend(["garbage"] * 5)
    with pytest.raises(SchemaViolation) as err:
        invoke_skill(_skill(max_retries=1), {"bundle_id": "x"}, backend)
    assert err.value.attempts == 2


def test_violations_fed_back_to_backend():
    backend = StaticBackend(['{"nope": 1}', '{"temp": "300 K"}'])
    captured = []
    original = backend.complete

    def spy(request):
        captured.append(request.instruction)
        return original(request)

    backend.complete = spy
    invoke_skill(_skill(), {"bundle_id": "x"}, backend)
    assert "schema violations" in captured[1]
    assert "temp" in captured[1]


def test_missing_placeholder_rejected():
    backend = StaticBackend(['{"temp": "300 K"}'])
    with pytest.raises(PreconditionError):
        invoke_skill(_skill(), {}, backend)


def test_backend_failure_propagates():
    backend = StaticBackend([BackendFailure("down")])
    with pytest.raises(BackendFailure):
        invoke_skill(_skill(), {"bundle_id": "x"}, backend)


def test_exchange_attempt_bound():
    backend = StaticBackend(["garbage", "garbage", '{"temp": "1 K"}'])
    skill = _skill(max_retries=2)
    result = invoke_skill(skill, {"bundle_id": "x"}, backend)
    assert all(e.attempt <= skill.max_retries + 1 for e in result.exchanges)


# -- tool scoping -------------------------------------------------------------


def _registry():
    reg = ToolRegistry()
    reg.register("adder", lambda a, b: a + b)
    reg.register("forbidden", lambda: "nope")
    return reg


def test_tool_executed_and_logged():
    log = ExecutionLog()
    scope = ToolScope("P", frozenset({"adder"}), _registry(), log)
    backend = StaticBackend(
        [json.dumps({"tool": "adder", "args": {"a": 1, "b": 2}}), '{"temp": "3 K"}']
    )
    result = invoke_skill(
        _skill(tools=frozenset({"adder"})), {"bundle_id": "x"}, backend, scope=scope
    )
    assert result.value["temp"].value == 3.0
    events = log.events()
    assert events[0].tool == "adder" and events[0].executed


def test_out_of_scope_tool_counts_as_failed_attempt():
    log = ExecutionLog()
    scope = ToolScope("P", frozenset({"adder"}), _registry(), log)
    backend = StaticBackend(
        [json.dumps({"tool": "forbidden", "args": {}}), '{"temp": "3 K"}']
    )
    result = invoke_skill(
        _skill(max_retries=1, tools=frozenset({"adder"})), {"bundle_id": "x"}, backend, scope=scope
    )
    assert result.attempts == 2  # refusal burned one attempt
    assert any(not e.executed for e in log.events())


def test_all_attempts_scope_violations():
    log = ExecutionLog()
    scope = ToolScope("P", frozenset({"adder"}), _registry(), log)
    bad = json.dumps({"tool": "forbidden", "args": {}})
    backend = StaticBackend([bad, bad])
    with pytest.raises(ToolScopeViolation):
        invoke_skill(
            _skill(max_retries=1, tools=frozenset({"adder"})),
            {"bundle_id": "x"},
            backend,
            scope=scope,
        )


def test_scope_rejects_unregistered_allowlist():
    log = ExecutionLog()
    with pytest.raises(PreconditionError):
        ToolScope("P", frozenset({"ghost"}), _registry(), log)


def test_tool_budget_exhaustion():
    log = ExecutionLog()
    scope = ToolScope("P", frozenset({"adder"}), _registry(), log)
    req = json.dumps({"tool": "adder", "args": {"a": 1, "b": 1}})
    backend = StaticBackend([req] * 40)
    with pytest.raises(SchemaViolation):
        invoke_skill(
            _skill(max_retries=0, tools=frozenset({"adder"})),
            {"bundle_id": "x"},
            backend,
            scope=scope,
            max_tool_calls=3,
        )


# -- backends -----------------------------------------------------------------


def test_scripted_backend_keyed_by_doc_and_sequence():
    backend = ScriptedBackend(
        {"probe": {"d1": ["first", "second"], "_default": {"temp": "1 K"}}}
    )
    req = BackendRequest("i", {"skill_name": "probe", "bundle_id": "d1"}, (), "")
    assert backend.complete(req) == "first"
    assert backend.complete(req) == "second"
    assert backend.complete(req) == "second"  # last reply repeats
    other = BackendRequest("i", {"skill_name": "probe", "bundle_id": "zz"}, (), "")
    assert json.loads(backend.complete(other)) == {"temp": "1 K"}


def test_scripted_backend_failure_marker():
    backend = ScriptedBackend({"probe": {"d1": {"_fail": "offline"}}})
    req = BackendRequest("i", {"skill_name": "probe", "bundle_id": "d1"}, (), "")
    with pytest.raises(BackendFailure):
        backend.complete(req)


def test_scripted_backend_unknown_skill():
    backend = ScriptedBackend({})
    req = BackendRequest("i", {"skill_name": "probe", "bundle_id": "d1"}, (), "")
    with pytest.raises(BackendFailure):
        backend.complete(req)


def test_remote_backend_happy_and_error(monkeypatch):
    import httpx

    def ok_handler(request):
        body = json.loads(request.content)
        assert body["instruction"] == "do it"
        assert body["tools"] == ["t1"]
        return httpx.Response(200, json={"text": "fine"})

    client = httpx.Client(transport=httpx.MockTransport(ok_handler))
    backend = RemoteBackend("http://backend.test/complete", client=client)
    req = BackendRequest("do it", {"k": "v"}, ("t1",), "schema")
    assert backend.complete(req) == "fine"

    def err_handler(request):
        return httpx.Response(500, text="boom")

    backend_bad = RemoteBackend(
        "http://backend.test/complete",
        client=httpx.Client(transport=httpx.MockTransport(err_handler)),
    )
    with pytest.raises(BackendFailure):
        backend_bad.complete(req)


def test_remote_backend_sends_token(monkeypatch):
    import httpx

    monkeypatch.setenv(RemoteBackend.TOKEN_ENV, "sekrit")
    seen = {}

    def handler(request):
        seen["auth"] = request.headers.get("authorization")
        return httpx.Response(200, json={"text": "ok"})

    backend = RemoteBackend(
        "http://backend.test/c", client=httpx.Client(transport=httpx.MockTransport(handler))
    )
    backend.complete(BackendRequest("i", {}, (), ""))
    assert seen["auth"] == "Bearer sekrit"
