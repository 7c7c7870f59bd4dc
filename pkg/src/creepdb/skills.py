"""Skill abstraction: primed instructions, scoped tools, hard output constraints.

A skill owns an instruction template, the set of tool names it may
execute, and an output schema.  `invoke_skill` drives the backend/retry
loop: schema violations are fed back into the next attempt, tool requests
outside the allowed set are refused (and burn an attempt), and tool
executions are recorded in an execution log so a whole pipeline run can
be audited for scope safety afterwards.
"""

from __future__ import annotations

import json
import string
import threading
from dataclasses import dataclass

from .backends import BackendExchange, BackendRequest, ReasoningBackend
from .errors import PreconditionError, SchemaViolation, ToolScopeViolation
from .schema import SchemaNode, validate_output

MAX_TOOL_CALLS_PER_ATTEMPT = 8


@dataclass(frozen=True)
class Skill:
    name: str
    persona: str
    instruction_template: str
    allowed_tools: frozenset[str]
    output_schema: SchemaNode
    max_retries: int = 1

    def __post_init__(self):
        if self.max_retries < 0:
            raise PreconditionError("max_retries must be >= 0")

    def placeholders(self) -> set[str]:
        return {
            name.split(".")[0].split("[")[0]
            for _, name, _, _ in string.Formatter().parse(self.instruction_template)
            if name
        }


class ToolRegistry:
    def __init__(self):
        self._tools: dict[str, callable] = {}

    def register(self, name: str, fn) -> None:
        self._tools[name] = fn

    def get(self, name: str):
        return self._tools[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tools

    def names(self) -> frozenset[str]:
        return frozenset(self._tools)


@dataclass(frozen=True)
class ToolEvent:
    persona: str
    tool: str
    executed: bool  # False = refused (out of scope)


class ExecutionLog:
    """Thread-safe record of tool activity across a run."""

    def __init__(self):
        self._events: list[ToolEvent] = []
        self._lock = threading.Lock()

    def record(self, persona: str, tool: str, executed: bool) -> None:
        with self._lock:
            self._events.append(ToolEvent(persona, tool, executed))

    def events(self) -> list[ToolEvent]:
        with self._lock:
            return list(self._events)

    def executed_by_persona(self) -> dict[str, set[str]]:
        out: dict[str, set[str]] = {}
        for ev in self.events():
            if ev.executed:
                out.setdefault(ev.persona, set()).add(ev.tool)
        return out


class ToolScope:
    """Binds a persona's allowed tool set to a registry + log; the only
    path through which stage code and backends run tools."""

    def __init__(self, persona: str, allowed: frozenset[str], registry: ToolRegistry, log: ExecutionLog):
        unknown = allowed - registry.names()
        if unknown:
            raise PreconditionError(f"skill allows unregistered tools: {sorted(unknown)}")
        self.persona = persona
        self.allowed = allowed
        self.registry = registry
        self.log = log

    def call(self, name: str, *args, **kwargs):
        if name not in self.allowed or name not in self.registry:
            self.log.record(self.persona, name, executed=False)
            raise ToolScopeViolation(f"{self.persona}: tool {name!r} is out of scope")
        self.log.record(self.persona, name, executed=True)
        return self.registry.get(name)(*args, **kwargs)


@dataclass(frozen=True)
class SkillResult:
    value: object
    attempts: int
    backend_calls: int
    exchanges: tuple[BackendExchange, ...]


def _parse_tool_request(raw: str):
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError:
        return None
    if isinstance(obj, dict) and "tool" in obj and isinstance(obj["tool"], str):
        args = obj.get("args", {})
        return obj["tool"], args if isinstance(args, dict) else {}
    return None


def invoke_skill(
    skill: Skill,
    context: dict,
    backend: ReasoningBackend,
    *,
    scope: ToolScope | None = None,
    max_tool_calls: int = MAX_TOOL_CALLS_PER_ATTEMPT,
) -> SkillResult:
    """Run one skill to a schema-conforming value.

    Retry policy: a non-conforming reply re-issues the instruction with
    the violations appended; an out-of-scope tool request is refused and
    also consumes an attempt.  BackendFailure propagates immediately.
    """
    missing = skill.placeholders() - set(context)
    if missing:
        raise PreconditionError(f"context lacks placeholders {sorted(missing)}")
    instruction = skill.instruction_template.format(**context)
    schema_desc = skill.output_schema.describe()
    full_context = {"skill_name": skill.name, **context}

    exchanges: list[BackendExchange] = []
    backend_calls = 0
    feedback = ""
    last_violations: list[tuple[str, str]] = []
    scope_failures = 0

    for attempt in range(1, skill.max_retries + 2):
        prompt = instruction + feedback
        raw = None
        tool_fault = None
        scope_fault = False
        for _ in range(max_tool_calls):
            request = BackendRequest(prompt, full_context, tuple(sorted(skill.allowed_tools)), schema_desc)
            response = backend.complete(request)
            backend_calls += 1
            exchanges.append(BackendExchange(request, response, attempt))
            tool_req = _parse_tool_request(response)
            if tool_req is None:
                raw = response
                break
            name, args = tool_req
            if scope is None:
                tool_fault = f"tool {name!r} requested but no tool scope is available"
                scope_fault = True
                break
            try:
                result = scope.call(name, **args)
            except ToolScopeViolation as err:
                tool_fault = str(err)
                scope_fault = True
                break
            prompt += f"\n[tool {name} result] {json.dumps(result, default=str)}"
        else:
            tool_fault = "tool-call budget exhausted"

        if tool_fault is not None:
            if scope_fault:
                scope_failures += 1
            last_violations = [("$", tool_fault)]
            feedback = f"\n[refused] {tool_fault}"
            continue

        value, violations = validate_output(skill.output_schema, raw)
        if not violations:
            return SkillResult(value, attempt, backend_calls, tuple(exchanges))
        last_violations = violations
        feedback = "\n[schema violations] " + "; ".join(f"{p}: {m}" for p, m in violations)

    if scope_failures == skill.max_retries + 1:
        raise ToolScopeViolation(
            f"skill {skill.name}: every attempt requested an out-of-scope tool"
        )
    raise SchemaViolation(last_violations, attempts=skill.max_retries + 1)
