"""Reasoning-backend interface and implementations.

A backend answers a rendered request (instruction + context payload +
allowed tool names + schema description) with raw text.  Deterministic
scripted backends drive the pipeline in tests and offline runs; the
remote client speaks to an HTTP completion service.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass
from pathlib import Path

import httpx

from .errors import BackendFailure


@dataclass(frozen=True)
class BackendRequest:
    instruction: str
    context: dict
    tools: tuple[str, ...]
    schema: str


@dataclass(frozen=True)
class BackendExchange:
    request: BackendRequest
    response: str
    attempt: int


class ReasoningBackend:
    """Interface: complete(request) -> raw text; raise BackendFailure."""

    def complete(self, request: BackendRequest) -> str:
        raise NotImplementedError


class StaticBackend(ReasoningBackend):
    """Replays a fixed list of replies in order (unit-test helper)."""

    def __init__(self, replies):
        self.replies = list(replies)
        self.calls = 0

    def complete(self, request: BackendRequest) -> str:
        if self.calls >= len(self.replies):
            raise BackendFailure("static backend exhausted")
        reply = self.replies[self.calls]
        self.calls += 1
        if isinstance(reply, Exception):
            raise reply
        return reply


class EchoBackend(ReasoningBackend):
    """Answers query-expansion requests with the identity query (no expansion)."""

    def complete(self, request: BackendRequest) -> str:
        nl = request.context.get("nl_query", "")
        return json.dumps({"query": json.dumps({"term": nl})})


class ScriptedBackend(ReasoningBackend):
    """Deterministic replies keyed by (skill name, document id / query).

    Script layout: {skill_name: {key: reply, "_default": reply}} where a
    reply is a string (returned verbatim), a JSON value (serialized), a
    {"_fail": msg} marker (raises BackendFailure), or a list of any of
    those consumed one per call (for retry scenarios).
    """

    def __init__(self, script: dict):
        self.script = script
        self._lock = threading.Lock()
        self._cursor: dict[tuple[str, str], int] = {}
        self.calls: list[tuple[str, str]] = []

    @classmethod
    def from_file(cls, path) -> "ScriptedBackend":
        return cls(json.loads(Path(path).read_text()))

    @staticmethod
    def _key(context: dict) -> str:
        for name in ("bundle_id", "nl_query"):
            if name in context:
                return str(context[name])
        return "_default"

    def complete(self, request: BackendRequest) -> str:
        skill = str(request.context.get("skill_name", ""))
        key = self._key(request.context)
        table = self.script.get(skill)
        if table is None:
            raise BackendFailure(f"scripted backend has no replies for skill {skill!r}")
        reply = table.get(key, table.get("_default"))
        if reply is None:
            raise BackendFailure(f"scripted backend has no reply for {skill!r}/{key!r}")
        with self._lock:
            self.calls.append((skill, key))
            if isinstance(reply, list):
                cursor = self._cursor.get((skill, key), 0)
                self._cursor[(skill, key)] = cursor + 1
                reply = reply[min(cursor, len(reply) - 1)]
        return self._render(reply)

    @staticmethod
    def _render(reply) -> str:
        if isinstance(reply, str):
            return reply
        if isinstance(reply, dict) and "_fail" in reply:
            raise BackendFailure(str(reply["_fail"]))
        return json.dumps(reply)


class RemoteBackend(ReasoningBackend):
    """HTTP client for a completion endpoint.

    POSTs {"instruction", "context", "tools", "schema"} and expects
    {"text": "..."}.  Credentials, when needed, come from the
    CREEPDB_BACKEND_TOKEN environment variable.
    """

    TOKEN_ENV = "CREEPDB_BACKEND_TOKEN"

    def __init__(self, endpoint: str, timeout: float = 30.0, client: httpx.Client | None = None):
        self.endpoint = endpoint
        self.timeout = timeout
        self._client = client or httpx.Client(timeout=timeout)

    def complete(self, request: BackendRequest) -> str:
        headers = {}
        token = os.environ.get(self.TOKEN_ENV)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        payload = {
            "instruction": request.instruction,
            "context": _jsonable(request.context),
            "tools": list(request.tools),
            "schema": request.schema,
        }
        try:
            resp = self._client.post(self.endpoint, json=payload, headers=headers)
            resp.raise_for_status()
            body = resp.json()
        except (httpx.HTTPError, json.JSONDecodeError) as err:
            raise BackendFailure(f"remote backend: {err}")
        if "text" not in body:
            raise BackendFailure("remote backend reply lacks 'text'")
        return str(body["text"])


def _jsonable(context: dict) -> dict:
    out = {}
    for k, v in context.items():
        try:
            json.dumps(v)
            out[k] = v
        except TypeError:
            out[k] = str(v)
    return out


def make_backend(spec: str, timeout: float = 30.0) -> ReasoningBackend:
    """Build a backend from a CLI/config spec string.

    Forms: "scripted:<replies.json>", "remote:<url>", "echo".
    """
    if spec == "echo":
        return EchoBackend()
    if spec.startswith("scripted:"):
        return ScriptedBackend.from_file(spec.split(":", 1)[1])
    if spec.startswith("remote:"):
        return RemoteBackend(spec.split(":", 1)[1], timeout=timeout)
    raise ValueError(f"unknown backend spec {spec!r}")
