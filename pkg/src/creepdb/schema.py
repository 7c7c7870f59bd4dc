"""Hard output constraints: recursive schemas validated against raw backend text.

Schema nodes cover records, lists, numbers (optionally carrying an
expected unit dimension), booleans, enumerations, and free text.
`validate_output` never raises on bad data: it returns the typed value or
a list of (path, message) violations naming the offending field, e.g.
"points[1].strain".  Backend replies are JSON, with a small cleanup pass
for the usual LLM artifacts (code fences, unquoted keys, bare
number-with-unit values).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .errors import UnknownUnit
from .units import parse_unit

MAX_NESTING = 32


class SchemaNode:
    __slots__ = ()


@dataclass(frozen=True)
class TextF(SchemaNode):
    non_empty: bool = False

    def describe(self) -> str:
        return "text"


@dataclass(frozen=True)
class BoolF(SchemaNode):
    def describe(self) -> str:
        return "boolean"


@dataclass(frozen=True)
class NumberF(SchemaNode):
    unit: str | None = None  # expected dimension, via a reference unit tag

    def describe(self) -> str:
        return f"number [{self.unit}]" if self.unit else "number"


@dataclass(frozen=True)
class EnumF(SchemaNode):
    choices: tuple[str, ...]

    def __post_init__(self):
        if not self.choices:
            raise ValueError("enumeration needs at least one choice")

    def describe(self) -> str:
        return "one of " + "|".join(self.choices)


@dataclass(frozen=True)
class ListF(SchemaNode):
    item: SchemaNode
    min_items: int = 0

    def describe(self) -> str:
        return f"list of {self.item.describe()}"


@dataclass(frozen=True)
class FieldSpec:
    name: str
    schema: SchemaNode
    required: bool = True


@dataclass(frozen=True)
class RecordF(SchemaNode):
    fields: tuple[FieldSpec, ...]

    @staticmethod
    def of(**kwargs) -> "RecordF":
        """Record with all-required fields; wrap a node in `optional` to relax."""
        specs = []
        for name, node in kwargs.items():
            if isinstance(node, _Optional):
                specs.append(FieldSpec(name, node.inner, required=False))
            else:
                specs.append(FieldSpec(name, node, required=True))
        return RecordF(tuple(specs))

    def describe(self) -> str:
        parts = [
            f"{f.name}{'' if f.required else '?'}: {f.schema.describe()}" for f in self.fields
        ]
        return "{" + ", ".join(parts) + "}"


@dataclass(frozen=True)
class _Optional:
    inner: SchemaNode


def optional(node: SchemaNode) -> _Optional:
    return _Optional(node)


@dataclass(frozen=True)
class Quantity:
    value: float
    unit: str

    def standardized(self) -> float:
        from .units import standardize

        return standardize(self.value, self.unit)


# ---------------------------------------------------------------------------
# lenient JSON reading
# ---------------------------------------------------------------------------

_FENCE_RE = re.compile(r"^```[a-zA-Z]*\n|\n?```\s*$", re.MULTILINE)
_UNQUOTED_KEY_RE = re.compile(r'([{,]\s*)([A-Za-z_][A-Za-z0-9_\-]*)(\s*:)')
_BARE_VALUE_RE = re.compile(
    r'(:\s*)([-+]?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?\s+[^,\}\]"\s][^,\}\]]*)'
)


def read_reply(raw: str):
    """Parse backend text as JSON, tolerating fences, unquoted keys, and
    bare `<number> <unit>` values.  Returns (value, error_message)."""
    text = _FENCE_RE.sub("", raw).strip()
    for candidate in (text, _repair(text)):
        try:
            return json.loads(candidate), None
        except json.JSONDecodeError as err:
            last = str(err)
    return None, f"not parseable as JSON: {last}"


def _repair(text: str) -> str:
    fixed = _UNQUOTED_KEY_RE.sub(r'\1"\2"\3', text)
    fixed = _BARE_VALUE_RE.sub(lambda m: m.group(1) + json.dumps(m.group(2).strip()), fixed)
    return fixed


_QUANTITY_RE = re.compile(
    r"^\s*([-+]?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)\s*([A-Za-z%°][A-Za-z0-9%°/^*·.\-]*)?\s*$"
)


def _as_quantity(value, expected_unit):
    """Coerce number / '31.6 MPa' / {'value':..,'unit':..} into a Quantity.

    A bare number is read in the schema's reference unit when one is
    declared (the reply left the unit implied)."""
    if isinstance(value, bool):
        return None, "boolean is not a number"
    if isinstance(value, (int, float)):
        return Quantity(float(value), expected_unit or "1"), None
    if isinstance(value, str):
        m = _QUANTITY_RE.match(value)
        if not m:
            return None, f"cannot read {value!r} as a number with unit"
        return Quantity(float(m.group(1)), m.group(2) or "1"), None
    if isinstance(value, dict) and set(value) >= {"value"}:
        try:
            return Quantity(float(value["value"]), str(value.get("unit", "1"))), None
        except (TypeError, ValueError):
            return None, f"bad value field in {value!r}"
    return None, f"expected a number, got {type(value).__name__}"


def _check(node: SchemaNode, value, path: str, violations: list, depth: int):
    if depth > MAX_NESTING:
        violations.append((path, "nesting too deep"))
        return None
    if isinstance(node, TextF):
        if not isinstance(value, str):
            violations.append((path, f"expected text, got {type(value).__name__}"))
            return None
        if node.non_empty and not value.strip():
            violations.append((path, "must be non-empty"))
            return None
        return value
    if isinstance(node, BoolF):
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "false"):
            return value.lower() == "true"
        violations.append((path, f"expected boolean, got {value!r}"))
        return None
    if isinstance(node, EnumF):
        if isinstance(value, str) and value in node.choices:
            return value
        violations.append((path, f"{value!r} not one of {list(node.choices)}"))
        return None
    if isinstance(node, NumberF):
        qty, err = _as_quantity(value, node.unit)
        if err:
            violations.append((path, err))
            return None
        if node.unit is not None:
            try:
                expected = parse_unit(node.unit).dimension
                actual = parse_unit(qty.unit).dimension
            except UnknownUnit as uerr:
                violations.append((path, str(uerr)))
                return None
            if expected != actual:
                violations.append(
                    (path, f"unit {qty.unit!r} has dimension {actual}, expected {expected}")
                )
                return None
        return qty
    if isinstance(node, ListF):
        if not isinstance(value, list):
            violations.append((path, f"expected list, got {type(value).__name__}"))
            return None
        if len(value) < node.min_items:
            violations.append((path, f"needs at least {node.min_items} items"))
            return None
        return [
            _check(node.item, item, f"{path}[{i}]", violations, depth + 1)
            for i, item in enumerate(value)
        ]
    if isinstance(node, RecordF):
        if not isinstance(value, dict):
            violations.append((path, f"expected record, got {type(value).__name__}"))
            return None
        out = {}
        for spec in node.fields:
            child_path = f"{path}.{spec.name}" if path else spec.name
            if spec.name not in value or value[spec.name] is None:
                if spec.required:
                    violations.append((child_path, "required field missing"))
                continue
            out[spec.name] = _check(spec.schema, value[spec.name], child_path, violations, depth + 1)
        return out
    raise TypeError(f"unknown schema node {node!r}")


def validate_output(schema: SchemaNode, raw: str):
    """Validate raw backend text against a schema.

    Returns (value, violations): on success violations is empty; on
    failure value is None and every violation names its path.
    """
    data, err = read_reply(raw)
    if err:
        return None, [("$", err)]
    violations: list[tuple[str, str]] = []
    value = _check(schema, data, "", violations, 0)
    if violations:
        return None, violations
    return value, []
