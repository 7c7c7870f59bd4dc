"""Relevance screening: the conjunctive evidence gate plus retrieval metrics.

A document passes screening only when the backend finds *both* kinds of
evidence: experimental data and an explicit constitutive equation.  The
conjunction is enforced by construction, never trusted from the backend.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .backends import ReasoningBackend
from .errors import MissingTruth, PreconditionError, UndefinedMetric
from .schema import BoolF, RecordF, TextF, optional
from .skills import Skill, SkillResult, ToolScope, invoke_skill

SCREENING_SKILL = Skill(
    name="screening",
    persona="Domain Filter",
    instruction_template=(
        "Judge publication {bundle_id} for creep-database relevance.  Read the "
        "document text and decide two independent evidence questions: does it "
        "report experimental creep data (has_data), and does it state an "
        "explicit constitutive equation (has_equation)?  Pure simulation or "
        "theory-only studies fail has_data.  Answer as JSON with boolean "
        "fields has_data, has_equation and a short rationale."
    ),
    allowed_tools=frozenset({"read_pages"}),
    output_schema=RecordF.of(
        has_data=BoolF(), has_equation=BoolF(), rationale=optional(TextF())
    ),
    max_retries=1,
)


@dataclass(frozen=True)
class ScreeningDecision:
    bundle_id: str
    has_data: bool
    has_equation: bool
    rationale: str = ""
    passed: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "passed", self.has_data and self.has_equation)
        if not self.passed and not self.rationale:
            missing = []
            if not self.has_data:
                missing.append("no experimental data found")
            if not self.has_equation:
                missing.append("no explicit constitutive equation found")
            object.__setattr__(self, "rationale", "; ".join(missing))


def screen(bundle, backend: ReasoningBackend, *, scope: ToolScope | None = None) -> ScreeningDecision:
    """Run the conjunctive gate on one bundle; BackendFailure propagates."""
    if not bundle.pages:
        raise PreconditionError("bundle has no pages")
    context = {
        "bundle_id": bundle.id,
        "title": bundle.title,
        "text": bundle.full_text(),
    }
    result: SkillResult = invoke_skill(SCREENING_SKILL, context, backend, scope=scope)
    value = result.value
    return ScreeningDecision(
        bundle_id=bundle.id,
        has_data=bool(value["has_data"]),
        has_equation=bool(value["has_equation"]),
        rationale=str(value.get("rationale", "")),
    )


# ---------------------------------------------------------------------------
# retrieval metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise PreconditionError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion(decisions, truth: dict[str, bool]) -> ConfusionCounts:
    """Tally decisions against ground truth (bundle_id -> relevant)."""
    tp = fp = tn = fn = 0
    for d in decisions:
        if d.bundle_id not in truth:
            raise MissingTruth(f"no ground truth for bundle {d.bundle_id!r}")
        relevant = bool(truth[d.bundle_id])
        if d.passed and relevant:
            tp += 1
        elif d.passed and not relevant:
            fp += 1
        elif not d.passed and relevant:
            fn += 1
        else:
            tn += 1
    return ConfusionCounts(tp, fp, tn, fn)


def precision(c: ConfusionCounts) -> float:
    if c.tp + c.fp == 0:
        raise UndefinedMetric("precision undefined: no positive predictions")
    return c.tp / (c.tp + c.fp)


def recall(c: ConfusionCounts) -> float:
    if c.tp + c.fn == 0:
        raise UndefinedMetric("recall undefined: no relevant documents")
    return c.tp / (c.tp + c.fn)


def harmonic_f1(p: float, r: float) -> float:
    if p + r == 0:
        raise UndefinedMetric("f1 undefined: precision + recall is zero")
    return 2.0 * p * r / (p + r)


def f1(c: ConfusionCounts) -> float:
    return harmonic_f1(precision(c), recall(c))


def accuracy(c: ConfusionCounts) -> float:
    if c.total == 0:
        raise UndefinedMetric("accuracy undefined: no decisions")
    return (c.tp + c.tn) / c.total
