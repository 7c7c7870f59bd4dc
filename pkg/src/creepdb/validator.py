"""Physics guardrail: the validation triad plus the cross-modal R-squared gate.

Every candidate equation/curve pair runs three textual legs
(completeness, physical relevance, unit integrity) and, when both a
curve and an executable model exist, a cross-modal comparison of the
digitized points against the trajectory reconstructed from the
text-extracted parameters.  Verdicts: Valid, Flagged (manual review),
Rejected.  Text-only entries that pass all legs are admitted as
Valid-TextOnly so that equation-only publications stay queryable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .errors import (
    ConstraintViolation,
    DegenerateObservations,
    NumericalOverflow,
    PreconditionError,
    SingularJacobian,
    UnboundSymbol,
)
from .formula import Equation, check_homogeneity
from .models import ConstitutiveModel, evaluate, fit_parameters, r_squared

STRAIN_MIN = -0.01
STRAIN_MAX = 2.0

VERDICT_VALID = "Valid"
VERDICT_VALID_TEXT_ONLY = "Valid-TextOnly"
VERDICT_FLAGGED = "Flagged"
VERDICT_REJECTED = "Rejected"


@dataclass(frozen=True)
class Thresholds:
    valid: float = 0.9
    review: float = 0.5


@dataclass(frozen=True)
class CreepCurve:
    """Digitized (time, strain) series in canonical units."""

    times: np.ndarray
    strains: np.ndarray
    flags: tuple[str, ...] = ()
    figure_id: str = ""
    series_label: str = ""

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        s = np.asarray(self.strains, dtype=np.float64)
        if t.ndim != 1 or t.shape != s.shape or t.size == 0:
            raise ConstraintViolation("curve needs matching non-empty time/strain arrays")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ConstraintViolation("curve times must be strictly increasing")
        if np.any(s < STRAIN_MIN) or np.any(s > STRAIN_MAX):
            raise ConstraintViolation(
                f"strain outside sanity band [{STRAIN_MIN}, {STRAIN_MAX}]; "
                "likely axis-calibration error"
            )
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "strains", s)

    def __len__(self) -> int:
        return int(self.times.size)


@dataclass
class CandidateEntry:
    """One prospective equation/data record, as assembled by extraction."""

    bundle_id: str
    doi: str
    material: str
    category: str
    conditions: dict  # canonical: {"T": K, "sigma": MPa}
    lhs: ex.Expr | None = None
    rhs: ex.Expr | None = None
    equation_text: str = ""
    equation_error: str = ""
    equation: Equation | None = None  # built only when bindings are complete
    binding_error: str = ""
    model: ConstitutiveModel | None = None
    text_params: dict = field(default_factory=dict)  # canonical values
    curve: CreepCurve | None = None
    curve_error: str = ""
    evidence: dict = field(default_factory=dict)  # figure_id, text locations

    def __post_init__(self):
        has_equation = (
            self.lhs is not None or self.equation is not None or bool(self.equation_text)
        )
        if not has_equation and self.curve is None:
            raise PreconditionError("entry needs an equation or a curve")


@dataclass(frozen=True)
class LegResult:
    passed: bool
    reason: str = ""
    detail: dict = field(default_factory=dict)


@dataclass(frozen=True)
class CrossModalResult:
    r2: float | None
    params_source: str  # text | fitted | mixed
    passed: bool
    recommend: str  # Valid | Flagged | Rejected
    error: str = ""


@dataclass(frozen=True)
class ValidationReport:
    completeness: LegResult
    relevance: LegResult
    integrity: LegResult
    cross_modal: CrossModalResult | None
    verdict: str
    detail: str = ""

    def to_json(self) -> dict:
        return {
            "completeness": {"pass": self.completeness.passed, "reason": self.completeness.reason},
            "relevance": {"pass": self.relevance.passed, "reason": self.relevance.reason},
            "integrity": {"pass": self.integrity.passed, "reason": self.integrity.reason},
            "cross_modal": None
            if self.cross_modal is None
            else {
                "r2": self.cross_modal.r2,
                "params_source": self.cross_modal.params_source,
                "pass": self.cross_modal.passed,
                "recommend": self.cross_modal.recommend,
                "error": self.cross_modal.error,
            },
            "verdict": self.verdict,
            "detail": self.detail,
        }


# ---------------------------------------------------------------------------
# the three textual legs
# ---------------------------------------------------------------------------


def check_completeness(entry: CandidateEntry) -> LegResult:
    """A complete entry has a parsed equation with symbols on both sides."""
    if entry.lhs is None or entry.rhs is None:
        reason = entry.equation_error or "no equation extracted"
        return LegResult(False, f"ParseError: {reason}")
    if not ex.free_symbols(entry.lhs) or not ex.free_symbols(entry.rhs):
        return LegResult(False, "DescriptiveFragment: a side carries no symbols")
    return LegResult(True)


def _binding_roles(entry: CandidateEntry) -> dict[str, str]:
    if entry.equation is not None:
        return {b.symbol: b.role for b in entry.equation.bindings}
    return {}


def check_relevance(entry: CandidateEntry) -> LegResult:
    """Time-dependent deformation: the equation must involve time (the
    time symbol, a time derivative, or an ODE) and describe strain."""
    roles = _binding_roles(entry)
    time_symbols = {s for s, r in roles.items() if r == "time"}
    syms = ex.free_symbols(entry.lhs) | ex.free_symbols(entry.rhs)
    has_time = (
        bool(time_symbols & syms)
        or ex.contains_derivative(entry.lhs)
        or ex.contains_derivative(entry.rhs)
        or (entry.model is not None and entry.model.kind == "ode")
    )
    if not has_time:
        return LegResult(False, "NotTimeDependent: no time symbol or derivative")

    lhs = entry.lhs
    lhs_role = None
    if isinstance(lhs, ex.Sym):
        lhs_role = roles.get(lhs.name)
    elif isinstance(lhs, ex.Deriv):
        target_role = roles.get(lhs.target)
        wrt_role = roles.get(lhs.wrt)
        if target_role in ("strain", "strain_rate") and wrt_role == "time":
            lhs_role = "strain_rate"
    elif entry.equation is not None:
        # composite lhs (e.g. second-order form): accept when it contains a
        # derivative of a strain-role symbol with respect to time
        for node_target, node_wrt in _derivative_pairs(lhs):
            if roles.get(node_target) in ("strain", "strain_rate") and roles.get(node_wrt) == "time":
                lhs_role = "strain_rate"
                break
    if lhs_role not in ("strain", "strain_rate"):
        return LegResult(False, "NotStrainLhs: left side is not strain or strain rate")
    return LegResult(True)


def _derivative_pairs(e: ex.Expr):
    if isinstance(e, ex.Deriv):
        yield e.target, e.wrt
    elif isinstance(e, (ex.Add, ex.Sub, ex.Mul, ex.Div)):
        yield from _derivative_pairs(e.left)
        yield from _derivative_pairs(e.right)
    elif isinstance(e, ex.Neg):
        yield from _derivative_pairs(e.child)
    elif isinstance(e, ex.Pow):
        yield from _derivative_pairs(e.base)
    elif isinstance(e, ex.Func):
        yield from _derivative_pairs(e.arg)


def check_integrity(entry: CandidateEntry) -> LegResult:
    """Every symbol bound and the equation dimensionally homogeneous."""
    if entry.equation is None:
        reason = entry.binding_error or "symbols are not fully bound"
        return LegResult(False, reason)
    report = check_homogeneity(entry.equation)
    if not report.passed:
        return LegResult(False, "; ".join(report.failures), {"homogeneity": report.failures})
    return LegResult(True, detail={"dimension": str(report.lhs_dim)})


# ---------------------------------------------------------------------------
# cross-modal gate
# ---------------------------------------------------------------------------


def cross_modal_check(entry: CandidateEntry, thresholds: Thresholds = Thresholds()) -> CrossModalResult:
    """Reconstruct the trajectory from text parameters and score it
    against the digitized curve.  Missing parameters are fitted (the
    params_source records that)."""
    if entry.curve is None or entry.model is None:
        raise PreconditionError("cross-modal check needs both a curve and a model")
    model = entry.model
    curve = entry.curve
    provided = {k: v for k, v in entry.text_params.items() if k in model.parameters}
    missing = [p for p in model.parameters if p not in provided]
    params_source = "text" if not missing else ("fitted" if not provided else "mixed")

    try:
        params = dict(provided)
        if missing:
            init = {}
            for p in missing:
                b = model.equation.binding_map.get(p)
                init[p] = b.standardized_value() if b is not None and b.value is not None else 1.0
            fit = fit_parameters(
                model, curve.times, curve.strains, entry.conditions, init, fixed=provided
            )
            params.update(fit.values)
        predicted = evaluate(model, params, entry.conditions, curve.times)
        r2 = r_squared(curve.strains, predicted)
    except DegenerateObservations as err:
        return CrossModalResult(None, params_source, False, VERDICT_FLAGGED, str(err))
    except (NumericalOverflow, SingularJacobian, UnboundSymbol, PreconditionError) as err:
        return CrossModalResult(None, params_source, False, VERDICT_FLAGGED, str(err))

    if r2 > thresholds.valid:
        return CrossModalResult(r2, params_source, True, VERDICT_VALID)
    if r2 > thresholds.review:
        return CrossModalResult(r2, params_source, False, VERDICT_FLAGGED)
    return CrossModalResult(r2, params_source, False, VERDICT_REJECTED)


# ---------------------------------------------------------------------------
# verdict composition
# ---------------------------------------------------------------------------


def validate_entry(entry: CandidateEntry, thresholds: Thresholds = Thresholds()) -> ValidationReport:
    completeness = check_completeness(entry)
    if not completeness.passed:
        skipped = LegResult(False, "not evaluated: completeness failed")
        return ValidationReport(completeness, skipped, skipped, None, VERDICT_REJECTED)

    relevance = check_relevance(entry)
    integrity = check_integrity(entry)
    if not relevance.passed or not integrity.passed:
        return ValidationReport(completeness, relevance, integrity, None, VERDICT_REJECTED)

    cross = None
    if entry.curve is not None and entry.model is not None:
        cross = cross_modal_check(entry, thresholds)
        verdict = cross.recommend if not cross.passed else VERDICT_VALID
        return ValidationReport(completeness, relevance, integrity, cross, verdict)

    if entry.curve is None:
        if entry.curve_error:
            return ValidationReport(
                completeness,
                relevance,
                integrity,
                None,
                VERDICT_FLAGGED,
                detail=f"curve extraction failed: {entry.curve_error}",
            )
        return ValidationReport(
            completeness, relevance, integrity, None, VERDICT_VALID_TEXT_ONLY,
            detail="text-only entry: no digitizable curve",
        )
    # curve without an executable model: cross-modal evidence unverifiable
    return ValidationReport(
        completeness, relevance, integrity, None, VERDICT_FLAGGED,
        detail="curve present but no executable model form",
    )
