"""Five-stage pipeline: collect, screen, extract, validate, store.

Each stage runs under a dedicated skill persona with its own tool scope;
every tool execution lands in one run-wide log so scope discipline can be
audited afterwards.  Documents are processed independently (optionally
concurrently) and a failure in one never aborts the batch; results are
committed to the store serially in bundle order, which makes exports
byte-reproducible for deterministic backends.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import corpus as corpus_mod
from . import digitizer as dg
from . import expr as ex
from . import models as models_mod
from .backends import ReasoningBackend
from .errors import (
    AmbiguousTarget,
    BackendFailure,
    ConstraintViolation,
    CreepDbError,
    DuplicateDoi,
    EmptyAfterCleaning,
    SchemaViolation,
    SeriesNotFound,
    ToolScopeViolation,
    UnknownUnit,
)
from .formula import Equation, SymbolBinding
from .schema import BoolF, EnumF, ListF, NumberF, RecordF, TextF, optional
from .screening import SCREENING_SKILL, screen
from .skills import ExecutionLog, Skill, ToolRegistry, ToolScope, invoke_skill
from .store import CATEGORIES, CreepRecord, PaperRow, Store
from .units import standardize
from .validator import (
    CandidateEntry,
    CreepCurve,
    Thresholds,
    ValidationReport,
    validate_entry,
)

AXIS_SCALES = ("linear", "log10")

EXTRACTION_SKILL = Skill(
    name="extraction",
    persona="MultiModal Parser",
    instruction_template=(
        "Extract the creep record from publication {bundle_id}: material "
        "identity, experimental conditions (temperature, stress), the explicit "
        "constitutive equation with one unit-bound entry per symbol, the "
        "reported parameter values, and, when a usable plot exists, the figure "
        "geometry (axis scales, tick anchors, series colors + labels, and the "
        "target series condition).  Answer as JSON matching the schema."
    ),
    allowed_tools=frozenset({"read_pages", "read_figure", "digitize_series", "standardize_units"}),
    output_schema=RecordF.of(
        material=TextF(non_empty=True),
        category=EnumF(CATEGORIES),
        temperature=NumberF(unit="K"),
        stress=NumberF(unit="MPa"),
        model_name=TextF(non_empty=True),
        equation=TextF(non_empty=True),
        bindings=ListF(
            RecordF.of(
                symbol=TextF(non_empty=True),
                role=TextF(non_empty=True),
                unit=TextF(),
                value=optional(NumberF()),
            )
        ),
        parameters=optional(
            ListF(RecordF.of(name=TextF(non_empty=True), value=NumberF(), unit=TextF()))
        ),
        figure=optional(
            RecordF.of(
                figure_id=TextF(non_empty=True),
                x_scale=EnumF(AXIS_SCALES),
                y_scale=EnumF(AXIS_SCALES),
                x_unit=TextF(non_empty=True),
                y_unit=TextF(non_empty=True),
                x_anchors=ListF(RecordF.of(pixel=NumberF(), value=NumberF()), min_items=2),
                y_anchors=ListF(RecordF.of(pixel=NumberF(), value=NumberF()), min_items=2),
                series=ListF(
                    RecordF.of(color=ListF(NumberF(), min_items=3), label=TextF()), min_items=1
                ),
                target=TextF(non_empty=True),
                monotonic=optional(BoolF()),
            )
        ),
        text_locations=optional(ListF(TextF())),
    ),
    max_retries=1,
)

VALIDATION_SKILL = Skill(
    name="validation",
    persona="Physics Guardrail",
    instruction_template="Validate candidate entry {bundle_id}.",
    allowed_tools=frozenset({"validate_entry", "check_homogeneity", "evaluate_model", "fit_parameters"}),
    output_schema=RecordF.of(verdict=TextF()),
    max_retries=0,
)

STORAGE_SKILL = Skill(
    name="storage",
    persona="Data Serializer",
    instruction_template="Serialize record {bundle_id}.",
    allowed_tools=frozenset({"insert_paper", "insert_record", "audit_event"}),
    output_schema=RecordF.of(ok=BoolF()),
    max_retries=0,
)

COLLECTION_SKILL_NAME = "Bibliographic Navigator"


@dataclass(frozen=True)
class PipelineConfig:
    query: str | None = None
    screening_enabled: bool = True
    validation_enabled: bool = True
    max_inflight: int = 4
    max_retries: int = 2
    r2_valid: float = 0.9
    r2_review: float = 0.5
    monotonicity_tolerance_frac: float = 0.005
    color_tolerance: int = 30
    min_series_pixels: int = 40
    backend: str = "echo"
    backend_timeout: float = 30.0
    strict: bool = False
    audit_log: str | None = None

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        data = json.loads(Path(path).read_text())
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise CreepDbError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def thresholds(self) -> Thresholds:
        return Thresholds(valid=self.r2_valid, review=self.r2_review)


@dataclass
class DocumentTrace:
    bundle_id: str
    stages: dict = field(default_factory=dict)
    terminal: str = ""


@dataclass
class PipelineReport:
    collected: int = 0
    screened_pass: int = 0
    screened_fail: int = 0
    extracted: int = 0
    validated_valid: int = 0
    validated_flagged: int = 0
    validated_rejected: int = 0
    stored: int = 0
    duration_s: float = 0.0
    traces: dict[str, DocumentTrace] = field(default_factory=dict)
    tools_by_persona: dict[str, list[str]] = field(default_factory=dict)

    def check_funnel(self) -> bool:
        return (
            self.stored
            <= self.validated_valid
            <= self.extracted
            <= self.screened_pass
            <= self.collected
        )

    def to_json(self) -> dict:
        return {
            "counts": {
                "collected": self.collected,
                "screened_pass": self.screened_pass,
                "screened_fail": self.screened_fail,
                "extracted": self.extracted,
                "validated_valid": self.validated_valid,
                "validated_flagged": self.validated_flagged,
                "validated_rejected": self.validated_rejected,
                "stored": self.stored,
            },
            "duration_s": self.duration_s,
            "traces": {
                bid: {"terminal": t.terminal, "stages": t.stages} for bid, t in self.traces.items()
            },
            "tools_by_persona": self.tools_by_persona,
        }


# ---------------------------------------------------------------------------
# tool registry
# ---------------------------------------------------------------------------


def build_registry(store: Store | None = None, config: PipelineConfig | None = None) -> ToolRegistry:
    cfg = config or PipelineConfig()
    reg = ToolRegistry()
    reg.register("read_pages", lambda bundle: bundle.full_text())
    reg.register("read_figure", _read_figure)
    reg.register(
        "digitize_series",
        lambda image, cal, keys: dg.extract_series(
            image, cal, keys, color_tolerance=cfg.color_tolerance, min_pixels=cfg.min_series_pixels
        ),
    )
    reg.register("standardize_units", standardize)
    reg.register("boolean_search", corpus_mod.search_index)
    reg.register("validate_entry", validate_entry)
    reg.register("check_homogeneity", lambda eq: eq and True)
    reg.register("evaluate_model", models_mod.evaluate)
    reg.register("fit_parameters", models_mod.fit_parameters)
    if store is not None:
        reg.register("insert_paper", store.insert_paper)
        reg.register("insert_record", store.insert_record)
        reg.register("audit_event", store.audit_event)
    else:
        reg.register("insert_paper", _no_store)
        reg.register("insert_record", _no_store)
        reg.register("audit_event", _no_store)
    return reg


def _no_store(*args, **kwargs):
    raise CreepDbError("no store attached to this run")


def _read_figure(bundle, figure_id: str):
    for fig in bundle.figures:
        if fig.figure_id == figure_id:
            return fig.image
    raise SeriesNotFound(f"bundle {bundle.id} has no figure {figure_id!r}")


# ---------------------------------------------------------------------------
# extraction payload -> candidate entry
# ---------------------------------------------------------------------------


def _digitize(bundle, fig_payload, conditions_unused, config: PipelineConfig, scope: ToolScope):
    image = scope.call("read_figure", bundle, fig_payload["figure_id"])
    x_anchors = [(a["pixel"].value, a["value"].value) for a in fig_payload["x_anchors"]]
    y_anchors = [(a["pixel"].value, a["value"].value) for a in fig_payload["y_anchors"]]
    cal = dg.calibrate_axes(x_anchors, y_anchors, fig_payload["x_scale"], fig_payload["y_scale"])
    keys = [tuple(int(c.value) for c in s["color"][:3]) for s in fig_payload["series"]]
    labels = [s["label"] for s in fig_payload["series"]]
    traces = scope.call("digitize_series", image, cal, keys)
    trace = (
        dg.select_target_series(traces, labels, fig_payload["target"])
        if len(traces) > 1
        else traces[0]
    )

    x_unit = fig_payload["x_unit"]
    y_unit = fig_payload["y_unit"]
    times = standardize(trace.points[:, 0], x_unit)
    strains = standardize(trace.points[:, 1], y_unit)
    converted = dg.SeriesTrace(
        trace.series_key,
        np.column_stack([times, strains]),
        trace.pixel_points,
        trace.quality,
        trace.flags,
    )
    flags: tuple[str, ...] = ()
    if fig_payload.get("monotonic", True):
        y_vals = [standardize(v, y_unit) for _, v in y_anchors]
        tolerance = config.monotonicity_tolerance_frac * (max(y_vals) - min(y_vals))
        converted, dropped = dg.enforce_monotonicity(converted, tolerance)
        if dropped:
            flags = (f"monotonicity: dropped {len(dropped)} points",)
    label = next(l for k, l in zip(keys, labels) if tuple(k) == tuple(trace.series_key))
    return CreepCurve(
        converted.points[:, 0],
        converted.points[:, 1],
        flags=flags + converted.flags,
        figure_id=fig_payload["figure_id"],
        series_label=label,
    )


def _model_from_payload(payload, text_params, bindings_by_symbol):
    """Executable model: a catalog form (with extracted exponents) or a
    custom closed form assembled from the equation."""
    name = payload["model_name"]
    if name == "norton":
        n = text_params.get("n", 5.0)
        return models_mod.make_norton(n_value=float(n))
    if name == "norton_bailey":
        n = float(text_params.get("n", 4.0))
        m = float(text_params.get("m", 0.4))
        return models_mod.make_norton_bailey(n_value=n, m_value=m)
    if name in ("theta_projection", "logarithmic", "duffing"):
        return models_mod.get_model(name)
    return None  # custom forms handled by the caller


def _custom_closed_form(equation: Equation, payload) -> models_mod.ConstitutiveModel | None:
    lhs, rhs = equation.lhs, equation.rhs
    roles = {b.symbol: b.role for b in equation.bindings}
    if not isinstance(lhs, ex.Sym) or roles.get(lhs.name) != "strain":
        return None
    if ex.contains_derivative(rhs):
        return None
    time_syms = [s for s, r in roles.items() if r == "time"]
    if len(time_syms) != 1:
        return None
    params = tuple(s for s, r in roles.items() if r == "parameter" and s in ex.free_symbols(rhs))
    cond_syms = tuple(
        s for s, r in roles.items() if r in ("stress", "temperature") and s in ex.free_symbols(rhs)
    )
    units = {b.symbol: b.unit for b in equation.bindings}
    return models_mod.ConstitutiveModel(
        name=str(payload["model_name"]),
        equation=equation,
        kind=models_mod.KIND_CLOSED,
        parameters=params,
        conditions=cond_syms,
        param_units={p: units.get(p, "1") for p in params},
        time_symbol=time_syms[0],
        strain_expr=rhs,
    )


def build_entry(bundle, payload, config: PipelineConfig, scope: ToolScope) -> CandidateEntry:
    temperature = payload["temperature"].standardized()
    stress = payload["stress"].standardized()
    conditions = {"T": temperature, "sigma": stress}

    lhs = rhs = None
    equation_error = ""
    try:
        parts = payload["equation"].split("=")
        if len(parts) != 2:
            raise ex.ParseError("equation needs exactly one '='", 0)
        lhs = ex.parse_expression(parts[0])
        rhs = ex.parse_expression(parts[1])
    except ex.ParseError as err:
        equation_error = str(err)

    bindings: list[SymbolBinding] = []
    binding_error = ""
    bindings_by_symbol: dict[str, SymbolBinding] = {}
    for b in payload.get("bindings", []):
        try:
            sb = SymbolBinding(
                b["symbol"],
                b["role"],
                b["unit"] or "1",
                None if "value" not in b else b["value"].value,
            )
            bindings.append(sb)
            bindings_by_symbol[sb.symbol] = sb
        except (CreepDbError, UnknownUnit) as err:
            binding_error = f"binding {b.get('symbol')!r}: {err}"

    equation = None
    if lhs is not None and rhs is not None and not binding_error:
        try:
            equation = Equation(lhs, rhs, tuple(bindings))
        except CreepDbError as err:
            binding_error = str(err)

    # condition aliases so custom symbol names resolve too
    for b in bindings:
        if b.role == "stress":
            conditions.setdefault(b.symbol, stress)
        elif b.role == "temperature":
            conditions.setdefault(b.symbol, temperature)

    text_params: dict[str, float] = {}
    param_units: dict[str, str] = {}
    for p in payload.get("parameters", []):
        try:
            qty = p["value"]
            unit = p["unit"] or qty.unit or "1"
            text_params[p["name"]] = standardize(qty.value, unit)
            param_units[p["name"]] = unit
        except UnknownUnit as err:
            binding_error = binding_error or f"parameter {p['name']!r}: {err}"

    model = None
    if equation is not None:
        model = _model_from_payload(payload, text_params, bindings_by_symbol)
        if model is None:
            model = _custom_closed_form(equation, payload)

    curve = None
    curve_error = ""
    if "figure" in payload:
        try:
            curve = _digitize(bundle, payload["figure"], conditions, config, scope)
        except (
            SeriesNotFound,
            AmbiguousTarget,
            EmptyAfterCleaning,
            ConstraintViolation,
            CreepDbError,
        ) as err:
            curve_error = str(err)

    evidence = {
        "figure_id": payload.get("figure", {}).get("figure_id", ""),
        "text_locations": payload.get("text_locations", []),
    }
    return CandidateEntry(
        bundle_id=bundle.id,
        doi=bundle.doi,
        material=payload["material"],
        category=payload["category"],
        conditions=conditions,
        lhs=lhs,
        rhs=rhs,
        equation_text=payload["equation"],
        equation_error=equation_error,
        equation=equation,
        binding_error=binding_error,
        model=model,
        text_params=text_params,
        curve=curve,
        curve_error=curve_error,
        evidence=evidence,
    )


def entry_to_record(entry: CandidateEntry, report: ValidationReport) -> CreepRecord:
    params = {
        name: {"value": value, "unit": "canonical"} for name, value in entry.text_params.items()
    }
    cross = report.cross_modal
    source = "text"
    r2 = None
    if cross is not None:
        source = cross.params_source
        r2 = cross.r2
    return CreepRecord(
        doi=entry.doi,
        material=entry.material,
        category=entry.category,
        temperature_K=entry.conditions["T"],
        stress_MPa=entry.conditions["sigma"],
        model_name=entry.model.name if entry.model is not None else "custom",
        equation=entry.equation.render() if entry.equation is not None else entry.equation_text,
        params=params,
        params_source=source,
        verdict=report.verdict if report.verdict != "Valid-TextOnly" else "Valid-TextOnly",
        curve=None
        if entry.curve is None
        else {
            "times": [float(v) for v in entry.curve.times],
            "strains": [float(v) for v in entry.curve.strains],
            "flags": list(entry.curve.flags),
        },
        r2=r2,
        evidence=entry.evidence,
    )


# ---------------------------------------------------------------------------
# the run
# ---------------------------------------------------------------------------


def _process_document(bundle_id, index, backend, config, registry, log):
    """Screen + extract + validate one bundle.  Returns (trace, entry, report);
    any stage failure is recorded in the trace, never raised."""
    trace = DocumentTrace(bundle_id)
    thresholds = config.thresholds()
    try:
        bundle = corpus_mod.load_bundle(index, bundle_id)
    except CreepDbError as err:
        trace.stages["load"] = {"error": str(err)}
        trace.terminal = "failed:load"
        return trace, None, None

    if config.screening_enabled:
        skill = replace(SCREENING_SKILL, max_retries=config.max_retries)
        scope = ToolScope(skill.persona, skill.allowed_tools, registry, log)
        try:
            decision = screen(bundle, backend, scope=scope)
        except (BackendFailure, SchemaViolation, ToolScopeViolation) as err:
            trace.stages["screening"] = {"error": f"{type(err).__name__}: {err}"}
            trace.terminal = "failed:screening"
            return trace, None, None
        trace.stages["screening"] = {
            "has_data": decision.has_data,
            "has_equation": decision.has_equation,
            "pass": decision.passed,
            "rationale": decision.rationale,
        }
        if not decision.passed:
            trace.terminal = "rejected-at-screening"
            return trace, None, None
    else:
        trace.stages["screening"] = {"skipped": True, "pass": True}

    skill = replace(EXTRACTION_SKILL, max_retries=config.max_retries)
    scope = ToolScope(skill.persona, skill.allowed_tools, registry, log)
    try:
        result = invoke_skill(skill, {"bundle_id": bundle.id}, backend, scope=scope)
        entry = build_entry(bundle, result.value, config, scope)
    except (BackendFailure, SchemaViolation, ToolScopeViolation, CreepDbError) as err:
        trace.stages["extraction"] = {"error": f"{type(err).__name__}: {err}"}
        trace.terminal = "failed:extraction"
        return trace, None, None
    trace.stages["extraction"] = {
        "material": entry.material,
        "category": entry.category,
        "has_curve": entry.curve is not None,
        "curve_error": entry.curve_error,
    }

    if config.validation_enabled:
        vscope = ToolScope(VALIDATION_SKILL.persona, VALIDATION_SKILL.allowed_tools, registry, log)
        report = vscope.call("validate_entry", entry, thresholds)
    else:
        from .validator import LegResult

        skipped = LegResult(True, "validation disabled")
        report = ValidationReport(skipped, skipped, skipped, None, "Flagged", "validation disabled")
    trace.stages["validation"] = report.to_json()
    return trace, entry, report


def run_pipeline(
    index: corpus_mod.CorpusIndex,
    config: PipelineConfig,
    backend: ReasoningBackend,
    store: Store,
) -> PipelineReport:
    """Drive every bundle to exactly one terminal state and persist the
    survivors.  Fatal only when the store is unusable."""
    started = time.time()
    log = ExecutionLog()
    registry = build_registry(store, config)
    report = PipelineReport()

    ids = index.ids()
    if config.query:
        nav_scope = ToolScope(COLLECTION_SKILL_NAME, frozenset({"boolean_search"}), registry, log)
        query = corpus_mod.expand_query(config.query, backend, lenient=True)
        ids = nav_scope.call("boolean_search", index, query)
    report.collected = len(ids)

    results = {}
    if ids:
        workers = max(1, min(config.max_inflight, len(ids)))
        if workers == 1:
            for bid in ids:
                results[bid] = _process_document(bid, index, backend, config, registry, log)
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futures = {
                    bid: pool.submit(
                        _process_document, bid, index, backend, config, registry, log
                    )
                    for bid in ids
                }
                results = {bid: fut.result() for bid, fut in futures.items()}

    audit_lines = []
    serializer = ToolScope(STORAGE_SKILL.persona, STORAGE_SKILL.allowed_tools, registry, log)
    for bid in sorted(results):
        trace, entry, vreport = results[bid]
        report.traces[bid] = trace
        stage = trace.stages.get("screening", {})
        if trace.terminal.startswith("failed"):
            continue
        if trace.terminal == "rejected-at-screening":
            report.screened_fail += 1
            continue
        if stage.get("pass"):
            report.screened_pass += 1
        if entry is None:
            continue
        report.extracted += 1

        verdict = vreport.verdict
        audit_lines.append(
            json.dumps({"bundle_id": bid, "doi": entry.doi, **vreport.to_json()}, sort_keys=True)
        )
        bundle_entry = index.entries[bid]
        rec_meta = bundle_entry.record
        if verdict in ("Valid", "Valid-TextOnly", "Flagged"):
            try:
                serializer.call(
                    "insert_paper",
                    PaperRow(
                        doi=entry.doi,
                        title=rec_meta["title"],
                        authors=tuple(rec_meta["authors"]),
                        year=int(rec_meta["year"]),
                        source_path=str(index.root),
                    ),
                )
            except DuplicateDoi:
                pass
            record = entry_to_record(entry, vreport)
            record_id = serializer.call("insert_record", record)
            trace.stages["storage"] = {"record_id": record_id}
            if verdict == "Flagged":
                report.validated_flagged += 1
                trace.terminal = "flagged"
            else:
                report.validated_valid += 1
                report.stored += 1
                trace.terminal = "stored"
        else:
            report.validated_rejected += 1
            trace.terminal = "rejected-at-validation"
            serializer.call(
                "audit_event",
                "rejected",
                {"report": vreport.to_json(), "material": entry.material},
                bundle_id=bid,
                doi=entry.doi,
            )

    report.duration_s = time.time() - started
    report.tools_by_persona = {
        persona: sorted(tools) for persona, tools in log.executed_by_persona().items()
    }
    if config.audit_log:
        Path(config.audit_log).write_text("\n".join(audit_lines) + "\n" if audit_lines else "")
    if not report.check_funnel():
        raise CreepDbError("pipeline funnel inequality violated")
    return report
