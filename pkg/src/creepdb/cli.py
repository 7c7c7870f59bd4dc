"""Command-line entry points for every pipeline stage.

Exit codes: 0 success, 1 per-document failure under --strict, 2 fatal
error, 64 usage error.
"""

from __future__ import annotations

import csv
import io
import json
import os
import sys
from pathlib import Path

import click

from . import corpus as corpus_mod
from . import screening as screening_mod
from .backends import make_backend
from .errors import CreepDbError, UndefinedMetric
from .pipeline import PipelineConfig, run_pipeline
from .store import RecordFilter, Store

EXIT_OK = 0
EXIT_DOC_FAILURES = 1
EXIT_FATAL = 2
EXIT_USAGE = 64


def _load_config(config_path: str | None) -> PipelineConfig:
    path = config_path or os.environ.get("CREEPDB_CONFIG")
    if path:
        return PipelineConfig.from_file(path)
    return PipelineConfig()


def _filter_options(fn):
    fn = click.option("--material", default=None, help="material substring")(fn)
    fn = click.option("--category", default=None)(fn)
    fn = click.option("--t-min-k", "t_min_K", type=float, default=None)(fn)
    fn = click.option("--t-max-k", "t_max_K", type=float, default=None)(fn)
    fn = click.option("--s-min-mpa", "s_min_MPa", type=float, default=None)(fn)
    fn = click.option("--s-max-mpa", "s_max_MPa", type=float, default=None)(fn)
    fn = click.option("--verdict", "verdicts", multiple=True)(fn)
    return fn


def _make_filter(material, category, t_min_K, t_max_K, s_min_MPa, s_max_MPa, verdicts):
    return RecordFilter(
        material=material,
        category=category,
        t_min_K=t_min_K,
        t_max_K=t_max_K,
        s_min_MPa=s_min_MPa,
        s_max_MPa=s_max_MPa,
        verdicts=tuple(verdicts) or None,
    )


@click.group()
def cli():
    """Creep-literature mining pipeline."""


@cli.command()
@click.option("--corpus", "manifest", required=True, type=click.Path())
def ingest(manifest):
    """Validate and index a document-bundle manifest."""
    index = corpus_mod.ingest_manifest(manifest)
    click.echo(json.dumps({"bundles": len(index), "ids": index.ids()}))


@cli.command()
@click.option("--corpus", "manifest", required=True, type=click.Path())
@click.option("--query", "nl_query", required=True)
@click.option("--backend", "backend_spec", default="echo")
@click.option("--lenient", is_flag=True, default=False)
def search(manifest, nl_query, backend_spec, lenient):
    """Expand a natural-language query and run it over the index."""
    index = corpus_mod.ingest_manifest(manifest)
    backend = make_backend(backend_spec)
    query = corpus_mod.expand_query(nl_query, backend, lenient=lenient)
    ids = corpus_mod.search_index(index, query)
    click.echo(json.dumps({"query": corpus_mod.render_query(query), "ids": ids}))


@cli.command()
@click.option("--corpus", "manifest", required=True, type=click.Path())
@click.option("--backend", "backend_spec", required=True)
@click.option("--out", "out_path", default=None, type=click.Path())
@click.option("--strict", is_flag=True, default=False)
@click.pass_context
def screen(ctx, manifest, backend_spec, out_path, strict):
    """Run the relevance gate over every bundle; write decisions CSV."""
    index = corpus_mod.ingest_manifest(manifest)
    backend = make_backend(backend_spec)
    rows = []
    failures = 0
    for bid in index.ids():
        bundle = corpus_mod.load_bundle(index, bid)
        try:
            d = screening_mod.screen(bundle, backend)
            rows.append([d.bundle_id, int(d.passed), int(d.has_data), int(d.has_equation), d.rationale])
        except CreepDbError as err:
            failures += 1
            rows.append([bid, "", "", "", f"error: {err}"])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["bundle_id", "pass", "has_data", "has_equation", "rationale"])
    writer.writerows(rows)
    if out_path:
        Path(out_path).write_text(buf.getvalue())
    else:
        click.echo(buf.getvalue(), nl=False)
    if strict and failures:
        ctx.exit(EXIT_DOC_FAILURES)


@cli.command()
@click.option("--corpus", "manifest", required=True, type=click.Path())
@click.option("--backend", "backend_spec", required=True)
@click.option("--bundle", "bundle_id", default=None)
@click.option("--out", "out_dir", default=None, type=click.Path())
@click.option("--config", "config_path", default=None, type=click.Path())
def extract(manifest, backend_spec, bundle_id, out_dir, config_path):
    """Extract candidate entries (equation + digitized curve) per bundle."""
    from . import digitizer as dg
    from .pipeline import EXTRACTION_SKILL, build_entry, build_registry
    from .skills import ExecutionLog, ToolScope, invoke_skill

    index = corpus_mod.ingest_manifest(manifest)
    backend = make_backend(backend_spec)
    config = _load_config(config_path)
    registry = build_registry(None, config)
    log = ExecutionLog()
    ids = [bundle_id] if bundle_id else index.ids()
    out = {}
    for bid in ids:
        bundle = corpus_mod.load_bundle(index, bid)
        scope = ToolScope(EXTRACTION_SKILL.persona, EXTRACTION_SKILL.allowed_tools, registry, log)
        try:
            result = invoke_skill(EXTRACTION_SKILL, {"bundle_id": bid}, backend, scope=scope)
            entry = build_entry(bundle, result.value, config, scope)
            out[bid] = {
                "material": entry.material,
                "category": entry.category,
                "conditions": entry.conditions,
                "equation": entry.equation_text,
                "text_params": entry.text_params,
                "curve_points": 0 if entry.curve is None else len(entry.curve),
                "curve_error": entry.curve_error,
            }
            if out_dir and entry.curve is not None:
                trace = dg.SeriesTrace(
                    "curve",
                    points=__import__("numpy").column_stack(
                        [entry.curve.times, entry.curve.strains]
                    ),
                    pixel_points=__import__("numpy").zeros((len(entry.curve), 2)),
                    quality=1.0,
                )
                Path(out_dir).mkdir(parents=True, exist_ok=True)
                (Path(out_dir) / f"{bid}_curve.csv").write_text(dg.trace_to_csv(trace))
        except CreepDbError as err:
            out[bid] = {"error": f"{type(err).__name__}: {err}"}
    click.echo(json.dumps(out, indent=1, default=str))


@cli.command()
@click.option("--corpus", "manifest", required=True, type=click.Path())
@click.option("--backend", "backend_spec", required=True)
@click.option("--config", "config_path", default=None, type=click.Path())
def validate(manifest, backend_spec, config_path):
    """Extract then run the physics guardrail; print verdicts (no storage)."""
    from .pipeline import EXTRACTION_SKILL, build_entry, build_registry
    from .skills import ExecutionLog, ToolScope, invoke_skill
    from .validator import validate_entry

    index = corpus_mod.ingest_manifest(manifest)
    backend = make_backend(backend_spec)
    config = _load_config(config_path)
    registry = build_registry(None, config)
    log = ExecutionLog()
    out = {}
    for bid in index.ids():
        bundle = corpus_mod.load_bundle(index, bid)
        scope = ToolScope(EXTRACTION_SKILL.persona, EXTRACTION_SKILL.allowed_tools, registry, log)
        try:
            result = invoke_skill(EXTRACTION_SKILL, {"bundle_id": bid}, backend, scope=scope)
            entry = build_entry(bundle, result.value, config, scope)
            out[bid] = validate_entry(entry, config.thresholds()).to_json()
        except CreepDbError as err:
            out[bid] = {"error": f"{type(err).__name__}: {err}"}
    click.echo(json.dumps(out, indent=1))


@cli.command()
@click.option("--corpus", "manifest", required=True, type=click.Path())
@click.option("--backend", "backend_spec", default=None)
@click.option("--db", "db_path", required=True, type=click.Path())
@click.option("--config", "config_path", default=None, type=click.Path())
@click.option("--query", "nl_query", default=None)
@click.option("--audit-log", "audit_log", default=None, type=click.Path())
@click.option("--strict", is_flag=True, default=False)
@click.pass_context
def run(ctx, manifest, backend_spec, db_path, config_path, nl_query, audit_log, strict):
    """Run the full five-stage pipeline into a database file."""
    import dataclasses

    config = _load_config(config_path)
    overrides = {}
    if backend_spec:
        overrides["backend"] = backend_spec
    if nl_query is not None:
        overrides["query"] = nl_query
    if audit_log is not None:
        overrides["audit_log"] = audit_log
    if strict:
        overrides["strict"] = True
    if overrides:
        config = dataclasses.replace(config, **overrides)

    index = corpus_mod.ingest_manifest(manifest)
    backend = make_backend(config.backend, timeout=config.backend_timeout)
    store = Store(db_path)
    try:
        report = run_pipeline(index, config, backend, store)
    finally:
        store.close()
    click.echo(json.dumps(report.to_json(), indent=1))
    if config.strict and any(
        t.terminal.startswith("failed") for t in report.traces.values()
    ):
        ctx.exit(EXIT_DOC_FAILURES)


@cli.command("eval")
@click.option("--decisions", "decisions_path", required=True, type=click.Path())
@click.option("--truth", "truth_path", required=True, type=click.Path())
@click.option("--json", "as_json", is_flag=True, default=False)
def eval_cmd(decisions_path, truth_path, as_json):
    """Score screening decisions against ground truth."""
    decisions = []
    with open(decisions_path) as fh:
        for row in csv.DictReader(fh):
            if row.get("pass", "") == "":
                continue
            decisions.append(
                screening_mod.ScreeningDecision(
                    bundle_id=row["bundle_id"],
                    has_data=bool(int(row.get("has_data") or row["pass"])),
                    has_equation=bool(int(row.get("has_equation") or row["pass"])),
                    rationale=row.get("rationale", "") or "scored from file",
                )
            )
    truth = {}
    with open(truth_path) as fh:
        for row in csv.DictReader(fh):
            truth[row["bundle_id"]] = bool(int(row["relevant"]))
    c = screening_mod.confusion(decisions, truth)
    metrics = {}
    for name, fn in (
        ("precision", screening_mod.precision),
        ("recall", screening_mod.recall),
        ("f1", screening_mod.f1),
        ("accuracy", screening_mod.accuracy),
    ):
        try:
            metrics[name] = fn(c)
        except UndefinedMetric as err:
            metrics[name] = f"undefined: {err}"
    payload = {
        "confusion": {"tp": c.tp, "fp": c.fp, "tn": c.tn, "fn": c.fn},
        "metrics": metrics,
    }
    if as_json:
        click.echo(json.dumps(payload, indent=1))
    else:
        click.echo(f"confusion: tp={c.tp} fp={c.fp} tn={c.tn} fn={c.fn}")
        for name, value in metrics.items():
            shown = f"{value:.4f}" if isinstance(value, float) else value
            click.echo(f"{name}: {shown}")


@cli.command()
@click.option("--db", "db_path", required=True, type=click.Path())
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8080)
@click.option("--frontend", "frontend_dir", default=None, type=click.Path())
def serve(db_path, host, port, frontend_dir):
    """Serve the query/stats/export/review HTTP API (and the web UI)."""
    import uvicorn

    from .service import create_app

    store = Store(db_path)
    app = create_app(store, frontend_dir=frontend_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")


@cli.command()
@click.option("--db", "db_path", required=True, type=click.Path())
@click.option("--format", "fmt", type=click.Choice(["csv", "data"]), default="csv")
@click.option("--out", "out_path", default=None, type=click.Path())
@click.option("--curves", "curves_dir", default=None, type=click.Path())
@_filter_options
def export(db_path, fmt, out_path, curves_dir, **filter_kwargs):
    """Export filtered records as CSV or structured text (plus curve files)."""
    store = Store(db_path)
    flt = _make_filter(**filter_kwargs)
    blob = store.export_csv(flt) if fmt == "csv" else store.export_json(flt)
    if out_path:
        Path(out_path).write_bytes(blob)
    else:
        sys.stdout.buffer.write(blob)
    if curves_dir:
        store.export_curves(flt, curves_dir)
    store.close()


@cli.command()
@click.option("--db", "db_path", required=True, type=click.Path())
@click.option("--json", "as_json", is_flag=True, default=False)
def stats(db_path, as_json):
    """Distribution summary of the stored records."""
    store = Store(db_path)
    summary = store.stats()
    store.close()
    if as_json:
        click.echo(json.dumps(summary, indent=1))
        return
    click.echo(f"records: {summary['n_records']}")
    for cat, share in summary["category_shares"].items():
        click.echo(f"  {cat}: {share:.1%}")


def main(argv=None) -> int:
    try:
        rv = cli.main(args=argv, standalone_mode=False)
        # click returns the ctx.exit code in non-standalone mode
        return int(rv) if isinstance(rv, int) else EXIT_OK
    except click.exceptions.Exit as err:
        return int(err.exit_code)
    except click.UsageError as err:
        click.echo(f"usage error: {err.format_message()}", err=True)
        return EXIT_USAGE
    except CreepDbError as err:
        click.echo(f"error: {err}", err=True)
        return EXIT_FATAL
    except Exception as err:  # fatal, unexpected
        click.echo(f"fatal: {type(err).__name__}: {err}", err=True)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
