"""HTTP service: query, curves, papers, stats, export, and the review queue.

Stateless between requests; the store is the only shared state, so
restarting the service never changes query results.  All units are
canonical (K, MPa, s, strain fraction); display conversion is the
client's business.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel

from .errors import PreconditionError, RecordNotFound, ReviewConflict, UnknownDoi
from .store import RecordFilter, Store
from .store import _record_json as record_json


class ReviewAction(BaseModel):
    record_id: int
    action: str  # approve | reject
    note: str = ""


def _parse_filter(
    material: str | None = None,
    category: str | None = None,
    t_min_K: float | None = None,
    t_max_K: float | None = None,
    s_min_MPa: float | None = None,
    s_max_MPa: float | None = None,
    verdict: list[str] | None = None,
) -> RecordFilter:
    try:
        return RecordFilter(
            material=material,
            category=category,
            t_min_K=t_min_K,
            t_max_K=t_max_K,
            s_min_MPa=s_min_MPa,
            s_max_MPa=s_max_MPa,
            verdicts=tuple(verdict) if verdict else None,
        )
    except PreconditionError as err:
        raise HTTPException(status_code=400, detail=str(err))


def create_app(store: Store, frontend_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="creepdb", docs_url=None, redoc_url=None)

    @app.exception_handler(RequestValidationError)
    async def _validation_handler(request: Request, exc: RequestValidationError):
        details = [
            {"field": ".".join(str(p) for p in err["loc"][1:]), "message": err["msg"]}
            for err in exc.errors()
        ]
        return JSONResponse(status_code=400, content={"detail": details})

    def query_filter(request: Request) -> RecordFilter:
        qp = request.query_params

        def fnum(name):
            raw = qp.get(name)
            if raw is None or raw == "":
                return None
            try:
                return float(raw)
            except ValueError:
                raise HTTPException(
                    status_code=400, detail=[{"field": name, "message": f"not a number: {raw!r}"}]
                )

        return _parse_filter(
            material=qp.get("material"),
            category=qp.get("category"),
            t_min_K=fnum("t_min_K"),
            t_max_K=fnum("t_max_K"),
            s_min_MPa=fnum("s_min_MPa"),
            s_max_MPa=fnum("s_max_MPa"),
            verdict=qp.getlist("verdict") or None,
        )

    @app.get("/api/records")
    def get_records(request: Request, limit: int = 1000, offset: int = 0):
        flt = query_filter(request)
        records = store.query(flt)[offset : offset + limit]
        return {"records": [record_json(r) for r in records]}

    @app.get("/api/records/{record_id}/curve")
    def get_curve(record_id: int):
        try:
            rec = store.get_record(record_id)
        except RecordNotFound as err:
            raise HTTPException(status_code=404, detail=str(err))
        curve = rec.curve or {"times": [], "strains": [], "flags": []}
        return {
            "record_id": rec.record_id,
            "material": rec.material,
            "temperature_K": rec.temperature_K,
            "stress_MPa": rec.stress_MPa,
            **curve,
        }

    @app.get("/api/papers/{doi:path}")
    def get_paper(doi: str):
        try:
            paper = store.get_paper(doi)
        except UnknownDoi as err:
            raise HTTPException(status_code=404, detail=str(err))
        return {
            "doi": paper.doi,
            "title": paper.title,
            "authors": list(paper.authors),
            "year": paper.year,
            "source_path": paper.source_path,
        }

    @app.get("/api/stats")
    def get_stats():
        return store.stats()

    @app.get("/api/export.csv")
    def export_csv(request: Request):
        blob = store.export_csv(query_filter(request))
        return Response(
            content=blob,
            media_type="text/csv",
            headers={"Content-Disposition": "attachment; filename=creep_records.csv"},
        )

    @app.get("/api/export.data")
    def export_data(request: Request):
        blob = store.export_json(query_filter(request))
        return Response(
            content=blob,
            media_type="application/json",
            headers={"Content-Disposition": "attachment; filename=creep_records.json"},
        )

    @app.post("/api/review")
    def post_review(action: ReviewAction):
        if action.action not in ("approve", "reject"):
            raise HTTPException(status_code=400, detail=f"unknown action {action.action!r}")
        try:
            updated = store.review(action.record_id, action.action, action.note)
        except RecordNotFound as err:
            raise HTTPException(status_code=404, detail=str(err))
        except ReviewConflict as err:
            raise HTTPException(status_code=409, detail=str(err))
        if updated is None:
            return {"record_id": action.record_id, "removed": True}
        return {"record_id": action.record_id, "removed": False, "record": record_json(updated)}

    if frontend_dir:
        dist = Path(frontend_dir)
        if dist.is_dir():
            from fastapi.staticfiles import StaticFiles

            app.mount("/", StaticFiles(directory=str(dist), html=True), name="ui")

    return app
