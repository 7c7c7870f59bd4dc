"""Relational persistence: Papers + Creep Data with DOI provenance.

Single-file SQLite with referential integrity enforced in the schema.
The records table holds only Valid / Valid-TextOnly / Flagged entries;
rejected candidates and review decisions land in the audit table, so
every entry's history is reconstructible.  Writes are serialized through
one lock (single-writer role); reads are lock-free.
"""

from __future__ import annotations

import csv
import io
import json
import sqlite3
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import (
    ConstraintViolation,
    DuplicateDoi,
    PreconditionError,
    RecordNotFound,
    ReviewConflict,
    UnknownDoi,
)

SCHEMA_VERSION = 1

CATEGORIES = (
    "nickel_alloy",
    "steel_iron",
    "polymer",
    "rock",
    "ice",
    "ceramic",
    "aluminum_alloy",
    "titanium_alloy",
    "metallic_glass",
    "composite",
    "other",
)

STORED_VERDICTS = ("Valid", "Valid-TextOnly", "Flagged")

CSV_COLUMNS = (
    "record_id",
    "doi",
    "material",
    "category",
    "temperature_K",
    "stress_MPa",
    "model_name",
    "params",
    "verdict",
    "r2",
    "n_points",
)


@dataclass(frozen=True)
class PaperRow:
    doi: str
    title: str
    authors: tuple[str, ...]
    year: int
    source_path: str = ""

    def __post_init__(self):
        if not self.doi:
            raise ConstraintViolation("paper needs a non-empty DOI")


@dataclass(frozen=True)
class CreepRecord:
    doi: str
    material: str
    category: str
    temperature_K: float
    stress_MPa: float
    model_name: str
    equation: str
    params: dict  # name -> {"value": float, "unit": str}
    params_source: str
    verdict: str
    curve: dict | None = None  # {"times": [...], "strains": [...], "flags": [...]}
    r2: float | None = None
    evidence: dict = field(default_factory=dict)
    record_id: int | None = None

    def validate(self):
        if self.category not in CATEGORIES:
            raise ConstraintViolation(f"unknown category {self.category!r}")
        if self.verdict not in STORED_VERDICTS:
            raise ConstraintViolation(f"verdict {self.verdict!r} not storable")
        if not self.temperature_K > 0:
            raise ConstraintViolation("temperature must be > 0 K")
        if self.stress_MPa < 0:
            raise ConstraintViolation("stress must be >= 0 MPa")
        if self.curve is not None and len(self.curve.get("times", [])) != len(
            self.curve.get("strains", [])
        ):
            raise ConstraintViolation("curve arrays must have equal length")

    @property
    def n_points(self) -> int:
        return 0 if self.curve is None else len(self.curve["times"])


@dataclass(frozen=True)
class RecordFilter:
    material: str | None = None
    category: str | None = None
    t_min_K: float | None = None
    t_max_K: float | None = None
    s_min_MPa: float | None = None
    s_max_MPa: float | None = None
    verdicts: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.t_min_K is not None and self.t_max_K is not None and self.t_min_K > self.t_max_K:
            raise PreconditionError("temperature range has min > max")
        if (
            self.s_min_MPa is not None
            and self.s_max_MPa is not None
            and self.s_min_MPa > self.s_max_MPa
        ):
            raise PreconditionError("stress range has min > max")

    def matches(self, rec: CreepRecord) -> bool:
        """Reference semantics used by the brute-force check in tests."""
        if self.material is not None and self.material.lower() not in rec.material.lower():
            return False
        if self.category is not None and rec.category != self.category:
            return False
        if self.t_min_K is not None and rec.temperature_K < self.t_min_K:
            return False
        if self.t_max_K is not None and rec.temperature_K > self.t_max_K:
            return False
        if self.s_min_MPa is not None and rec.stress_MPa < self.s_min_MPa:
            return False
        if self.s_max_MPa is not None and rec.stress_MPa > self.s_max_MPa:
            return False
        if self.verdicts is not None and rec.verdict not in self.verdicts:
            return False
        return True


_TABLES = f"""
CREATE TABLE IF NOT EXISTS meta (
    key TEXT PRIMARY KEY,
    value TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS papers (
    doi TEXT PRIMARY KEY CHECK(length(doi) > 0),
    title TEXT NOT NULL,
    authors TEXT NOT NULL,
    year INTEGER NOT NULL,
    source_path TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS records (
    record_id INTEGER PRIMARY KEY AUTOINCREMENT,
    doi TEXT NOT NULL REFERENCES papers(doi),
    material TEXT NOT NULL,
    category TEXT NOT NULL CHECK(category IN {CATEGORIES!r}),
    temperature_K REAL NOT NULL CHECK(temperature_K > 0),
    stress_MPa REAL NOT NULL CHECK(stress_MPa >= 0),
    model_name TEXT NOT NULL,
    equation TEXT NOT NULL,
    params TEXT NOT NULL,
    params_source TEXT NOT NULL,
    curve TEXT,
    verdict TEXT NOT NULL CHECK(verdict IN {STORED_VERDICTS!r}),
    r2 REAL,
    evidence TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS audit (
    audit_id INTEGER PRIMARY KEY AUTOINCREMENT,
    ts REAL NOT NULL,
    kind TEXT NOT NULL,
    bundle_id TEXT,
    doi TEXT,
    record_id INTEGER,
    payload TEXT NOT NULL
);
"""


class Store:
    """Single-file record store; one writer, many readers."""

    def __init__(self, path: str | Path | None = None):
        self.path = str(path) if path is not None else ":memory:"
        self._conn = sqlite3.connect(self.path, check_same_thread=False)
        self._conn.execute("PRAGMA foreign_keys = ON")
        self._write_lock = threading.Lock()
        with self._conn:
            self._conn.executescript(_TABLES)
            self._conn.execute(
                "INSERT OR IGNORE INTO meta (key, value) VALUES ('schema_version', ?)",
                (str(SCHEMA_VERSION),),
            )

    def close(self):
        self._conn.close()

    # -- writes -------------------------------------------------------------

    def insert_paper(self, row: PaperRow) -> None:
        with self._write_lock:
            try:
                with self._conn:
                    self._conn.execute(
                        "INSERT INTO papers (doi, title, authors, year, source_path) "
                        "VALUES (?, ?, ?, ?, ?)",
                        (row.doi, row.title, json.dumps(list(row.authors)), row.year, row.source_path),
                    )
            except sqlite3.IntegrityError as err:
                if "UNIQUE" in str(err):
                    raise DuplicateDoi(f"paper {row.doi!r} already stored")
                raise ConstraintViolation(str(err))

    def insert_record(self, rec: CreepRecord) -> int:
        rec.validate()
        with self._write_lock:
            try:
                with self._conn:
                    cur = self._conn.execute(
                        "INSERT INTO records (doi, material, category, temperature_K, "
                        "stress_MPa, model_name, equation, params, params_source, curve, "
                        "verdict, r2, evidence) VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)",
                        (
                            rec.doi,
                            rec.material,
                            rec.category,
                            rec.temperature_K,
                            rec.stress_MPa,
                            rec.model_name,
                            rec.equation,
                            json.dumps(rec.params),
                            rec.params_source,
                            None if rec.curve is None else json.dumps(rec.curve),
                            rec.verdict,
                            rec.r2,
                            json.dumps(rec.evidence),
                        ),
                    )
                    return int(cur.lastrowid)
            except sqlite3.IntegrityError as err:
                if "FOREIGN KEY" in str(err):
                    raise UnknownDoi(f"record references unknown paper {rec.doi!r}")
                raise ConstraintViolation(str(err))

    def audit_event(self, kind: str, payload: dict, *, bundle_id=None, doi=None, record_id=None):
        with self._write_lock:
            with self._conn:
                self._conn.execute(
                    "INSERT INTO audit (ts, kind, bundle_id, doi, record_id, payload) "
                    "VALUES (?, ?, ?, ?, ?, ?)",
                    (time.time(), kind, bundle_id, doi, record_id, json.dumps(payload)),
                )

    # -- reads --------------------------------------------------------------

    @staticmethod
    def _row_to_record(row) -> CreepRecord:
        return CreepRecord(
            record_id=row[0],
            doi=row[1],
            material=row[2],
            category=row[3],
            temperature_K=row[4],
            stress_MPa=row[5],
            model_name=row[6],
            equation=row[7],
            params=json.loads(row[8]),
            params_source=row[9],
            curve=None if row[10] is None else json.loads(row[10]),
            verdict=row[11],
            r2=row[12],
            evidence=json.loads(row[13]),
        )

    _RECORD_COLS = (
        "record_id, doi, material, category, temperature_K, stress_MPa, model_name, "
        "equation, params, params_source, curve, verdict, r2, evidence"
    )

    def query(self, flt: RecordFilter = RecordFilter()) -> list[CreepRecord]:
        """Records satisfying every present clause, ordered by (doi, record_id)."""
        clauses, args = [], []
        if flt.material is not None:
            clauses.append("lower(material) LIKE ?")
            args.append(f"%{flt.material.lower()}%")
        if flt.category is not None:
            clauses.append("category = ?")
            args.append(flt.category)
        if flt.t_min_K is not None:
            clauses.append("temperature_K >= ?")
            args.append(flt.t_min_K)
        if flt.t_max_K is not None:
            clauses.append("temperature_K <= ?")
            args.append(flt.t_max_K)
        if flt.s_min_MPa is not None:
            clauses.append("stress_MPa >= ?")
            args.append(flt.s_min_MPa)
        if flt.s_max_MPa is not None:
            clauses.append("stress_MPa <= ?")
            args.append(flt.s_max_MPa)
        if flt.verdicts is not None:
            marks = ",".join("?" for _ in flt.verdicts)
            clauses.append(f"verdict IN ({marks})")
            args.extend(flt.verdicts)
        where = f" WHERE {' AND '.join(clauses)}" if clauses else ""
        rows = self._conn.execute(
            f"SELECT {self._RECORD_COLS} FROM records{where} ORDER BY doi, record_id", args
        ).fetchall()
        return [self._row_to_record(r) for r in rows]

    def get_record(self, record_id: int) -> CreepRecord:
        row = self._conn.execute(
            f"SELECT {self._RECORD_COLS} FROM records WHERE record_id = ?", (record_id,)
        ).fetchone()
        if row is None:
            raise RecordNotFound(f"no record {record_id}")
        return self._row_to_record(row)

    def get_paper(self, doi: str) -> PaperRow:
        row = self._conn.execute(
            "SELECT doi, title, authors, year, source_path FROM papers WHERE doi = ?", (doi,)
        ).fetchone()
        if row is None:
            raise UnknownDoi(f"no paper {doi!r}")
        return PaperRow(row[0], row[1], tuple(json.loads(row[2])), row[3], row[4])

    def papers(self) -> list[PaperRow]:
        rows = self._conn.execute(
            "SELECT doi, title, authors, year, source_path FROM papers ORDER BY doi"
        ).fetchall()
        return [PaperRow(r[0], r[1], tuple(json.loads(r[2])), r[3], r[4]) for r in rows]

    def audit_entries(self, kind: str | None = None) -> list[dict]:
        where, args = ("", [])
        if kind is not None:
            where = " WHERE kind = ?"
            args = [kind]
        rows = self._conn.execute(
            f"SELECT audit_id, ts, kind, bundle_id, doi, record_id, payload FROM audit{where} "
            "ORDER BY audit_id",
            args,
        ).fetchall()
        return [
            {
                "audit_id": r[0],
                "ts": r[1],
                "kind": r[2],
                "bundle_id": r[3],
                "doi": r[4],
                "record_id": r[5],
                "payload": json.loads(r[6]),
            }
            for r in rows
        ]

    # -- review -------------------------------------------------------------

    def review(self, record_id: int, action: str, note: str = "") -> CreepRecord | None:
        """Apply a human decision to a Flagged record.

        approve: verdict becomes Valid, params_source annotated.
        reject: record moves to the audit table.  Returns the updated
        record (None when rejected).
        """
        if action not in ("approve", "reject"):
            raise PreconditionError(f"unknown review action {action!r}")
        with self._write_lock:
            rec = self.get_record(record_id)
            if rec.verdict != "Flagged":
                raise ReviewConflict(
                    f"record {record_id} has verdict {rec.verdict}; only Flagged is reviewable"
                )
            if action == "approve":
                new_source = rec.params_source + "+human-approved"
                with self._conn:
                    self._conn.execute(
                        "UPDATE records SET verdict = 'Valid', params_source = ? "
                        "WHERE record_id = ?",
                        (new_source, record_id),
                    )
                updated = replace(rec, verdict="Valid", params_source=new_source)
            else:
                with self._conn:
                    self._conn.execute("DELETE FROM records WHERE record_id = ?", (record_id,))
                updated = None
        payload = {"action": action, "note": note, "verdict_before": "Flagged"}
        if action == "reject":
            payload["record"] = _record_json(rec)
        self.audit_event("review", payload, doi=rec.doi, record_id=record_id)
        return updated

    # -- export / stats -----------------------------------------------------

    def export_csv(self, flt: RecordFilter = RecordFilter()) -> bytes:
        """Byte-stable CSV of the filtered records."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for rec in self.query(flt):
            params = ";".join(f"{k}={_fmt(v['value'])}" for k, v in rec.params.items())
            writer.writerow(
                [
                    rec.record_id,
                    rec.doi,
                    rec.material,
                    rec.category,
                    _fmt(rec.temperature_K),
                    _fmt(rec.stress_MPa),
                    rec.model_name,
                    params,
                    rec.verdict,
                    "" if rec.r2 is None else _fmt(rec.r2),
                    rec.n_points,
                ]
            )
        return buf.getvalue().encode()

    def export_curve_csv(self, record_id: int) -> bytes:
        rec = self.get_record(record_id)
        lines = [f"# record {rec.record_id} doi {rec.doi} material {rec.material}"]
        lines.append("time_s,strain")
        if rec.curve is not None:
            for t, s in zip(rec.curve["times"], rec.curve["strains"]):
                lines.append(f"{_fmt(t)},{_fmt(s)}")
        return ("\n".join(lines) + "\n").encode()

    def export_curves(self, flt: RecordFilter, outdir: str | Path) -> list[Path]:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        written = []
        for rec in self.query(flt):
            path = outdir / f"record_{rec.record_id:06d}_curve.csv"
            path.write_bytes(self.export_curve_csv(rec.record_id))
            written.append(path)
        return written

    def export_json(self, flt: RecordFilter = RecordFilter()) -> bytes:
        records = self.query(flt)
        dois = sorted({r.doi for r in records})
        payload = {
            "schema_version": SCHEMA_VERSION,
            "papers": [
                {
                    "doi": p.doi,
                    "title": p.title,
                    "authors": list(p.authors),
                    "year": p.year,
                    "source_path": p.source_path,
                }
                for p in self.papers()
                if p.doi in dois
            ],
            "records": [_record_json(r) for r in records],
        }
        return (json.dumps(payload, indent=1, sort_keys=True) + "\n").encode()

    def import_json(self, blob: bytes | str) -> tuple[int, int]:
        payload = json.loads(blob)
        if payload.get("schema_version") != SCHEMA_VERSION:
            raise ConstraintViolation(
                f"schema version {payload.get('schema_version')} != {SCHEMA_VERSION}"
            )
        n_papers = n_records = 0
        for p in payload["papers"]:
            try:
                self.insert_paper(
                    PaperRow(p["doi"], p["title"], tuple(p["authors"]), p["year"], p["source_path"])
                )
                n_papers += 1
            except DuplicateDoi:
                pass
        for r in payload["records"]:
            rec = CreepRecord(
                doi=r["doi"],
                material=r["material"],
                category=r["category"],
                temperature_K=r["temperature_K"],
                stress_MPa=r["stress_MPa"],
                model_name=r["model_name"],
                equation=r["equation"],
                params=r["params"],
                params_source=r["params_source"],
                verdict=r["verdict"],
                curve=r.get("curve"),
                r2=r.get("r2"),
                evidence=r.get("evidence", {}),
            )
            self.insert_record(rec)
            n_records += 1
        return n_papers, n_records

    def stats(self, t_edges=None, s_edges=None) -> dict:
        """Distribution summary: category shares, T and stress histograms,
        (T, sigma) scatter tuples per category."""
        records = self.query()
        t_edges = list(t_edges if t_edges is not None else range(0, 2001, 100))
        s_edges = list(s_edges if s_edges is not None else range(0, 1101, 50))
        if not records:
            return {
                "n_records": 0,
                "category_shares": {},
                "temperature_histogram": {"edges": t_edges, "counts": [0] * (len(t_edges) - 1)},
                "stress_histogram": {"edges": s_edges, "counts": [0] * (len(s_edges) - 1)},
                "scatter": {},
            }
        cats: dict[str, int] = {}
        for r in records:
            cats[r.category] = cats.get(r.category, 0) + 1
        total = len(records)
        temps = np.array([r.temperature_K for r in records])
        stresses = np.array([r.stress_MPa for r in records])
        t_counts, _ = np.histogram(temps, bins=t_edges)
        s_counts, _ = np.histogram(stresses, bins=s_edges)
        scatter: dict[str, list] = {}
        for r in records:
            scatter.setdefault(r.category, []).append((r.temperature_K, r.stress_MPa))
        return {
            "n_records": total,
            "category_shares": {k: cats[k] / total for k in sorted(cats)},
            "temperature_histogram": {"edges": t_edges, "counts": t_counts.tolist()},
            "stress_histogram": {"edges": s_edges, "counts": s_counts.tolist()},
            "scatter": scatter,
        }


def _fmt(x) -> str:
    return repr(float(x))


def _record_json(rec: CreepRecord) -> dict:
    return {
        "record_id": rec.record_id,
        "doi": rec.doi,
        "material": rec.material,
        "category": rec.category,
        "temperature_K": rec.temperature_K,
        "stress_MPa": rec.stress_MPa,
        "model_name": rec.model_name,
        "equation": rec.equation,
        "params": rec.params,
        "params_source": rec.params_source,
        "curve": rec.curve,
        "verdict": rec.verdict,
        "r2": rec.r2,
        "evidence": rec.evidence,
        "n_points": rec.n_points,
    }
