"""Local document corpus: manifest ingestion, Boolean retrieval, query expansion.

The unit of work is a *document bundle*: pre-extracted plain-text pages,
figure images (PNG), and bibliographic metadata, described one JSON
record per line in a manifest file.  An ingested index carries a token
set per bundle (title + captions + body, lowercased, hyphens kept) and
is immutable afterwards, so concurrent readers need no locking.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .backends import ReasoningBackend
from .errors import (
    BackendFailure,
    DuplicateDoi,
    MalformedManifest,
    MissingAsset,
    PreconditionError,
)
from .schema import RecordF, TextF
from .skills import Skill, invoke_skill

MIN_FIGURE_SIDE = 32


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FigureAsset:
    figure_id: str
    image: np.ndarray  # (h, w, 3) uint8
    caption: str

    def __post_init__(self):
        h, w = self.image.shape[:2]
        if h < MIN_FIGURE_SIDE or w < MIN_FIGURE_SIDE:
            raise PreconditionError(f"figure {self.figure_id}: image {w}x{h} below minimum size")


@dataclass(frozen=True)
class DocumentBundle:
    id: str
    doi: str
    title: str
    authors: tuple[str, ...]
    year: int
    pages: tuple[str, ...]
    figures: tuple[FigureAsset, ...]
    source_path: str

    def __post_init__(self):
        if not self.doi:
            raise PreconditionError("bundle needs a non-empty DOI")
        if not 1800 <= self.year <= 2100:
            raise PreconditionError(f"implausible year {self.year}")
        if not self.pages:
            raise PreconditionError("bundle needs at least one page")

    def full_text(self) -> str:
        captions = " ".join(f.caption for f in self.figures)
        return "\n".join((self.title, captions, *self.pages))


# Boolean queries ------------------------------------------------------------


class Query:
    __slots__ = ()


@dataclass(frozen=True)
class Term(Query):
    text: str

    def __post_init__(self):
        if not self.text.strip():
            raise PreconditionError("empty query term")


@dataclass(frozen=True)
class And(Query):
    children: tuple[Query, ...]

    def __post_init__(self):
        if len(self.children) < 2:
            raise PreconditionError("And needs at least 2 children")


@dataclass(frozen=True)
class Or(Query):
    children: tuple[Query, ...]

    def __post_init__(self):
        if len(self.children) < 2:
            raise PreconditionError("Or needs at least 2 children")


@dataclass(frozen=True)
class Not(Query):
    child: Query


def query_to_json(q: Query):
    if isinstance(q, Term):
        return {"term": q.text}
    if isinstance(q, And):
        return {"and": [query_to_json(c) for c in q.children]}
    if isinstance(q, Or):
        return {"or": [query_to_json(c) for c in q.children]}
    if isinstance(q, Not):
        return {"not": query_to_json(q.child)}
    raise TypeError(f"not a query node: {q!r}")


def query_from_json(obj) -> Query:
    if not isinstance(obj, dict) or len(obj) != 1:
        raise ValueError(f"bad query node {obj!r}")
    key, payload = next(iter(obj.items()))
    if key == "term":
        return Term(str(payload))
    if key == "and":
        return And(tuple(query_from_json(c) for c in payload))
    if key == "or":
        return Or(tuple(query_from_json(c) for c in payload))
    if key == "not":
        return Not(query_from_json(payload))
    raise ValueError(f"bad query operator {key!r}")


def render_query(q: Query) -> str:
    if isinstance(q, Term):
        return f'"{q.text}"'
    if isinstance(q, And):
        return "(" + " AND ".join(render_query(c) for c in q.children) + ")"
    if isinstance(q, Or):
        return "(" + " OR ".join(render_query(c) for c in q.children) + ")"
    return f"NOT {render_query(q.child)}"


_TOKEN_RE = re.compile(r"[\w\-]+", re.UNICODE)


def tokenize(text: str) -> frozenset[str]:
    return frozenset(_TOKEN_RE.findall(text.lower()))


def term_matches(term: Term, tokens: frozenset[str]) -> bool:
    """Case-insensitive whole-word containment; multi-word terms require
    every word present."""
    words = _TOKEN_RE.findall(term.text.lower())
    return bool(words) and all(w in tokens for w in words)


def eval_query(q: Query, tokens: frozenset[str]) -> bool:
    if isinstance(q, Term):
        return term_matches(q, tokens)
    if isinstance(q, And):
        return all(eval_query(c, tokens) for c in q.children)
    if isinstance(q, Or):
        return any(eval_query(c, tokens) for c in q.children)
    if isinstance(q, Not):
        return not eval_query(q.child, tokens)
    raise TypeError(f"not a query node: {q!r}")


# corpus index ---------------------------------------------------------------


@dataclass(frozen=True)
class IndexEntry:
    bundle_id: str
    doi: str
    title: str
    tokens: frozenset[str]
    record: dict  # raw manifest record (paths resolved)


@dataclass(frozen=True)
class CorpusIndex:
    entries: dict[str, IndexEntry]
    root: Path

    def ids(self) -> list[str]:
        return sorted(self.entries)

    def __len__(self) -> int:
        return len(self.entries)


_REQUIRED_FIELDS = ("id", "doi", "title", "authors", "year", "pages", "figures")


def ingest_manifest(manifest_path) -> CorpusIndex:
    """Build an index over all bundles listed in a JSON-lines manifest.

    Fails fast: duplicate DOIs, malformed records, and missing page or
    figure files are all ingestion errors, so every indexed bundle is
    guaranteed loadable afterwards.
    """
    path = Path(manifest_path)
    if not path.is_file():
        raise MissingAsset(f"manifest {path} does not exist")
    root = path.parent
    entries: dict[str, IndexEntry] = {}
    seen_dois: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as err:
            raise MalformedManifest(f"{path}:{lineno}: {err}")
        missing = [f for f in _REQUIRED_FIELDS if f not in rec]
        if missing:
            raise MalformedManifest(f"{path}:{lineno}: missing fields {missing}")
        bundle_id = str(rec["id"])
        doi = str(rec["doi"])
        if not doi:
            raise MalformedManifest(f"{path}:{lineno}: empty doi")
        if bundle_id in entries:
            raise MalformedManifest(f"{path}:{lineno}: duplicate bundle id {bundle_id!r}")
        if doi in seen_dois:
            raise DuplicateDoi(f"doi {doi!r} used by {seen_dois[doi]!r} and {bundle_id!r}")
        seen_dois[doi] = bundle_id
        try:
            year = int(rec["year"])
        except (TypeError, ValueError):
            raise MalformedManifest(f"{path}:{lineno}: bad year {rec['year']!r}")
        if not 1800 <= year <= 2100:
            raise MalformedManifest(f"{path}:{lineno}: year {year} out of range")

        page_text = []
        for rel in rec["pages"]:
            page_path = root / rel
            if not page_path.is_file():
                raise MissingAsset(f"{path}:{lineno}: page file {page_path} missing")
            page_text.append(page_path.read_text())
        if not page_text:
            raise MalformedManifest(f"{path}:{lineno}: bundle has no pages")
        captions = []
        for fig in rec["figures"]:
            img_path = root / fig["image_path"]
            if not img_path.is_file():
                raise MissingAsset(f"{path}:{lineno}: figure file {img_path} missing")
            captions.append(str(fig.get("caption", "")))

        tokens = tokenize(" ".join((str(rec["title"]), *captions, *page_text)))
        entries[bundle_id] = IndexEntry(bundle_id, doi, str(rec["title"]), tokens, rec)
    return CorpusIndex(entries, root)


def load_bundle(index: CorpusIndex, bundle_id: str) -> DocumentBundle:
    if bundle_id not in index.entries:
        raise MissingAsset(f"unknown bundle {bundle_id!r}")
    rec = index.entries[bundle_id].record
    root = index.root
    pages = tuple((root / rel).read_text() for rel in rec["pages"])
    figures = []
    for fig in rec["figures"]:
        img = np.asarray(Image.open(root / fig["image_path"]).convert("RGB"))
        figures.append(FigureAsset(str(fig["id"]), img, str(fig.get("caption", ""))))
    return DocumentBundle(
        id=str(rec["id"]),
        doi=str(rec["doi"]),
        title=str(rec["title"]),
        authors=tuple(str(a) for a in rec["authors"]),
        year=int(rec["year"]),
        pages=pages,
        figures=tuple(figures),
        source_path=str(root / rec["pages"][0]) if rec["pages"] else str(root),
    )


def search_index(index: CorpusIndex, query: Query) -> list[str]:
    """Bundle ids whose token sets satisfy the query, ascending."""
    if not index.entries:
        raise PreconditionError("index is empty")
    return [bid for bid in sorted(index.entries) if eval_query(query, index.entries[bid].tokens)]


# query expansion ------------------------------------------------------------

EXPANSION_SKILL = Skill(
    name="query_expansion",
    persona="Bibliographic Navigator",
    instruction_template=(
        "Expand the material-science search request {nl_query!r} into Boolean "
        "retrieval logic.  Broaden implied vocabulary (families, synonyms) with "
        "OR groups, keep explicit terms, and return JSON: "
        '{{"query": "<json-encoded tree of term/and/or/not nodes>"}}'
    ),
    allowed_tools=frozenset(),
    output_schema=RecordF.of(query=TextF()),
    max_retries=1,
)


def expand_query(nl_query: str, backend: ReasoningBackend, *, lenient: bool = False) -> Query:
    """Turn a natural-language request into a Boolean query via the backend.

    With `lenient`, any backend failure degrades to the identity query.
    """
    if not nl_query.strip():
        raise PreconditionError("query must be non-empty")
    try:
        result = invoke_skill(EXPANSION_SKILL, {"nl_query": nl_query}, backend)
        payload = result.value["query"]
        return query_from_json(json.loads(payload))
    except Exception as err:
        if lenient:
            return Term(nl_query)
        if isinstance(err, BackendFailure):
            raise
        raise BackendFailure(f"query expansion produced an invalid query: {err}")
