"""Ingest of the SPARQL SELECT queries components use to fetch their input.

Every Qanary component pulls its input with one of six centrally defined
SELECT queries; executions differ only in the graph IRI. Classification
therefore keys on the annotation-class signature (the object of the
rdf:type / 'a' pattern) with graph IRIs masked out.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import importlib.resources

from qaexplain.model import (
    PREFIXES,
    AnnotationKind,
    ExplainError,
    InputQueryKey,
    Iri,
    UnknownPrefixError,
    resolve_curie,
)


class NotSelectQueryError(ExplainError):
    pass


class UnclassifiableQueryError(ExplainError):
    pass


@dataclass(frozen=True)
class RegisteredQuery:
    key: InputQueryKey
    annotation_class: Iri
    requested_kind: AnnotationKind | None
    template_id: str
    text: str


@dataclass(frozen=True)
class InputQueryRecord:
    """One classified input query execution."""

    raw_text: str
    normalized_text: str
    key: InputQueryKey
    requested_kind: AnnotationKind | None
    graph: Iri | None = None

    def __post_init__(self) -> None:
        if not self.raw_text.strip() or not self.normalized_text.strip():
            raise ValueError("query text must be non-empty")


class QueryRegistry:
    def __init__(self, queries: list[RegisteredQuery]):
        if len(queries) != len({q.key for q in queries}):
            raise ValueError("duplicate registry keys")
        self._by_key = {q.key: q for q in queries}
        self._by_class = {q.annotation_class: q for q in queries}

    @classmethod
    def from_file(cls, path: Path | str) -> "QueryRegistry":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(_records_from(data))

    def by_key(self, key: InputQueryKey) -> RegisteredQuery:
        return self._by_key[key]

    def by_class(self, class_iri: Iri) -> RegisteredQuery | None:
        return self._by_class.get(class_iri)

    def all(self) -> list[RegisteredQuery]:
        return list(self._by_key.values())


def _records_from(data: dict) -> list[RegisteredQuery]:
    records = []
    for row in data["queries"]:
        records.append(
            RegisteredQuery(
                key=InputQueryKey(row["key"]),
                annotation_class=resolve_curie(row["annotationClass"]),
                requested_kind=AnnotationKind(row["requestedKind"])
                if row.get("requestedKind")
                else None,
                template_id=row["templateId"],
                text=row["query"],
            )
        )
    return records


@lru_cache(maxsize=1)
def default_query_registry() -> QueryRegistry:
    resource = importlib.resources.files("qaexplain") / "assets" / "queries" / "input_queries.json"
    return QueryRegistry(_records_from(json.loads(resource.read_text(encoding="utf-8"))))


def normalize_query(raw: str) -> str:
    """Strip comments, collapse whitespace runs to single spaces, trim ends.

    IRIs (<...>) and string literals are left untouched. Idempotent.
    """
    out: list[str] = []
    pending_space = False
    state: str | None = None
    i = 0
    n = len(raw)
    while i < n:
        c = raw[i]
        if state is None:
            if c == "#":
                while i < n and raw[i] != "\n":
                    i += 1
                continue
            if c.isspace():
                pending_space = True
                i += 1
                continue
            if pending_space and out:
                out.append(" ")
            pending_space = False
            out.append(c)
            if c == "<":
                state = "<"
            elif c in "\"'":
                state = c
            i += 1
        elif state == "<":
            out.append(c)
            if c == ">":
                state = None
            i += 1
        else:
            out.append(c)
            if c == "\\" and i + 1 < n:
                out.append(raw[i + 1])
                i += 2
                continue
            if c == state:
                state = None
            i += 1
    return "".join(out)


_PREFIX_DECL = re.compile(r"PREFIX\s+([A-Za-z][\w-]*)\s*:\s*<([^>]*)>", re.IGNORECASE)
_LEADING_DECLS = re.compile(
    r"^(?:\s*(?:PREFIX\s+[\w-]*\s*:\s*<[^>]*>|BASE\s*<[^>]*>))*\s*", re.IGNORECASE
)
_QUERY_FORM = re.compile(r"[A-Za-z]+")
_TYPE_PATTERN = re.compile(
    r"(?:\brdf:type\b|<http://www\.w3\.org/1999/02/22-rdf-syntax-ns#type>|(?<![?$\w])a\b)"
    r"\s+(<[^>]+>|[A-Za-z][\w.-]*:[\w.-]+)"
)
_FROM_GRAPH = re.compile(r"\b(?:FROM|GRAPH)\s+<([^>]+)>", re.IGNORECASE)


def _query_prefixes(normalized: str) -> dict[str, str]:
    table = dict(PREFIXES)
    for name, iri in _PREFIX_DECL.findall(normalized):
        table[name] = iri
    return table


def classify_query(
    raw: str, registry: QueryRegistry | None = None
) -> InputQueryKey:
    """Classify a query by its annotation-class signature; graph IRIs are irrelevant."""
    return ingest_query(raw, registry).key


def ingest_query(
    raw: str, registry: QueryRegistry | None = None
) -> InputQueryRecord:
    registry = registry or default_query_registry()
    normalized = normalize_query(raw)
    if not normalized:
        raise NotSelectQueryError("empty query text")
    rest = _LEADING_DECLS.sub("", normalized)
    form = _QUERY_FORM.match(rest)
    if form is None or form.group(0).upper() != "SELECT":
        raise NotSelectQueryError(
            f"expected a SELECT query, found {(form.group(0) if form else normalized[:30])!r}"
        )
    table = _query_prefixes(normalized)
    matched: RegisteredQuery | None = None
    for token in _TYPE_PATTERN.findall(normalized):
        try:
            class_iri = resolve_curie(token, table)
        except UnknownPrefixError:
            continue
        record = registry.by_class(class_iri)
        if record is not None:
            matched = record
            break
    if matched is None:
        raise UnclassifiableQueryError(
            "query requests no registered annotation class"
        )
    graph_match = _FROM_GRAPH.search(normalized)
    graph = Iri(graph_match.group(1)) if graph_match else None
    return InputQueryRecord(
        raw_text=raw,
        normalized_text=normalized,
        key=matched.key,
        requested_kind=matched.requested_kind,
        graph=graph,
    )
