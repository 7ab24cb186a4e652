"""Grouping of raw triples into structured component annotations.

A component writes one Web-Annotation-style subgraph per annotation:
the annotation node carries rdf:type, oa:annotatedBy, oa:annotatedAt,
optionally a score and a body, and points (directly or via oa:hasTarget)
to a text position selector over the origin question.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from enum import Enum
from typing import Sequence

from qaexplain.model import (
    Annotation,
    AnnotationKind,
    BlankNode,
    ExplainError,
    Iri,
    Literal,
    OA_ANNOTATED_AT,
    OA_ANNOTATED_BY,
    OA_END,
    OA_HAS_BODY,
    OA_HAS_SELECTOR,
    OA_HAS_SOURCE,
    OA_HAS_TARGET,
    OA_SCORE,
    OA_START,
    QA_SCORE,
    RDF_TYPE,
    Term,
    TextSpan,
    Triple,
    TripleSet,
    UnknownAnnotationClassError,
)


class Severity(Enum):
    WARNING = "warning"
    ERROR = "error"


@dataclass(frozen=True)
class Diagnostic:
    """Structured parse/grouping diagnostic; line is the 1-based triple ordinal."""

    line: int
    message: str
    severity: Severity = Severity.WARNING

    def __post_init__(self) -> None:
        if self.line < 1:
            raise ValueError("diagnostic line must be >= 1")


class MissingTypeError(ExplainError):
    """No subject in the data carries a registered annotation class."""


def classify_kind(class_iri: Iri) -> AnnotationKind:
    """Map an annotation class IRI to its kind; raises UnknownAnnotationClassError."""
    return AnnotationKind.from_class_iri(class_iri)


def _key(term: Term) -> tuple[str, str]:
    if isinstance(term, Iri):
        return ("iri", term.value)
    if isinstance(term, BlankNode):
        return ("blank", term.label)
    return ("literal", term.lexical)


class _Index:
    def __init__(self, triples: Sequence[Triple]):
        self.by_subject: dict[tuple[str, str], list[tuple[int, Triple]]] = {}
        for i, t in enumerate(triples, start=1):
            self.by_subject.setdefault(_key(t.subject), []).append((i, t))

    def objects(self, subject: Term, predicate: Iri) -> list[tuple[int, Term]]:
        rows = self.by_subject.get(_key(subject), [])
        return [(i, t.object) for i, t in rows if t.predicate == predicate]

    def first(self, subject: Term, predicate: Iri) -> tuple[int, Term] | tuple[None, None]:
        objs = self.objects(subject, predicate)
        return objs[0] if objs else (None, None)

    def has(self, subject: Term) -> bool:
        return _key(subject) in self.by_subject


def _warn(diagnostics: list[Diagnostic] | None, line: int, message: str) -> None:
    if diagnostics is not None:
        diagnostics.append(Diagnostic(line=line, message=message))


def _parse_position(term: Term) -> int | None:
    if not isinstance(term, Literal):
        return None
    try:
        value = Decimal(term.lexical)
    except InvalidOperation:
        return None
    if value != value.to_integral_value():
        return None
    return int(value)


def _resolve_selector(
    index: _Index, subject: Term, diagnostics: list[Diagnostic] | None
) -> TextSpan | None:
    """Follow oa:hasSelector directly, else oa:hasTarget -> oa:hasSelector; first match wins."""
    line, sel = index.first(subject, OA_HAS_SELECTOR)
    if sel is None:
        for tline, target in index.objects(subject, OA_HAS_TARGET):
            if not index.has(target):
                continue
            line, sel = index.first(target, OA_HAS_SELECTOR)
            if sel is not None:
                break
    if sel is None:
        return None
    if not index.has(sel):
        _warn(diagnostics, line, f"selector {sel} has no triples: dangling selector")
        return None
    sline, start_term = index.first(sel, OA_START)
    eline, end_term = index.first(sel, OA_END)
    start = _parse_position(start_term) if start_term is not None else None
    end = _parse_position(end_term) if end_term is not None else None
    if start is None or end is None:
        _warn(diagnostics, line, f"selector {sel} lacks usable start/end positions")
        return None
    if start < 0 or end < start:
        _warn(diagnostics, sline or line, f"selector {sel} has invalid span {start}..{end}")
        return None
    return TextSpan(start=start, end=end)


def _resolve_target_question(index: _Index, subject: Term) -> Iri | None:
    for _, target in index.objects(subject, OA_HAS_TARGET):
        if index.has(target):
            _, source = index.first(target, OA_HAS_SOURCE)
            if isinstance(source, Iri):
                return source
        if isinstance(target, Iri) and not index.has(target):
            return target
    return None


def group_annotations(
    triple_set: TripleSet | Sequence[Triple],
    diagnostics: list[Diagnostic] | None = None,
) -> list[Annotation]:
    """Group a component's triples into annotations, ordered by first appearance.

    Raises MissingTypeError when no subject carries a registered annotation
    class. Recoverable oddities (dangling selectors, out-of-range scores,
    bodies on spot annotations) are reported as warning diagnostics.
    """
    if isinstance(triple_set, TripleSet):
        triples = triple_set.triples
        default_component = triple_set.component
    else:
        triples = tuple(triple_set)
        default_component = None

    index = _Index(triples)
    subjects: list[tuple[Term, AnnotationKind, int]] = []
    seen: set[tuple[str, str]] = set()
    for i, t in enumerate(triples, start=1):
        if t.predicate != RDF_TYPE or not isinstance(t.object, Iri):
            continue
        try:
            kind = classify_kind(t.object)
        except UnknownAnnotationClassError:
            continue
        k = _key(t.subject)
        if k in seen:
            continue
        seen.add(k)
        subjects.append((t.subject, kind, i))

    if not subjects:
        raise MissingTypeError("no subject carries a registered annotation class")

    annotations: list[Annotation] = []
    for subject, kind, line in subjects:
        bline, by = index.first(subject, OA_ANNOTATED_BY)
        if isinstance(by, Iri):
            annotated_by = by
        elif default_component is not None:
            if by is not None:
                _warn(diagnostics, bline, f"oa:annotatedBy object {by} is not an IRI")
            annotated_by = default_component
        else:
            _warn(diagnostics, line, f"annotation {subject} lacks oa:annotatedBy")
            annotated_by = Iri("urn:qanary:unknown")

        aline, at_term = index.first(subject, OA_ANNOTATED_AT)
        annotated_at = None
        if at_term is not None:
            if isinstance(at_term, Literal):
                annotated_at = at_term.lexical
            else:
                _warn(diagnostics, aline, f"oa:annotatedAt object {at_term} is not a literal")
        else:
            _warn(diagnostics, line, f"annotation {subject} lacks oa:annotatedAt")

        score = None
        sline, score_term = index.first(subject, QA_SCORE)
        if score_term is None:
            sline, score_term = index.first(subject, OA_SCORE)
        if score_term is not None:
            if isinstance(score_term, Literal):
                try:
                    score = Decimal(score_term.lexical)
                except InvalidOperation:
                    _warn(diagnostics, sline, f"unparseable score {score_term.lexical!r}")
                else:
                    if not 0 <= score <= 1:
                        # kept verbatim; downstream consumers see the stored value
                        _warn(diagnostics, sline, f"score {score} outside [0, 1]")
            else:
                _warn(diagnostics, sline, f"score object {score_term} is not a literal")

        body = None
        hline, body_term = index.first(subject, OA_HAS_BODY)
        if body_term is not None:
            if kind is AnnotationKind.SPOT_INSTANCE:
                _warn(diagnostics, hline, "spot annotation carries a body; dropped")
            else:
                body = body_term
        elif kind is not AnnotationKind.SPOT_INSTANCE:
            _warn(diagnostics, line, f"{kind.type_label} annotation lacks a body")

        annotations.append(
            Annotation(
                id=str(subject),
                kind=kind,
                annotated_by=annotated_by,
                annotated_at=annotated_at,
                score=score,
                target_question=_resolve_target_question(index, subject),
                selector=_resolve_selector(index, subject, diagnostics),
                body=body,
            )
        )
    return annotations
