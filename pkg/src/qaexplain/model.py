"""Shared domain model for QA pipeline data-flow explanations.

Immutable value objects for RDF terms, grounded triples, component
annotations, explanations and quality scores, plus the fixed prefix
table used everywhere else in the package.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from decimal import Decimal
from enum import Enum
from fractions import Fraction

RDF = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
OA = "http://www.w3.org/ns/oa#"
QA = "http://www.wdaqua.eu/qa#"
XSD = "http://www.w3.org/2001/XMLSchema#"

# Registered prefixes are fixed at build time; unknown prefixes are errors.
PREFIXES: dict[str, str] = {"rdf": RDF, "oa": OA, "qa": QA, "xsd": XSD}

# Schemes accepted as absolute IRIs when a token is not a registered CURIE.
_ABSOLUTE_SCHEMES = frozenset(
    {"http", "https", "urn", "ftp", "file", "mailto", "tag", "doi", "data"}
)


class ExplainError(Exception):
    """Base class for every domain error raised by this package."""


class UnknownPrefixError(ExplainError):
    pass


class UnknownAnnotationClassError(ExplainError):
    pass


@dataclass(frozen=True)
class Iri:
    """Absolute IRI. Non-empty, no whitespace."""

    value: str

    def __post_init__(self) -> None:
        if not self.value or any(c.isspace() for c in self.value):
            raise ValueError(f"invalid IRI: {self.value!r}")

    @property
    def local_name(self) -> str:
        """Last segment after '#', '/' or ':' (e.g. urn:qanary:TextRazor -> TextRazor)."""
        name = re.split(r"[#/:]", self.value)[-1]
        return name or self.value

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Literal:
    """RDF literal. The lexical form is preserved verbatim."""

    lexical: str
    datatype: Iri | None = None

    def __str__(self) -> str:
        return self.lexical


@dataclass(frozen=True)
class BlankNode:
    """Blank-node-like local identifier (includes bare tokens from recorded data)."""

    label: str

    def __post_init__(self) -> None:
        if not self.label or any(c.isspace() for c in self.label):
            raise ValueError(f"invalid blank node label: {self.label!r}")

    def __str__(self) -> str:
        return self.label


Term = Iri | Literal | BlankNode


def term_text(term: Term | None) -> str | None:
    """Render a term the way explanations quote it: IRIs and labels bare, literals verbatim."""
    if term is None:
        return None
    return str(term)


def resolve_curie(token: str, prefix_table: dict[str, str] | None = None) -> Iri:
    """Expand a CURIE against the prefix table, or pass through absolute IRIs.

    '<...>'-wrapped tokens are unwrapped. Unregistered prefixes that are not
    recognized absolute-IRI schemes raise UnknownPrefixError.
    """
    table = PREFIXES if prefix_table is None else prefix_table
    token = token.strip()
    if token.startswith("<") and token.endswith(">"):
        return Iri(token[1:-1])
    if ":" not in token:
        raise UnknownPrefixError(f"not a CURIE or IRI: {token!r}")
    prefix, rest = token.split(":", 1)
    if prefix in table:
        return Iri(table[prefix] + rest)
    if prefix.lower() in _ABSOLUTE_SCHEMES:
        return Iri(token)
    raise UnknownPrefixError(f"unknown prefix {prefix!r} in {token!r}")


# Vocabulary terms used by the ingest and grouping code.
RDF_TYPE = Iri(RDF + "type")
OA_ANNOTATED_BY = Iri(OA + "annotatedBy")
OA_ANNOTATED_AT = Iri(OA + "annotatedAt")
OA_HAS_TARGET = Iri(OA + "hasTarget")
OA_HAS_SOURCE = Iri(OA + "hasSource")
OA_HAS_SELECTOR = Iri(OA + "hasSelector")
OA_HAS_BODY = Iri(OA + "hasBody")
OA_START = Iri(OA + "start")
OA_END = Iri(OA + "end")
OA_TEXT_POSITION_SELECTOR = Iri(OA + "TextPositionSelector")
QA_SCORE = Iri(QA + "score")
OA_SCORE = Iri(OA + "score")


class AnnotationKind(Enum):
    """The four output annotation kinds this engine verbalizes."""

    INSTANCE = "instance"
    SPOT_INSTANCE = "spot_instance"
    RELATION = "relation"
    ANSWER_SPARQL = "answer_sparql"

    @property
    def class_iri(self) -> Iri:
        return _KIND_CLASS[self]

    @property
    def type_label(self) -> str:
        """Class local name as shown in explanations (e.g. AnnotationOfSpotInstance)."""
        return self.class_iri.local_name

    @classmethod
    def from_class_iri(cls, iri: Iri) -> "AnnotationKind":
        kind = _CLASS_KIND.get(iri)
        if kind is None:
            raise UnknownAnnotationClassError(f"not a known annotation class: {iri}")
        return kind


_KIND_CLASS: dict[AnnotationKind, Iri] = {
    AnnotationKind.INSTANCE: Iri(QA + "AnnotationOfInstance"),
    AnnotationKind.SPOT_INSTANCE: Iri(QA + "AnnotationOfSpotInstance"),
    AnnotationKind.RELATION: Iri(QA + "AnnotationOfRelation"),
    AnnotationKind.ANSWER_SPARQL: Iri(QA + "AnnotationOfAnswerSPARQL"),
}
_CLASS_KIND = {v: k for k, v in _KIND_CLASS.items()}

# Component roster by the kind of annotation they produce. Carried as data;
# used by the fixture corpus and the evaluator's component recognition tests.
COMPONENTS_BY_KIND: dict[AnnotationKind, tuple[str, ...]] = {
    AnnotationKind.INSTANCE: (
        "urn:qanary:NED-DBpediaSpotlight",
        "urn:qanary:NED-Dandelion",
        "urn:qanary:NED-Ontotext",
        "urn:qanary:NED-TagMe",
    ),
    AnnotationKind.SPOT_INSTANCE: (
        "urn:qanary:NER-DBpediaSpotlight",
        "urn:qanary:TagMeNER",
        "urn:qanary:TextRazor",
        "urn:qanary:DandelionNER",
    ),
    AnnotationKind.RELATION: (
        "urn:qanary:REL-Python-Falcon",
        "urn:qanary:DiambiguationProperty-OKBQA",
    ),
    AnnotationKind.ANSWER_SPARQL: (
        "urn:qanary:SINA",
        "urn:qanary:QAnswerQueryBuilderAndQueryCandidateFetcher",
        "urn:qanary:PlatypusQueryBuilder",
    ),
}


class InputQueryKey(Enum):
    """Keys of the six registered input queries components run against the triplestore."""

    INSTANCE_ANNOTATIONS = "select_instance_annotations"
    SPOT_ANNOTATIONS = "select_spot_annotations"
    RELATION_ANNOTATIONS = "select_relation_annotations"
    ANSWER_SPARQL_ANNOTATIONS = "select_answer_sparql_annotations"
    ANSWER_JSON_ANNOTATIONS = "select_answer_json_annotations"
    QUESTION_LANGUAGE_ANNOTATIONS = "select_question_language_annotations"


@dataclass(frozen=True)
class Triple:
    """Grounded triple. Variables are not representable."""

    subject: Term
    predicate: Iri
    object: Term

    def __post_init__(self) -> None:
        if isinstance(self.subject, Literal):
            raise ValueError("triple subject must not be a literal")
        if not isinstance(self.predicate, Iri):
            raise ValueError("triple predicate must be an IRI")


@dataclass(frozen=True)
class TripleSet:
    """One component's output in one named graph."""

    graph: Iri
    component: Iri
    triples: tuple[Triple, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "triples", tuple(self.triples))
        for t in self.triples:
            if (
                t.predicate == OA_ANNOTATED_BY
                and isinstance(t.object, Iri)
                and t.object != self.component
            ):
                raise ValueError(
                    f"triple attributed to {t.object}, expected {self.component}"
                )


@dataclass(frozen=True)
class TextSpan:
    """Text position selector: character offsets into the origin question."""

    start: int
    end: int

    def __post_init__(self) -> None:
        if self.start < 0 or self.end < self.start:
            raise ValueError(f"invalid span: {self.start}..{self.end}")


@dataclass(frozen=True)
class Annotation:
    """One grouped component annotation with its metadata fields.

    Optional fields stay None when the data does not carry them. Lexical
    forms (timestamp, score) are preserved as stored.
    """

    id: str
    kind: AnnotationKind
    annotated_by: Iri
    annotated_at: str | None = None
    score: Decimal | None = None
    target_question: Iri | None = None
    selector: TextSpan | None = None
    body: Term | None = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("annotation id must be non-empty")
        if self.kind is AnnotationKind.SPOT_INSTANCE and self.body is not None:
            raise ValueError("spot annotations carry no body")


class SubjectKind(Enum):
    INPUT_DATA = "input"
    OUTPUT_DATA = "output"


class Method(Enum):
    TEMPLATE = "template"
    LLM = "llm"


@dataclass(frozen=True)
class Provenance:
    created_at: str
    model_id: str | None = None
    prompt_text: str | None = None
    shots: int | None = None


@dataclass(frozen=True)
class Explanation:
    """A natural-language explanation of one data-flow artifact."""

    subject_kind: SubjectKind
    method: Method
    text: str
    provenance: Provenance
    source_ref: str

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("explanation text must be non-empty")
        if self.method is Method.TEMPLATE:
            p = self.provenance
            if p.model_id is not None or p.prompt_text is not None or p.shots is not None:
                raise ValueError("template explanations carry no model provenance")
        else:
            if self.provenance.model_id is None or self.provenance.prompt_text is None:
                raise ValueError("llm explanations require model and prompt provenance")


class DepreciationReason(Enum):
    WRONG_COMPONENT = "wrong_component"
    WRONG_COUNT = "wrong_count"
    MISSING_VALUES = "missing_values"
    INCORRECT_VALUES = "incorrect_values"


_PREFIX_REASONS = {DepreciationReason.WRONG_COMPONENT, DepreciationReason.WRONG_COUNT}


@dataclass(frozen=True)
class Depreciation:
    """One applied rating depreciation; target is 'prefix' or a 0-based annotation index."""

    target: int | str
    reason: DepreciationReason

    def __post_init__(self) -> None:
        if self.reason in _PREFIX_REASONS:
            if self.target != "prefix":
                raise ValueError(f"{self.reason.value} applies to the prefix")
        else:
            if not isinstance(self.target, int) or self.target < 0:
                raise ValueError(f"{self.reason.value} targets an annotation index")


@dataclass(frozen=True)
class QualityScore:
    """Quantitative rating of one output-data explanation."""

    prefix_rating: int
    annotation_ratings: tuple[int, ...]
    q_e: Fraction
    depreciations: tuple[Depreciation, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "annotation_ratings", tuple(self.annotation_ratings))
        object.__setattr__(self, "depreciations", tuple(self.depreciations))
        if not 1 <= self.prefix_rating <= 3:
            raise ValueError("prefix rating out of range")
        if not self.annotation_ratings:
            raise ValueError("at least one annotation rating required")
        if any(not 1 <= r <= 3 for r in self.annotation_ratings):
            raise ValueError("annotation rating out of range")
        expected = self.prefix_rating + Fraction(
            sum(self.annotation_ratings), len(self.annotation_ratings)
        )
        if self.q_e != expected:
            raise ValueError(f"q_e {self.q_e} != {expected}")
        seen = set()
        for d in self.depreciations:
            key = (d.target, d.reason)
            if key in seen:
                raise ValueError(f"duplicate depreciation {key}")
            seen.add(key)
