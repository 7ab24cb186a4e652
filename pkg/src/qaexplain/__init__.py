"""Explanations for component-based question answering pipelines."""

from qaexplain.model import (
    Annotation,
    AnnotationKind,
    BlankNode,
    Depreciation,
    DepreciationReason,
    Explanation,
    ExplainError,
    InputQueryKey,
    Iri,
    Literal,
    Method,
    Provenance,
    QualityScore,
    SubjectKind,
    TextSpan,
    Triple,
    TripleSet,
    resolve_curie,
)

__version__ = "0.1.0"

__all__ = [
    "Annotation",
    "AnnotationKind",
    "BlankNode",
    "Depreciation",
    "DepreciationReason",
    "Explanation",
    "ExplainError",
    "InputQueryKey",
    "Iri",
    "Literal",
    "Method",
    "Provenance",
    "QualityScore",
    "SubjectKind",
    "TextSpan",
    "Triple",
    "TripleSet",
    "resolve_curie",
    "__version__",
]
