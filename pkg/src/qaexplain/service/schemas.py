"""Wire models. JSON uses camelCase; Python stays snake_case."""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field
from pydantic.alias_generators import to_camel

from ..model import Method, SubjectKind


class CamelModel(BaseModel):
    model_config = ConfigDict(alias_generator=to_camel, populate_by_name=True)


class InputExplanationRequest(CamelModel):
    query: str
    method: Method
    component: str | None = None
    shots: int = Field(default=0, ge=0, le=1)
    model_id: str | None = None


class EndpointRef(CamelModel):
    endpoint: str
    graph: str
    component: str


class OutputExplanationRequest(CamelModel):
    triples: str | None = None
    graph: str | None = None
    endpoint_ref: EndpointRef | None = None
    method: Method
    shots: int = Field(default=0, ge=0, le=2)
    example_kinds: list[str] | None = None
    model_id: str | None = None


class AnnotationSummary(CamelModel):
    kind: str
    annotated_by: str
    annotated_at: str | None = None
    score: str | None = None
    start: int | None = None
    end: int | None = None
    body: str | None = None


class ExplanationResponse(CamelModel):
    id: str
    subject_kind: SubjectKind
    method: Method
    model_id: str | None
    text: str
    source_ref: str
    # the verbalized source itself (query text or N-Triples), so review
    # tools can show raters the data behind the explanation
    raw_data: str | None = None
    prompt: str | None = None
    annotations: list[AnnotationSummary] = Field(default_factory=list)
    created_at: str


class ExplanationPage(CamelModel):
    items: list[ExplanationResponse]
    total: int
    limit: int
    offset: int


class EvaluationRequest(CamelModel):
    explanation_id: str


class ValueCheckResponse(CamelModel):
    field: str
    expected: str
    status: str
    stated: str | None = None


class DepreciationResponse(CamelModel):
    target: str
    reason: str


class EvaluationResponse(CamelModel):
    explanation_id: str
    prefix_rating: int
    annotation_ratings: list[int]
    q_e: float
    q_e_exact: str
    depreciations: list[DepreciationResponse]
    prefix_checks: list[ValueCheckResponse]
    annotation_checks: list[list[ValueCheckResponse]]


class RatingRequest(CamelModel):
    explanation_id: str
    metric: str
    value: int = Field(ge=1, le=5)


class RatingResponse(CamelModel):
    explanation_id: str
    rater_id: str
    metric: str
    value: int
    submitted_at: str


class AggregateRow(CamelModel):
    metric: str
    method: str
    count: int
    mean: float


class ExperimentRunRequest(CamelModel):
    plan: dict
    out_dir: str | None = None


class ExperimentRunResponse(CamelModel):
    out_dir: str
    trial_count: int
    exclusion_count: int
    matrix: dict
