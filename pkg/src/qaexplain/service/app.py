"""FastAPI application: the HTTP face of the explanation engine.

Template-mode responses are produced by the same library calls the CLI
uses, so the facade adds nothing to the text. Explanation ids are
content hashes over (source data, method, model, prompt); posting the
same request twice yields the same id and a single stored record.
"""

from __future__ import annotations

import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, Header, HTTPException, Query, Response
from fastapi.middleware.cors import CORSMiddleware

from .. import experiments as experiments_module
from ..annotations import group_annotations
from ..gateway import AuditLog, ChatGateway, GatewayError, HttpChatGateway, LlmConfig, MockGateway
from ..model import AnnotationKind, Iri, Method, SubjectKind
from ..ntriples import NtSyntaxError, VariableNotAllowedError, parse_triple_set, serialize_ntriples
from ..prompts import (
    NoExampleForKindError,
    build_input_prompt,
    build_output_prompt,
    input_example_pool,
    output_example_pool,
    select_examples,
)
from ..queries import NotSelectQueryError, UnclassifiableQueryError, ingest_query
from ..scoring import evaluate_output_explanation
from ..templates import NoAnnotationsError, content_ref, explain_input, explain_output
from ..triplestore import (
    EndpointUnreachableError,
    GraphNotFoundError,
    MalformedResultSetError,
    fetch_component_output,
)
from .config import ServiceConfig
from .schemas import (
    AggregateRow,
    AnnotationSummary,
    DepreciationResponse,
    EvaluationRequest,
    EvaluationResponse,
    ExperimentRunRequest,
    ExperimentRunResponse,
    ExplanationPage,
    ExplanationResponse,
    InputExplanationRequest,
    OutputExplanationRequest,
    RatingRequest,
    RatingResponse,
    ValueCheckResponse,
)
from .store import METRICS_BY_SUBJECT, JsonlStore, StoredExplanation, StoredRating

INLINE_GRAPH = "urn:qanary:process:inline"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _explanation_id(
    source: str, method: Method, model_id: str | None, prompt: str | None, text: str = ""
) -> str:
    """Content hash; the source is order-canonicalized so that multiset-equal
    triple payloads (inline vs. endpoint-fetched) address the same explanation."""
    canonical_source = "\n".join(sorted(source.splitlines()))
    key = "\x1f".join([canonical_source, method.value, model_id or "", prompt or "", text])
    return hashlib.sha256(key.encode("utf-8")).hexdigest()[:16]


def _to_response(record: StoredExplanation) -> ExplanationResponse:
    summaries = [AnnotationSummary(**row) for row in record.payload.get("annotations", [])]
    return ExplanationResponse(
        id=record.id,
        subject_kind=record.subject_kind,
        method=record.method,
        model_id=record.model_id,
        text=record.text,
        source_ref=record.source_ref,
        raw_data=record.payload.get("triples") or record.payload.get("query"),
        prompt=record.prompt,
        annotations=summaries,
        created_at=record.created_at,
    )


def _summarize(triple_set) -> list[dict]:
    rows = []
    for ann in group_annotations(triple_set):
        selector = ann.selector
        rows.append(
            {
                "kind": ann.kind.value,
                "annotated_by": ann.annotated_by.value,
                "annotated_at": ann.annotated_at,
                "score": str(ann.score) if ann.score is not None else None,
                "start": selector.start if selector else None,
                "end": selector.end if selector else None,
                "body": str(ann.body) if ann.body is not None else None,
            }
        )
    return rows


def create_app(config: ServiceConfig | None = None, gateway: ChatGateway | None = None) -> FastAPI:
    config = config or ServiceConfig.from_sources()
    store = JsonlStore(config.store_dir)
    audit = AuditLog(config.audit_log) if config.audit_log else None

    app = FastAPI(title="qaexplain", version="0.1.0")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=list(config.cors_origins),
        allow_methods=["*"],
        allow_headers=["*"],
    )
    app.state.store = store
    app.state.config = config

    def gateway_for(model_id: str | None) -> ChatGateway:
        if gateway is not None:
            return gateway
        if model_id in (None, "mock"):
            return MockGateway(audit_log=audit)
        if not config.llm_endpoint:
            raise HTTPException(
                status_code=400,
                detail=f"model {model_id!r} requires a configured llmEndpoint (QAEXPLAIN_LLM_ENDPOINT)",
            )
        llm = LlmConfig(
            endpoint_url=config.llm_endpoint,
            model_id=model_id,
            api_key_env=config.api_key_env,
        )
        return HttpChatGateway(llm, audit_log=audit)

    def complete_or_502(gw: ChatGateway, prompt) -> str:
        try:
            completion = gw.complete(prompt)
        except GatewayError as exc:
            raise HTTPException(status_code=502, detail=f"gateway failure: {exc}") from exc
        if not completion.text.strip():
            raise HTTPException(status_code=502, detail="gateway returned empty completion")
        return completion.text

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok"}

    @app.post("/explanations/input", response_model=ExplanationResponse)
    def explain_input_data(request: InputExplanationRequest) -> ExplanationResponse:
        component = request.component
        if request.method is Method.TEMPLATE:
            try:
                record = ingest_query(request.query)
            except (NotSelectQueryError, UnclassifiableQueryError) as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from exc
            explanation = explain_input(record)
            stored = StoredExplanation(
                id=_explanation_id(record.normalized_text, Method.TEMPLATE, None, None, explanation.text),
                subject_kind=SubjectKind.INPUT_DATA,
                method=Method.TEMPLATE,
                model_id=None,
                text=explanation.text,
                source_ref=explanation.source_ref,
                prompt=None,
                payload={"query": request.query, "queryKey": record.key.value, "component": component},
                created_at=_now(),
            )
            return _to_response(store.put_explanation(stored))

        model_id = request.model_id or "mock"
        example = None
        if request.shots == 1:
            pool = input_example_pool()
            try:
                classified_key = ingest_query(request.query).key
            except (NotSelectQueryError, UnclassifiableQueryError):
                classified_key = None
            # prefer an example for a different key so the model cannot echo the answer
            others = [p for p in pool if p.kind != classified_key]
            example = (others or list(pool))[0]
        component_name = component or "UnnamedComponent"
        prompt = build_input_prompt(example, test_query=request.query, component_name=component_name)
        text = complete_or_502(gateway_for(model_id), prompt)
        stored = StoredExplanation(
            id=_explanation_id(request.query, Method.LLM, model_id, prompt.text, text),
            subject_kind=SubjectKind.INPUT_DATA,
            method=Method.LLM,
            model_id=model_id,
            text=text,
            source_ref=content_ref("query", request.query),
            prompt=prompt.text,
            payload={"query": request.query, "component": component, "shots": request.shots},
            created_at=_now(),
        )
        return _to_response(store.put_explanation(stored))

    @app.post("/explanations/output", response_model=ExplanationResponse)
    def explain_output_data(request: OutputExplanationRequest) -> ExplanationResponse:
        if (request.triples is None) == (request.endpoint_ref is None):
            raise HTTPException(
                status_code=400,
                detail="provide exactly one of 'triples' (inline) or 'endpointRef'",
            )

        if request.triples is not None:
            graph = request.graph or INLINE_GRAPH
            try:
                triple_set = parse_triple_set(request.triples, graph=graph)
            except (NtSyntaxError, VariableNotAllowedError, ValueError) as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from exc
        else:
            ref = request.endpoint_ref
            try:
                triple_set = fetch_component_output(ref.endpoint, Iri(ref.graph), Iri(ref.component))
            except GraphNotFoundError as exc:
                raise HTTPException(status_code=404, detail=str(exc)) from exc
            except (EndpointUnreachableError, MalformedResultSetError) as exc:
                raise HTTPException(status_code=502, detail=str(exc)) from exc

        serialized = serialize_ntriples(triple_set.triples)
        source_ref = content_ref("triples", serialized)
        try:
            summaries = _summarize(triple_set)
        except Exception as exc:
            raise HTTPException(status_code=400, detail=f"cannot group annotations: {exc}") from exc
        if not summaries:
            raise HTTPException(status_code=400, detail="triple set groups into zero annotations")

        payload = {
            "triples": serialized,
            "graph": triple_set.graph.value,
            "component": triple_set.component.value,
            "annotations": summaries,
        }

        if request.method is Method.TEMPLATE:
            try:
                explanation = explain_output(triple_set)
            except NoAnnotationsError as exc:
                raise HTTPException(status_code=400, detail=str(exc)) from exc
            stored = StoredExplanation(
                id=_explanation_id(serialized, Method.TEMPLATE, None, None, explanation.text),
                subject_kind=SubjectKind.OUTPUT_DATA,
                method=Method.TEMPLATE,
                model_id=None,
                text=explanation.text,
                source_ref=source_ref,
                prompt=None,
                payload=payload,
                created_at=_now(),
            )
            return _to_response(store.put_explanation(stored))

        model_id = request.model_id or "mock"
        if request.example_kinds is not None:
            if len(request.example_kinds) != request.shots:
                raise HTTPException(
                    status_code=400,
                    detail=f"exampleKinds length {len(request.example_kinds)} != shots {request.shots}",
                )
            try:
                wanted = tuple(AnnotationKind(k) for k in request.example_kinds)
            except ValueError as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc
        else:
            first_kind = AnnotationKind(summaries[0]["kind"])
            wanted = (first_kind,) * request.shots
        try:
            examples = select_examples(output_example_pool(), wanted)
        except NoExampleForKindError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc

        question_id = f"urn:qaexplain:data:{source_ref.rsplit(':', 1)[-1]}"
        prompt = build_output_prompt(examples, test_data=serialized.rstrip("\n"), question_id=question_id)
        text = complete_or_502(gateway_for(model_id), prompt)
        stored = StoredExplanation(
            id=_explanation_id(serialized, Method.LLM, model_id, prompt.text, text),
            subject_kind=SubjectKind.OUTPUT_DATA,
            method=Method.LLM,
            model_id=model_id,
            text=text,
            source_ref=source_ref,
            prompt=prompt.text,
            payload={**payload, "shots": request.shots},
            created_at=_now(),
        )
        return _to_response(store.put_explanation(stored))

    @app.get("/explanations", response_model=ExplanationPage)
    def list_explanations(
        method: Method | None = None,
        subject_kind: SubjectKind | None = Query(default=None, alias="subjectKind"),
        component: str | None = None,
        limit: int = Query(default=50, ge=1, le=500),
        offset: int = Query(default=0, ge=0),
    ) -> ExplanationPage:
        rows = store.list_explanations(method=method, subject_kind=subject_kind, component=component)
        page = rows[offset : offset + limit]
        return ExplanationPage(
            items=[_to_response(r) for r in page],
            total=len(rows),
            limit=limit,
            offset=offset,
        )

    @app.get("/explanations/{explanation_id}", response_model=ExplanationResponse)
    def get_explanation(explanation_id: str) -> ExplanationResponse:
        record = store.get_explanation(explanation_id)
        if record is None:
            raise HTTPException(status_code=404, detail=f"unknown explanation {explanation_id!r}")
        return _to_response(record)

    @app.post("/evaluations", response_model=EvaluationResponse)
    def evaluate(request: EvaluationRequest) -> EvaluationResponse:
        record = store.get_explanation(request.explanation_id)
        if record is None:
            raise HTTPException(status_code=404, detail=f"unknown explanation {request.explanation_id!r}")
        if record.subject_kind is not SubjectKind.OUTPUT_DATA:
            raise HTTPException(
                status_code=400,
                detail="input-data explanations have no ground-truth annotations to score",
            )
        triple_set = parse_triple_set(
            record.payload["triples"],
            graph=record.payload["graph"],
            component=record.payload["component"],
        )
        scored = evaluate_output_explanation(record.text, triple_set)
        score = scored.score
        return EvaluationResponse(
            explanation_id=record.id,
            prefix_rating=score.prefix_rating,
            annotation_ratings=list(score.annotation_ratings),
            q_e=float(score.q_e),
            q_e_exact=str(score.q_e),
            depreciations=[
                DepreciationResponse(target=str(d.target), reason=d.reason.value)
                for d in score.depreciations
            ],
            prefix_checks=[ValueCheckResponse(**c.as_dict()) for c in scored.prefix_checks],
            annotation_checks=[
                [ValueCheckResponse(**c.as_dict()) for c in checks]
                for checks in scored.annotation_checks
            ],
        )

    @app.post("/ratings", response_model=RatingResponse)
    def submit_rating(
        request: RatingRequest,
        rater_id: str = Header(alias="X-Rater-Id"),
    ) -> RatingResponse:
        record = store.get_explanation(request.explanation_id)
        if record is None:
            raise HTTPException(status_code=404, detail=f"unknown explanation {request.explanation_id!r}")
        metric = request.metric.lower()
        allowed = METRICS_BY_SUBJECT[record.subject_kind]
        if metric not in allowed:
            raise HTTPException(
                status_code=422,
                detail=f"metric {request.metric!r} not valid for {record.subject_kind.value}-data "
                f"explanations; expected one of {', '.join(allowed)}",
            )
        stored = store.put_rating(
            StoredRating(
                explanation_id=request.explanation_id,
                rater_id=rater_id,
                metric=metric,
                value=request.value,
                submitted_at=_now(),
            )
        )
        return RatingResponse(
            explanation_id=stored.explanation_id,
            rater_id=stored.rater_id,
            metric=stored.metric,
            value=stored.value,
            submitted_at=stored.submitted_at,
        )

    @app.get("/ratings", response_model=list[RatingResponse])
    def list_ratings(
        explanation_id: str | None = Query(default=None, alias="explanationId"),
        rater_id: str | None = Query(default=None, alias="raterId"),
    ) -> list[RatingResponse]:
        if explanation_id is not None:
            rows = store.ratings_for(explanation_id, rater_id)
        else:
            rows = store.all_ratings()
            if rater_id is not None:
                rows = [r for r in rows if r.rater_id == rater_id]
        return [
            RatingResponse(
                explanation_id=r.explanation_id,
                rater_id=r.rater_id,
                metric=r.metric,
                value=r.value,
                submitted_at=r.submitted_at,
            )
            for r in rows
        ]

    @app.get("/ratings/aggregate", response_model=list[AggregateRow])
    def aggregate_ratings() -> list[AggregateRow]:
        return [AggregateRow(**row) for row in store.aggregate_ratings()]

    @app.get("/ratings/export")
    def export_ratings() -> Response:
        lines = ["metric,method,count,mean"]
        for row in store.aggregate_ratings():
            lines.append(f"{row['metric']},{row['method']},{row['count']},{row['mean']:.4f}")
        return Response(content="\n".join(lines) + "\n", media_type="text/csv")

    @app.post("/experiments/run", response_model=ExperimentRunResponse)
    def run_experiments(request: ExperimentRunRequest) -> ExperimentRunResponse:
        try:
            plan = experiments_module.load_plan(request.plan)
        except (ValueError, KeyError) as exc:
            raise HTTPException(status_code=400, detail=f"bad plan: {exc}") from exc
        if gateway is None and any(m != "mock" for m in plan.model_ids):
            raise HTTPException(
                status_code=400,
                detail="the service runs experiment matrices offline with the mock gateway; "
                "drive live models through the CLI",
            )
        out_dir = Path(request.out_dir) if request.out_dir else (
            config.store_dir / "experiments" / _explanation_id(str(sorted(request.plan.items())), Method.LLM, None, None)
        )
        try:
            report = experiments_module.run(plan, gateway or MockGateway(audit_log=audit), out_dir)
        except (
            experiments_module.PlanInfeasibleError,
            experiments_module.DatasetTooSmallError,
            experiments_module.DatasetParseError,
            experiments_module.EmptyDatasetError,
        ) as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        matrix = json.loads(report.matrix_json.read_text(encoding="utf-8"))
        return ExperimentRunResponse(
            out_dir=str(report.out_dir),
            trial_count=len(report.trials),
            exclusion_count=len(report.exclusions),
            matrix=matrix,
        )

    if config.static_dir is not None and Path(config.static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(config.static_dir), html=True), name="ui")

    return app
