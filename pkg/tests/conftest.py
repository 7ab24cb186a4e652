import importlib.resources
from decimal import Decimal

import pytest

from qaexplain.model import (
    Annotation,
    AnnotationKind,
    COMPONENTS_BY_KIND,
    Iri,
    Literal,
    TextSpan,
    Triple,
    TripleSet,
)
from qaexplain.ntriples import parse_triple_set


FIXTURE_GRAPH = "urn:qanary:process:graph-70ca1a"


def asset_text(relative: str) -> str:
    root = importlib.resources.files("qaexplain") / "assets"
    return (root / relative).read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def spot_fixture_text() -> str:
    return asset_text("fixtures/textrazor_spot.nt")


@pytest.fixture()
def spot_triple_set(spot_fixture_text) -> TripleSet:
    return parse_triple_set(spot_fixture_text, graph=FIXTURE_GRAPH)


def make_annotation_triples(ann: Annotation, question: str | None = None) -> list[Triple]:
    """Build the Qanary-style subgraph for one annotation (ground-truth oracle helper)."""
    from qaexplain.model import (
        BlankNode,
        OA_ANNOTATED_AT,
        OA_ANNOTATED_BY,
        OA_END,
        OA_HAS_BODY,
        OA_HAS_SELECTOR,
        OA_HAS_SOURCE,
        OA_HAS_TARGET,
        OA_START,
        OA_TEXT_POSITION_SELECTOR,
        QA_SCORE,
        RDF_TYPE,
        XSD,
    )

    node = BlankNode(ann.id)
    triples = [
        Triple(node, RDF_TYPE, ann.kind.class_iri),
        Triple(node, OA_ANNOTATED_BY, ann.annotated_by),
    ]
    if ann.annotated_at is not None:
        triples.append(
            Triple(node, OA_ANNOTATED_AT, Literal(ann.annotated_at, Iri(XSD + "dateTime")))
        )
    if ann.score is not None:
        triples.append(Triple(node, QA_SCORE, Literal(str(ann.score))))
    if ann.selector is not None or ann.target_question is not None or question:
        target = BlankNode(f"target-{ann.id}")
        triples.append(Triple(node, OA_HAS_TARGET, target))
        source = ann.target_question or (Iri(question) if question else None)
        if source is not None:
            triples.append(Triple(target, OA_HAS_SOURCE, source))
        if ann.selector is not None:
            sel = BlankNode(f"selector-{ann.id}")
            triples.append(Triple(target, OA_HAS_SELECTOR, sel))
            triples.append(Triple(sel, RDF_TYPE, OA_TEXT_POSITION_SELECTOR))
            triples.append(Triple(sel, OA_START, Literal(str(ann.selector.start))))
            triples.append(Triple(sel, OA_END, Literal(str(ann.selector.end))))
    if ann.body is not None:
        triples.append(Triple(node, OA_HAS_BODY, ann.body))
    return triples


def make_random_annotation(
    rng,
    kind: AnnotationKind | None = None,
    ident: str | None = None,
    component: Iri | None = None,
) -> Annotation:
    """Deterministic random annotation with all-valid fields (seeded rng)."""
    if kind is None:
        kind = rng.choice(list(AnnotationKind))
    component = component or Iri(rng.choice(COMPONENTS_BY_KIND[kind]))
    stamp = (
        f"2023-{rng.randint(1, 12):02d}-{rng.randint(1, 28):02d}"
        f"T{rng.randint(0, 23):02d}:{rng.randint(0, 59):02d}:{rng.randint(0, 59):02d}"
        f".{rng.randint(0, 99999):05d}Z"
    )
    score = None
    if rng.random() < 0.6:
        score = Decimal(f"0.{rng.randint(0, 999999):06d}")
    selector = None
    if kind in (AnnotationKind.INSTANCE, AnnotationKind.SPOT_INSTANCE) or rng.random() < 0.3:
        start = rng.randint(0, 80)
        selector = TextSpan(start=start, end=start + rng.randint(0, 30))
    body = None
    if kind is AnnotationKind.INSTANCE:
        body = Iri(f"http://dbpedia.org/resource/Entity{rng.randint(1, 5000)}")
    elif kind is AnnotationKind.RELATION:
        body = Iri(f"http://dbpedia.org/ontology/relation{rng.randint(1, 900)}")
    elif kind is AnnotationKind.ANSWER_SPARQL:
        body = Literal(
            "SELECT DISTINCT ?uri WHERE { "
            f"<http://dbpedia.org/resource/Entity{rng.randint(1, 5000)}> "
            f"<http://dbpedia.org/ontology/relation{rng.randint(1, 900)}> ?uri . "
            "}"
        )
    return Annotation(
        id=ident or f"ann{rng.getrandbits(64):016x}",
        kind=kind,
        annotated_by=component,
        annotated_at=stamp,
        score=score,
        target_question=Iri(f"urn:qald:q{rng.randint(1, 394)}"),
        selector=selector,
        body=body,
    )


def make_triple_set(annotations: list[Annotation], graph: str = FIXTURE_GRAPH) -> TripleSet:
    triples: list[Triple] = []
    for ann in annotations:
        triples.extend(make_annotation_triples(ann))
    return TripleSet(
        graph=Iri(graph),
        component=annotations[0].annotated_by,
        triples=tuple(triples),
    )
