"""Triplestore client against the in-process fixture endpoint."""

import random

import httpx
import pytest

from conftest import FIXTURE_GRAPH, make_annotation_triples, make_random_annotation, make_triple_set
from qaexplain.annotations import group_annotations
from qaexplain.model import OA_ANNOTATED_BY, AnnotationKind, Iri, TripleSet
from qaexplain.templates import explain_output
from qaexplain.testing import FixtureTriplestore
from qaexplain.triplestore import (
    EndpointUnreachableError,
    GraphNotFoundError,
    MalformedResultSetError,
    fetch_component_output,
)


@pytest.fixture(scope="module")
def endpoint():
    with FixtureTriplestore() as store:
        yield store


def as_multiset(triple_set: TripleSet) -> dict:
    counts: dict = {}
    for t in triple_set.triples:
        counts[t] = counts.get(t, 0) + 1
    return counts


def test_round_trip_recorded_fixture(endpoint, spot_triple_set):
    endpoint.seed(spot_triple_set.graph, spot_triple_set.triples)
    fetched = fetch_component_output(endpoint.url, spot_triple_set.graph, spot_triple_set.component)
    assert fetched.graph == spot_triple_set.graph
    assert fetched.component == spot_triple_set.component
    assert as_multiset(fetched) == as_multiset(spot_triple_set)


def test_round_trip_random_sets(endpoint):
    rng = random.Random(411)
    for i in range(8):
        first = make_random_annotation(rng, ident=f"trip{i}-0")
        annotations = [first] + [
            make_random_annotation(
                rng, kind=first.kind, ident=f"trip{i}-{j}", component=first.annotated_by
            )
            for j in range(1, rng.randint(2, 5))
        ]
        original = make_triple_set(annotations, graph=f"urn:qanary:process:rt-{i}")
        endpoint.seed(original.graph, original.triples)
        fetched = fetch_component_output(endpoint.url, original.graph, original.component)
        assert as_multiset(fetched) == as_multiset(original)


def test_fetched_set_explains_identically(endpoint, spot_triple_set):
    endpoint.seed(spot_triple_set.graph, spot_triple_set.triples)
    fetched = fetch_component_output(endpoint.url, spot_triple_set.graph, spot_triple_set.component)
    assert explain_output(fetched).text == explain_output(spot_triple_set).text


def test_attribution_filter_two_components(endpoint):
    rng = random.Random(77)
    comp_a = Iri("urn:qanary:NED-DBpediaSpotlight")
    comp_b = Iri("urn:qanary:SINA")
    ours = [
        make_random_annotation(rng, kind=AnnotationKind.INSTANCE, ident=f"a{i}", component=comp_a)
        for i in range(2)
    ]
    theirs = [
        make_random_annotation(rng, kind=AnnotationKind.ANSWER_SPARQL, ident=f"b{i}", component=comp_b)
        for i in range(3)
    ]
    graph = Iri("urn:qanary:process:mixed-graph")
    mixed = []
    for ann in ours + theirs:
        mixed.extend(make_annotation_triples(ann))
    endpoint.graphs[graph.value] = tuple(mixed)

    fetched = fetch_component_output(endpoint.url, graph, comp_a)
    for t in fetched.triples:
        if t.predicate == OA_ANNOTATED_BY:
            assert t.object == comp_a

    expected = make_triple_set(ours, graph=graph.value)
    assert as_multiset(fetched) == as_multiset(expected)

    grouped = group_annotations(fetched)
    assert len(grouped) == 2
    assert all(a.annotated_by == comp_a for a in grouped)


def test_component_without_annotations_yields_empty_set(endpoint):
    rng = random.Random(5)
    other = make_random_annotation(rng, ident="lone", component=Iri("urn:qanary:SINA"))
    original = make_triple_set([other], graph="urn:qanary:process:someone-elses")
    endpoint.seed(original.graph, original.triples)

    fetched = fetch_component_output(
        endpoint.url, original.graph, Iri("urn:qanary:TextRazor")
    )
    assert fetched.triples == ()
    assert fetched.component == Iri("urn:qanary:TextRazor")


def test_missing_graph_raises_graph_not_found(endpoint):
    with pytest.raises(GraphNotFoundError):
        fetch_component_output(
            endpoint.url,
            Iri("urn:qanary:process:never-seeded"),
            Iri("urn:qanary:TextRazor"),
        )


def test_unreachable_endpoint(endpoint, spot_triple_set):
    with pytest.raises(EndpointUnreachableError):
        fetch_component_output(
            "http://127.0.0.1:9/sparql",
            spot_triple_set.graph,
            spot_triple_set.component,
            client=httpx.Client(timeout=0.5),
        )


def test_http_error_status_is_unreachable(endpoint, spot_triple_set):
    def handler(request: httpx.Request) -> httpx.Response:
        return httpx.Response(503, text="down for maintenance")

    client = httpx.Client(transport=httpx.MockTransport(handler))
    with pytest.raises(EndpointUnreachableError):
        fetch_component_output(
            "http://fake/sparql", spot_triple_set.graph, spot_triple_set.component, client=client
        )


def test_malformed_payload_raises(endpoint, spot_triple_set):
    endpoint.malformed_payload = "<html>surprise!</html>"
    try:
        with pytest.raises(MalformedResultSetError):
            fetch_component_output(endpoint.url, spot_triple_set.graph, spot_triple_set.component)
    finally:
        endpoint.malformed_payload = None


def test_malformed_result_shapes(spot_triple_set):
    shapes = [
        {"head": {}},
        {"results": {}},
        {"results": {"bindings": [{"s": {"type": "uri", "value": "urn:x"}}]}},
        {"results": {"bindings": [{"s": {"type": "wat", "value": "x"}, "p": {}, "o": {}}]}},
    ]
    for payload in shapes:
        def handler(request: httpx.Request, payload=payload) -> httpx.Response:
            body = request.read().decode()
            if "ASK" in body:
                return httpx.Response(200, json={"head": {}, "boolean": True})
            return httpx.Response(200, json=payload)

        client = httpx.Client(transport=httpx.MockTransport(handler))
        with pytest.raises(MalformedResultSetError):
            fetch_component_output(
                "http://fake/sparql",
                spot_triple_set.graph,
                spot_triple_set.component,
                client=client,
            )


def test_ask_without_boolean_is_malformed(spot_triple_set):
    def handler(request: httpx.Request) -> httpx.Response:
        return httpx.Response(200, json={"head": {}})

    client = httpx.Client(transport=httpx.MockTransport(handler))
    with pytest.raises(MalformedResultSetError):
        fetch_component_output(
            "http://fake/sparql", spot_triple_set.graph, spot_triple_set.component, client=client
        )


def test_typed_literal_binding_round_trips():
    def handler(request: httpx.Request) -> httpx.Response:
        body = request.read().decode()
        if "ASK" in body:
            return httpx.Response(200, json={"head": {}, "boolean": True})
        return httpx.Response(
            200,
            json={
                "head": {"vars": ["s", "p", "o"]},
                "results": {
                    "bindings": [
                        {
                            "s": {"type": "bnode", "value": "node1"},
                            "p": {"type": "uri", "value": "http://www.w3.org/ns/oa#annotatedBy"},
                            "o": {"type": "uri", "value": "urn:qanary:TextRazor"},
                        },
                        {
                            "s": {"type": "bnode", "value": "node1"},
                            "p": {"type": "uri", "value": "http://www.w3.org/ns/oa#start"},
                            "o": {
                                "type": "typed-literal",
                                "value": "10",
                                "datatype": "http://www.w3.org/2001/XMLSchema#nonNegativeInteger",
                            },
                        },
                    ]
                },
            },
        )

    client = httpx.Client(transport=httpx.MockTransport(handler))
    fetched = fetch_component_output(
        "http://fake/sparql",
        Iri("urn:qanary:process:typed"),
        Iri("urn:qanary:TextRazor"),
        client=client,
    )
    assert len(fetched.triples) == 2
    literals = [t.object for t in fetched.triples if not isinstance(t.object, Iri)]
    assert literals[0].lexical == "10"
    assert literals[0].datatype.value.endswith("nonNegativeInteger")


def test_fixture_store_answers_get_requests(endpoint, spot_triple_set):
    endpoint.seed(spot_triple_set.graph, spot_triple_set.triples)
    ask = f"ASK {{ GRAPH <{spot_triple_set.graph.value}> {{ ?s ?p ?o }} }}"
    response = httpx.get(endpoint.url, params={"query": ask})
    assert response.status_code == 200
    assert response.json()["boolean"] is True


def test_fixture_store_rejects_unknown_query_shape(endpoint):
    response = httpx.post(endpoint.url, data={"query": "DESCRIBE <urn:x>"})
    assert response.status_code == 400
