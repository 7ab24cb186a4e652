"""Read a component's recorded output from a SPARQL endpoint.

The fetch runs two queries: an ASK probing that the named graph holds
any data at all (so a missing graph is reported as GraphNotFound rather
than silently returning nothing), then a SELECT projecting (s, p, o)
rows for the component's annotation nodes plus everything reachable in
two hops (target and selector chain, bodies). The triple-shaped
projection lets the regular grouping path materialize the result.

A component with no annotations in an existing graph yields an empty
TripleSet; that is a valid outcome, not an error.
"""

from __future__ import annotations

import json

import httpx

from .model import BlankNode, ExplainError, Iri, Literal, OA_ANNOTATED_BY, Term, Triple, TripleSet


class EndpointUnreachableError(ExplainError):
    """Transport-level failure talking to the SPARQL endpoint."""


class GraphNotFoundError(ExplainError):
    """The named graph holds no data on this endpoint."""


class MalformedResultSetError(ExplainError):
    """Endpoint response is not a SPARQL JSON result set."""


def _ask_query(graph: Iri) -> str:
    return f"ASK {{ GRAPH <{graph.value}> {{ ?s ?p ?o }} }}"


def _closure_query(graph: Iri, component: Iri) -> str:
    by = OA_ANNOTATED_BY.value
    return (
        "SELECT DISTINCT ?s ?p ?o "
        f"FROM <{graph.value}> "
        "WHERE { "
        f"{{ ?s <{by}> <{component.value}> . ?s ?p ?o . }} "
        "UNION "
        f"{{ ?ann <{by}> <{component.value}> . ?ann ?l1 ?s . ?s ?p ?o . }} "
        "UNION "
        f"{{ ?ann <{by}> <{component.value}> . ?ann ?l1 ?mid . ?mid ?l2 ?s . ?s ?p ?o . }} "
        "} ORDER BY ?s ?p ?o"
    )


def _post(client: httpx.Client, endpoint: str, query: str) -> dict:
    try:
        response = client.post(
            endpoint,
            data={"query": query},
            headers={"Accept": "application/sparql-results+json"},
        )
    except httpx.HTTPError as exc:
        raise EndpointUnreachableError(f"{endpoint}: {exc}") from exc
    if response.status_code >= 400:
        raise EndpointUnreachableError(f"{endpoint}: HTTP {response.status_code}")
    try:
        return response.json()
    except (json.JSONDecodeError, ValueError) as exc:
        raise MalformedResultSetError(f"not JSON: {exc}") from exc


def _term_from_binding(binding: dict) -> Term:
    try:
        kind = binding["type"]
        value = binding["value"]
    except (KeyError, TypeError) as exc:
        raise MalformedResultSetError(f"bad binding {binding!r}") from exc
    if kind == "uri":
        return Iri(value)
    if kind == "bnode":
        return BlankNode(value)
    if kind in ("literal", "typed-literal"):
        datatype = binding.get("datatype")
        return Literal(value, Iri(datatype) if datatype else None)
    raise MalformedResultSetError(f"unknown term type {kind!r}")


def fetch_component_output(
    endpoint: str,
    graph: Iri,
    component: Iri,
    client: httpx.Client | None = None,
    timeout: float = 15.0,
) -> TripleSet:
    """Materialize one component's annotations from a process graph."""
    own_client = client is None
    client = client or httpx.Client(timeout=timeout)
    try:
        ask = _post(client, endpoint, _ask_query(graph))
        if "boolean" not in ask:
            raise MalformedResultSetError(f"ASK result lacks boolean: {ask!r}")
        if not ask["boolean"]:
            raise GraphNotFoundError(f"graph {graph.value} holds no data at {endpoint}")

        result = _post(client, endpoint, _closure_query(graph, component))
        try:
            rows = result["results"]["bindings"]
        except (KeyError, TypeError) as exc:
            raise MalformedResultSetError(f"missing results.bindings: {result!r}") from exc

        triples = []
        for row in rows:
            try:
                s = _term_from_binding(row["s"])
                p = _term_from_binding(row["p"])
                o = _term_from_binding(row["o"])
            except KeyError as exc:
                raise MalformedResultSetError(f"row missing variable: {row!r}") from exc
            if not isinstance(p, Iri):
                raise MalformedResultSetError(f"predicate is not an IRI: {row!r}")
            triples.append(Triple(s, p, o))
        return TripleSet(graph=graph, component=component, triples=tuple(triples))
    finally:
        if own_client:
            client.close()
