"""In-process SPARQL fixture endpoint for tests and demos.

FixtureTriplestore runs a stdlib HTTP server on an ephemeral localhost
port and answers exactly the two query shapes the triplestore client
sends: a graph-existence ASK and the two-hop component closure SELECT.
It does not parse SPARQL; it pulls the graph IRI and component IRI out
of the query text and evaluates the closure with set logic over the
seeded triples. Good enough to stand in for a real store in tests,
useless as a general endpoint.
"""

from __future__ import annotations

import json
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from .model import BlankNode, Iri, Literal, OA_ANNOTATED_BY, Term, Triple

_ASK_GRAPH = re.compile(r"ASK\s*\{\s*GRAPH\s*<([^>]+)>", re.IGNORECASE)
_FROM_GRAPH = re.compile(r"\bFROM\s*<([^>]+)>", re.IGNORECASE)
_COMPONENT = re.compile(re.escape(f"<{OA_ANNOTATED_BY.value}>") + r"\s*<([^>]+)>")


def _json_term(term: Term) -> dict:
    if isinstance(term, Iri):
        return {"type": "uri", "value": term.value}
    if isinstance(term, BlankNode):
        return {"type": "bnode", "value": term.label}
    if isinstance(term, Literal):
        row = {"type": "literal", "value": term.lexical}
        if term.datatype is not None:
            row["datatype"] = term.datatype.value
        return row
    raise TypeError(f"not a term: {term!r}")


def _sort_key(term: Term) -> tuple[int, str, str]:
    if isinstance(term, Iri):
        return (0, term.value, "")
    if isinstance(term, BlankNode):
        return (1, term.label, "")
    return (2, term.lexical, term.datatype.value if term.datatype else "")


def _closure(triples: tuple[Triple, ...], component: Iri) -> list[Triple]:
    annotations = {t.subject for t in triples if t.predicate == OA_ANNOTATED_BY and t.object == component}
    hop1 = {t.object for t in triples if t.subject in annotations and not isinstance(t.object, Literal)}
    hop2 = {t.object for t in triples if t.subject in hop1 and not isinstance(t.object, Literal)}
    subjects = annotations | hop1 | hop2
    rows = {t for t in triples if t.subject in subjects}
    return sorted(rows, key=lambda t: (_sort_key(t.subject), _sort_key(t.predicate), _sort_key(t.object)))


class _Handler(BaseHTTPRequestHandler):
    store: "FixtureTriplestore"

    def log_message(self, format: str, *args) -> None:  # noqa: A002 - stdlib signature
        pass

    def do_GET(self) -> None:
        params = parse_qs(urlparse(self.path).query)
        queries = params.get("query", [])
        self._answer(queries[0] if queries else "")

    def do_POST(self) -> None:
        length = int(self.headers.get("Content-Length", "0"))
        body = self.rfile.read(length).decode("utf-8")
        content_type = self.headers.get("Content-Type", "")
        if content_type.startswith("application/x-www-form-urlencoded"):
            queries = parse_qs(body).get("query", [])
            query = queries[0] if queries else ""
        else:
            query = body
        self._answer(query)

    def _reply(self, status: int, payload: dict | str) -> None:
        if isinstance(payload, dict):
            raw = json.dumps(payload).encode("utf-8")
            content_type = "application/sparql-results+json"
        else:
            raw = payload.encode("utf-8")
            content_type = "text/plain"
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(raw)))
        self.end_headers()
        self.wfile.write(raw)

    def _answer(self, query: str) -> None:
        if self.store.malformed_payload is not None:
            self._reply(200, self.store.malformed_payload)
            return

        ask = _ASK_GRAPH.search(query)
        if ask:
            triples = self.store.graphs.get(ask.group(1), ())
            self._reply(200, {"head": {}, "boolean": bool(triples)})
            return

        from_graph = _FROM_GRAPH.search(query)
        component = _COMPONENT.search(query)
        if not from_graph or not component:
            self._reply(400, "unsupported query shape")
            return
        triples = self.store.graphs.get(from_graph.group(1), ())
        rows = _closure(triples, Iri(component.group(1)))
        bindings = [
            {"s": _json_term(t.subject), "p": _json_term(t.predicate), "o": _json_term(t.object)}
            for t in rows
        ]
        self._reply(200, {"head": {"vars": ["s", "p", "o"]}, "results": {"bindings": bindings}})


class FixtureTriplestore:
    """Seedable localhost SPARQL endpoint, usable as a context manager."""

    def __init__(self) -> None:
        self.graphs: dict[str, tuple[Triple, ...]] = {}
        self.malformed_payload: str | None = None
        handler = type("BoundHandler", (_Handler,), {"store": self})
        self._server = ThreadingHTTPServer(("127.0.0.1", 0), handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}/sparql"

    def seed(self, graph: Iri, triples: tuple[Triple, ...]) -> None:
        self.graphs[graph.value] = tuple(triples)

    def start(self) -> "FixtureTriplestore":
        self._thread.start()
        return self

    def stop(self) -> None:
        self._server.shutdown()
        self._server.server_close()

    def __enter__(self) -> "FixtureTriplestore":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.stop()
