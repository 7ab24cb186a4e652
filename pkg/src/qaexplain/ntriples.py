"""Parser and serializer for grounded triples.

Accepts strict N-Triples plus the abbreviated shorthand found in recorded
Qanary data: prefixed names (rdf:, oa:, qa:, xsd:), bare node identifiers
(treated as blank-node-like local ids), unquoted numbers as literal
objects, and a terminal '.' that may be glued to the last token.
Statements may span lines; full-line '#' comments are skipped.
"""

from __future__ import annotations

import re
from typing import Iterable

from qaexplain.model import (
    PREFIXES,
    BlankNode,
    ExplainError,
    Iri,
    Literal,
    OA_ANNOTATED_BY,
    RDF_TYPE,
    Term,
    Triple,
    TripleSet,
    UnknownPrefixError,
    resolve_curie,
)


class NtSyntaxError(ExplainError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class VariableNotAllowedError(ExplainError):
    """Raised when the data contains a SPARQL variable: triples must be grounded."""

    def __init__(self, line: int, token: str):
        super().__init__(f"line {line}: variable {token!r} not allowed in grounded data")
        self.line = line


_NUMERIC = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")

_ESCAPES = {"t": "\t", "n": "\n", "r": "\r", '"': '"', "\\": "\\", "b": "\b", "f": "\f"}


def _unescape(raw: str, line: int) -> str:
    if "\\" not in raw:
        return raw
    out = []
    i = 0
    while i < len(raw):
        c = raw[i]
        if c != "\\":
            out.append(c)
            i += 1
            continue
        if i + 1 >= len(raw):
            raise NtSyntaxError(line, "dangling escape in literal")
        nxt = raw[i + 1]
        if nxt in _ESCAPES:
            out.append(_ESCAPES[nxt])
            i += 2
        elif nxt == "u" and i + 6 <= len(raw):
            out.append(chr(int(raw[i + 2 : i + 6], 16)))
            i += 6
        elif nxt == "U" and i + 10 <= len(raw):
            out.append(chr(int(raw[i + 2 : i + 10], 16)))
            i += 10
        else:
            raise NtSyntaxError(line, f"unsupported escape \\{nxt}")
    return "".join(out)


def _tokenize(text: str):
    """Yield (kind, payload, line) tokens.

    Kinds: 'iri' (unwrapped), 'literal' ((lexical, datatype_token)), 'bare', 'dot'.
    """
    i = 0
    n = len(text)
    line = 1
    at_line_start = True
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            at_line_start = True
            i += 1
            continue
        if c.isspace():
            i += 1
            continue
        if c == "#" and at_line_start:
            while i < n and text[i] != "\n":
                i += 1
            continue
        at_line_start = False
        if c == ".":
            yield ("dot", ".", line)
            i += 1
            continue
        if c == "<":
            j = text.find(">", i)
            if j < 0:
                raise NtSyntaxError(line, "unterminated IRI")
            yield ("iri", text[i + 1 : j], line)
            i = j + 1
            continue
        if c == '"':
            j = i + 1
            while j < n:
                if text[j] == "\\":
                    j += 2
                    continue
                if text[j] == '"':
                    break
                if text[j] == "\n":
                    line += 1
                j += 1
            if j >= n:
                raise NtSyntaxError(line, "unterminated literal")
            lexical = _unescape(text[i + 1 : j], line)
            i = j + 1
            datatype = None
            if text.startswith("^^", i):
                i += 2
                if i < n and text[i] == "<":
                    k = text.find(">", i)
                    if k < 0:
                        raise NtSyntaxError(line, "unterminated datatype IRI")
                    datatype = text[i : k + 1]
                    i = k + 1
                else:
                    k = i
                    while k < n and not text[k].isspace() and text[k] != ".":
                        k += 1
                    datatype = text[i:k]
                    i = k
            elif i < n and text[i] == "@":
                k = i
                while k < n and not text[k].isspace():
                    k += 1
                # language tags are accepted and dropped; lexical form is what matters
                i = k
            yield ("literal", (lexical, datatype), line)
            continue
        j = i
        while j < n and not text[j].isspace():
            j += 1
        token = text[i:j]
        i = j
        # a terminal '.' may be glued to the last token of a statement
        if token != "." and token.endswith("."):
            token = token[:-1]
            if token:
                yield ("bare", token, line)
            yield ("dot", ".", line)
            continue
        yield ("bare", token, line)


def _resolve_node(kind: str, payload, line: int, table: dict[str, str], position: str) -> Term:
    if kind == "iri":
        return Iri(payload)
    if kind == "literal":
        lexical, dt_token = payload
        if position != "object":
            raise NtSyntaxError(line, f"literal not allowed as {position}")
        datatype = None
        if dt_token:
            try:
                datatype = resolve_curie(dt_token, table)
            except UnknownPrefixError as e:
                raise NtSyntaxError(line, str(e)) from e
        return Literal(lexical, datatype)
    token = payload
    if token.startswith("?") or token.startswith("$"):
        raise VariableNotAllowedError(line, token)
    if token.startswith("_:"):
        label = token[2:]
        if not label:
            raise NtSyntaxError(line, "empty blank node label")
        return BlankNode(label)
    if position == "object" and _NUMERIC.match(token):
        return Literal(token)
    if ":" in token:
        try:
            return resolve_curie(token, table)
        except UnknownPrefixError as e:
            raise NtSyntaxError(line, str(e)) from e
    if position == "predicate" and token == "a":
        return RDF_TYPE
    if _NUMERIC.match(token) and position == "subject":
        # numeric-looking node ids occur in recorded data; keep them as node labels
        return BlankNode(token)
    return BlankNode(token)


def parse_ntriples(text: str, prefix_table: dict[str, str] | None = None) -> list[Triple]:
    """Parse grounded triples; raises NtSyntaxError / VariableNotAllowedError."""
    table = PREFIXES if prefix_table is None else prefix_table
    triples: list[Triple] = []
    statement: list[tuple[str, object, int]] = []
    for kind, payload, line in _tokenize(text):
        if kind == "dot":
            if len(statement) != 3:
                raise NtSyntaxError(line, f"statement has {len(statement)} terms, expected 3")
            (sk, sp, sl), (pk, pp, pl), (ok, op, ol) = statement
            subject = _resolve_node(sk, sp, sl, table, "subject")
            predicate = _resolve_node(pk, pp, pl, table, "predicate")
            if not isinstance(predicate, Iri):
                raise NtSyntaxError(pl, f"predicate must be an IRI, got {predicate!r}")
            obj = _resolve_node(ok, op, ol, table, "object")
            triples.append(Triple(subject, predicate, obj))
            statement = []
            continue
        statement.append((kind, payload, line))
        if len(statement) > 3:
            raise NtSyntaxError(line, "statement not terminated with '.'")
    if statement:
        raise NtSyntaxError(statement[-1][2], "unterminated statement at end of input")
    return triples


def _escape(lexical: str) -> str:
    return (
        lexical.replace("\\", "\\\\")
        .replace('"', '\\"')
        .replace("\n", "\\n")
        .replace("\r", "\\r")
        .replace("\t", "\\t")
    )


def _term_nt(term: Term) -> str:
    if isinstance(term, Iri):
        return f"<{term.value}>"
    if isinstance(term, BlankNode):
        return f"_:{term.label}"
    if term.datatype is not None:
        return f'"{_escape(term.lexical)}"^^<{term.datatype.value}>'
    return f'"{_escape(term.lexical)}"'


def serialize_ntriples(triples: Iterable[Triple]) -> str:
    """Canonical N-Triples serialization; parse(serialize(x)) preserves the triple multiset."""
    return "".join(
        f"{_term_nt(t.subject)} {_term_nt(t.predicate)} {_term_nt(t.object)} .\n"
        for t in triples
    )


def infer_component(triples: Iterable[Triple]) -> Iri | None:
    """First oa:annotatedBy IRI object, if any."""
    for t in triples:
        if t.predicate == OA_ANNOTATED_BY and isinstance(t.object, Iri):
            return t.object
    return None


def parse_triple_set(
    text: str,
    graph: Iri | str,
    component: Iri | str | None = None,
) -> TripleSet:
    """Parse raw triples into an attributed TripleSet.

    When component is omitted it is inferred from the first oa:annotatedBy
    object; data without any attribution is rejected.
    """
    triples = parse_ntriples(text)
    if component is None:
        component = infer_component(triples)
        if component is None:
            raise ExplainError("cannot infer component: no oa:annotatedBy triple present")
    if isinstance(graph, str):
        graph = Iri(graph)
    if isinstance(component, str):
        component = Iri(component)
    return TripleSet(graph=graph, component=component, triples=tuple(triples))
