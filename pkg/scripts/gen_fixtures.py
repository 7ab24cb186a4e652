#!/usr/bin/env python3
"""Regenerate the synthetic assets shipped inside qaexplain.

Everything here is deterministic: rerunning the script must produce
byte-identical files. Randomness is drawn from sha256-seeded rng
instances, never from the builtin hash.

Generated trees (under src/qaexplain/assets/):
  examples/output/<kind>/   data.nt, explanation.txt, meta.json
  examples/input/<key>/     query.rq, explanation.txt
  corpus/                   per-component annotation sets + index.json
  data/qald10.json          synthetic question set, 394 entries
"""

from __future__ import annotations

import argparse
import hashlib
import json
import random
from decimal import Decimal
from pathlib import Path

from qaexplain.model import (
    COMPONENTS_BY_KIND,
    Annotation,
    AnnotationKind,
    Iri,
    Literal,
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
    TextSpan,
    Triple,
    TripleSet,
    XSD,
)
from qaexplain.ntriples import serialize_ntriples
from qaexplain.queries import default_query_registry
from qaexplain.templates import explain_input, explain_output

ASSETS = Path(__file__).resolve().parents[1] / "src" / "qaexplain" / "assets"

QUESTION_COUNT = 394
SETS_PER_COMPONENT = 3


def seeded_rng(*parts: object) -> random.Random:
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode()).hexdigest()
    return random.Random(int(digest[:12], 16))


def subgraph(ann: Annotation) -> list[Triple]:
    # annotation nodes are blank nodes, matching how Qanary components write them
    from qaexplain.model import BlankNode

    node = BlankNode(ann.id)
    triples = [
        Triple(node, RDF_TYPE, ann.kind.class_iri),
        Triple(node, OA_ANNOTATED_BY, ann.annotated_by),
    ]
    if ann.annotated_at is not None:
        triples.append(Triple(node, OA_ANNOTATED_AT, Literal(ann.annotated_at, Iri(XSD + "dateTime"))))
    if ann.score is not None:
        triples.append(Triple(node, QA_SCORE, Literal(str(ann.score))))
    target = BlankNode(f"target-{ann.id}")
    triples.append(Triple(node, OA_HAS_TARGET, target))
    if ann.target_question is not None:
        triples.append(Triple(target, OA_HAS_SOURCE, ann.target_question))
    if ann.selector is not None:
        sel = BlankNode(f"selector-{ann.id}")
        triples.append(Triple(target, OA_HAS_SELECTOR, sel))
        triples.append(Triple(sel, RDF_TYPE, OA_TEXT_POSITION_SELECTOR))
        triples.append(Triple(sel, OA_START, Literal(str(ann.selector.start))))
        triples.append(Triple(sel, OA_END, Literal(str(ann.selector.end))))
    if ann.body is not None:
        triples.append(Triple(node, OA_HAS_BODY, ann.body))
    return triples


def triple_set(annotations: list[Annotation], graph: str) -> TripleSet:
    triples: list[Triple] = []
    for ann in annotations:
        triples.extend(subgraph(ann))
    return TripleSet(graph=Iri(graph), component=annotations[0].annotated_by, triples=tuple(triples))


ENTITIES = [
    "Berlin", "Paris", "Lyon", "Heidelberg", "Oslo", "Kyoto", "Valencia",
    "Novel_Prize", "Amazon_River", "Mount_Kilimanjaro", "Lake_Geneva",
    "Marie_Curie", "Alan_Turing", "Ada_Lovelace", "Grace_Hopper",
]

RELATIONS = ["capital", "spouse", "birthPlace", "population", "elevation", "author", "currency", "mayor"]


def random_annotation(rng: random.Random, kind: AnnotationKind, component: str, question_id: int, ident: str) -> Annotation:
    stamp = (
        f"2023-{rng.randint(1, 12):02d}-{rng.randint(1, 28):02d}"
        f"T{rng.randint(0, 23):02d}:{rng.randint(0, 59):02d}:{rng.randint(0, 59):02d}"
        f".{rng.randint(0, 99999):05d}Z"
    )
    score = Decimal(f"0.{rng.randint(0, 999999):06d}") if rng.random() < 0.7 else None
    selector = None
    if kind in (AnnotationKind.INSTANCE, AnnotationKind.SPOT_INSTANCE) or rng.random() < 0.3:
        start = rng.randint(0, 60)
        selector = TextSpan(start=start, end=start + rng.randint(1, 20))
    body = None
    if kind is AnnotationKind.INSTANCE:
        body = Iri(f"http://dbpedia.org/resource/{rng.choice(ENTITIES)}")
    elif kind is AnnotationKind.RELATION:
        body = Iri(f"http://dbpedia.org/ontology/{rng.choice(RELATIONS)}")
    elif kind is AnnotationKind.ANSWER_SPARQL:
        body = Literal(
            "SELECT DISTINCT ?uri WHERE { "
            f"<http://dbpedia.org/resource/{rng.choice(ENTITIES)}> "
            f"<http://dbpedia.org/ontology/{rng.choice(RELATIONS)}> ?uri . "
            "}"
        )
    return Annotation(
        id=ident,
        kind=kind,
        annotated_by=Iri(component),
        annotated_at=stamp,
        score=score,
        target_question=Iri(f"urn:qald:q{question_id}"),
        selector=selector,
        body=body,
    )


def write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def gen_output_examples() -> None:
    picks = {
        AnnotationKind.INSTANCE: Annotation(
            id="ex-instance",
            kind=AnnotationKind.INSTANCE,
            annotated_by=Iri("urn:qanary:NED-DBpediaSpotlight"),
            annotated_at="2023-10-18T08:03:21.04512Z",
            score=Decimal("0.9141"),
            target_question=Iri("urn:qald:q17"),
            selector=TextSpan(0, 6),
            body=Iri("http://dbpedia.org/resource/Berlin"),
        ),
        AnnotationKind.SPOT_INSTANCE: Annotation(
            id="ex-spot",
            kind=AnnotationKind.SPOT_INSTANCE,
            annotated_by=Iri("urn:qanary:NER-DBpediaSpotlight"),
            annotated_at="2023-10-18T07:59:04.11987Z",
            score=Decimal("0.73"),
            target_question=Iri("urn:qald:q23"),
            selector=TextSpan(10, 16),
            body=None,
        ),
        AnnotationKind.RELATION: Annotation(
            id="ex-relation",
            kind=AnnotationKind.RELATION,
            annotated_by=Iri("urn:qanary:REL-Python-Falcon"),
            annotated_at="2023-10-18T08:11:45.30265Z",
            score=Decimal("0.8315"),
            target_question=Iri("urn:qald:q31"),
            selector=TextSpan(4, 11),
            body=Iri("http://dbpedia.org/ontology/spouse"),
        ),
        AnnotationKind.ANSWER_SPARQL: Annotation(
            id="ex-sparql",
            kind=AnnotationKind.ANSWER_SPARQL,
            annotated_by=Iri("urn:qanary:SINA"),
            annotated_at="2023-10-18T08:20:12.77731Z",
            score=Decimal("0.5"),
            target_question=Iri("urn:qald:q8"),
            selector=None,
            body=Literal(
                "SELECT DISTINCT ?uri WHERE { "
                "<http://dbpedia.org/resource/Berlin> "
                "<http://dbpedia.org/ontology/country> ?uri . }"
            ),
        ),
    }
    for kind, ann in picks.items():
        graph = f"urn:qanary:process:example-{kind.value}"
        ts = triple_set([ann], graph)
        directory = ASSETS / "examples" / "output" / kind.value
        write(directory / "data.nt", serialize_ntriples(ts.triples) + "\n")
        write(directory / "explanation.txt", explain_output(ts).text + "\n")
        write(
            directory / "meta.json",
            json.dumps(
                {"kind": kind.value, "questionId": ann.target_question.value, "graph": graph},
                indent=2,
            )
            + "\n",
        )


def gen_input_examples() -> None:
    for record in default_query_registry().all():
        directory = ASSETS / "examples" / "input" / record.key.value
        write(directory / "query.rq", record.text.rstrip("\n") + "\n")
        write(directory / "explanation.txt", explain_input(record.key).text + "\n")


def gen_corpus() -> None:
    corpus = ASSETS / "corpus"
    corpus.mkdir(parents=True, exist_ok=True)
    index = []
    for kind in AnnotationKind:
        for component in COMPONENTS_BY_KIND[kind]:
            local = component.rsplit(":", 1)[-1]
            for i in range(SETS_PER_COMPONENT):
                rng = seeded_rng("corpus", component, i)
                question_id = rng.randint(1, QUESTION_COUNT)
                count = rng.randint(1, 4)
                annotations = [
                    random_annotation(rng, kind, component, question_id, f"ann{rng.getrandbits(48):012x}")
                    for _ in range(count)
                ]
                graph = f"urn:qanary:process:{seeded_rng('graph', component, i).getrandbits(48):012x}"
                ts = triple_set(annotations, graph)
                name = f"{kind.value}_{local}_{i}.nt"
                write(corpus / name, serialize_ntriples(ts.triples) + "\n")
                index.append(
                    {
                        "file": name,
                        "kind": kind.value,
                        "component": component,
                        "graph": graph,
                        "questionId": f"urn:qald:q{question_id}",
                        "annotations": count,
                    }
                )
    write(corpus / "index.json", json.dumps(index, indent=2) + "\n")


QUESTION_PATTERNS = [
    "What is the capital of {a}?",
    "Who wrote {a}?",
    "When was {a} born?",
    "Which river flows through {a}?",
    "How many inhabitants does {a} have?",
    "Who is the mayor of {a}?",
    "In which country is {a} located?",
    "What is the highest mountain in {a}?",
    "Who discovered {a}?",
    "What currency is used in {a}?",
    "Which university did {a} attend?",
    "What is the population of {a}?",
    "Who founded {a}?",
    "Which language is spoken in {a}?",
    "When did {a} end?",
]

QUESTION_FILLERS = [
    "Germany", "France", "Norway", "Japan", "Spain", "Portugal", "Austria",
    "Berlin", "Paris", "Lyon", "Heidelberg", "Oslo", "Kyoto", "Valencia",
    "the Rhine valley", "the Amazon basin", "the Alps", "Mount Kilimanjaro",
    "Marie Curie", "Alan Turing", "Ada Lovelace", "Grace Hopper",
    "the Second World War", "the Roman Empire", "the Hanseatic League",
    "penicillin", "the electron", "radium", "the World Wide Web",
    "the University of Leipzig", "the Sorbonne", "Lake Geneva",
]


def gen_qald() -> None:
    rng = seeded_rng("qald", QUESTION_COUNT)
    seen: set[str] = set()
    questions = []
    next_id = 1
    while next_id <= QUESTION_COUNT:
        text = rng.choice(QUESTION_PATTERNS).format(a=rng.choice(QUESTION_FILLERS))
        if text in seen:
            continue
        seen.add(text)
        questions.append({"id": str(next_id), "question": [{"language": "en", "string": text}]})
        next_id += 1
    write(ASSETS / "data" / "qald10.json", json.dumps({"questions": questions}, indent=2) + "\n")


def gen_mock() -> None:
    """Recorded fixture responses, keyed by sha256 of the full prompt text."""
    from qaexplain.gateway import prompt_hash
    from qaexplain.prompts import build_input_prompt, build_output_prompt

    fixtures = {}

    raw = (ASSETS / "fixtures" / "textrazor_spot.nt").read_text(encoding="utf-8").rstrip("\n")
    out_prompt = build_output_prompt([], raw, "urn:qanary:question:fixture")
    fixtures[prompt_hash(out_prompt.text)] = (
        "The component urn:qanary:TextRazor has added 1 annotation(s) to the graph: "
        "1. on 2023-10-18T07:57:57.82089Z with a confidence of 0.4794646229033659 "
        "and the resource http://qanary/#result0.4794646229033659."
    )

    instance_query = (
        ASSETS / "examples" / "input" / "select_instance_annotations" / "query.rq"
    ).read_text(encoding="utf-8").rstrip("\n")
    in_prompt = build_input_prompt(None, instance_query, "NED-DBpediaSpotlight")
    fixtures[prompt_hash(in_prompt.text)] = (
        "The query selects every instance annotation from the process graph, returning "
        "its creation date, source question, linked resource, text position and an "
        "optional score."
    )

    write(ASSETS / "mock" / "responses.json", json.dumps(fixtures, indent=2) + "\n")


GENERATORS = {
    "output-examples": gen_output_examples,
    "input-examples": gen_input_examples,
    "corpus": gen_corpus,
    "qald": gen_qald,
    "mock": gen_mock,
}


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--only", choices=sorted(GENERATORS), action="append")
    args = parser.parse_args()
    targets = args.only or sorted(GENERATORS)
    for name in targets:
        GENERATORS[name]()
        print(f"generated {name}")


if __name__ == "__main__":
    main()
