"""Experiment matrix runner.

Drives the output-data explanation experiments: for every cell of
(example-kind combination x test kind x model) it samples recorded
component outputs from the shipped corpus, builds the prompt, asks the
gateway for an explanation, scores it against the ground-truth
annotations, and aggregates the cell means into a matrix.

Everything is keyed off the plan seed: each trial derives its own
generator from sha256(seed|combo|testKind|model|trial), so cells and
trials are reproducible independently of execution order or worker
count. With the mock gateway a rerun is byte-identical.

Input-data explanations have no ground-truth annotations to score
against, so input experiment matrices are out of scope here; they are
rated by people through the service and frontend instead.
"""

from __future__ import annotations

import csv
import hashlib
import json
import random
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from itertools import combinations_with_replacement
from pathlib import Path

from .gateway import ChatGateway, GatewayError
from .model import AnnotationKind, ExplainError, Iri, SubjectKind
from .ntriples import parse_triple_set
from .prompts import build_output_prompt, output_example_pool, select_examples
from .scoring import (
    ExperimentResult,
    ScoredExplanation,
    aggregate,
    evaluate_output_explanation,
    format_qe,
    marginal_means,
)

TRIAL_COLUMNS = (
    "questionId",
    "component",
    "exampleKinds",
    "testKind",
    "model",
    "shots",
    "prefixRating",
    "annotationRatings",
    "qE",
    "checks_json",
)
EXCLUSION_COLUMNS = ("exampleKinds", "testKind", "model", "trial", "error", "detail")


class PlanInfeasibleError(ExplainError):
    """The plan asks for kinds the example pool or corpus cannot serve."""


class DatasetTooSmallError(ExplainError):
    """The question dataset does not cover the corpus references."""


class DatasetParseError(ExplainError):
    """Dataset file exists but is not a recognized layout."""


class EmptyDatasetError(ExplainError):
    """Dataset parsed but contains no questions."""


@dataclass(frozen=True)
class Question:
    id: str
    text: str


@dataclass(frozen=True)
class QuestionDataset:
    questions: tuple[Question, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "questions", tuple(self.questions))
        if not self.questions:
            raise EmptyDatasetError("dataset holds no questions")
        ids = [q.id for q in self.questions]
        if len(set(ids)) != len(ids):
            raise DatasetParseError("duplicate question ids in dataset")

    def ids(self) -> frozenset[str]:
        return frozenset(q.id for q in self.questions)


def _question_text(entry: dict, qid: str) -> str:
    variants = entry.get("question")
    if isinstance(variants, str):
        return variants
    if isinstance(variants, list):
        by_language = {v.get("language"): v.get("string") for v in variants if isinstance(v, dict)}
        if isinstance(by_language.get("en"), str):
            return by_language["en"]
        for value in by_language.values():
            if isinstance(value, str):
                warnings.warn(f"question {qid} has no English variant; using first available")
                return value
    text = entry.get("text")
    if isinstance(text, str):
        return text
    raise DatasetParseError(f"question {qid} has no usable text")


def load_dataset(path: str | Path) -> QuestionDataset:
    """Read a QALD-layout question file, or a plain list of {id, text}."""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DatasetParseError(f"{path}: {exc}") from exc

    if isinstance(payload, dict) and isinstance(payload.get("questions"), list):
        entries = payload["questions"]
    elif isinstance(payload, list):
        entries = payload
    else:
        raise DatasetParseError(f"{path}: neither a QALD layout nor a plain question list")

    questions = []
    for entry in entries:
        if not isinstance(entry, dict) or "id" not in entry:
            raise DatasetParseError(f"{path}: question entry without id: {entry!r}")
        qid = str(entry["id"])
        questions.append(Question(id=qid, text=_question_text(entry, qid)))
    return QuestionDataset(questions=tuple(questions))


def shipped_dataset_path() -> Path:
    return Path(str(resources.files("qaexplain") / "assets" / "data" / "qald10.json"))


@dataclass(frozen=True)
class CorpusEntry:
    """One recorded component output in the shipped corpus."""

    file: str
    kind: AnnotationKind
    component: Iri
    graph: Iri
    question_id: str
    annotations: int

    def text(self) -> str:
        root = resources.files("qaexplain") / "assets" / "corpus"
        return (root / self.file).read_text(encoding="utf-8")

    @property
    def question_number(self) -> str:
        return self.question_id.rsplit("q", 1)[-1]


def load_corpus() -> tuple[CorpusEntry, ...]:
    root = resources.files("qaexplain") / "assets" / "corpus"
    index = json.loads((root / "index.json").read_text(encoding="utf-8"))
    return tuple(
        CorpusEntry(
            file=row["file"],
            kind=AnnotationKind(row["kind"]),
            component=Iri(row["component"]),
            graph=Iri(row["graph"]),
            question_id=row["questionId"],
            annotations=int(row["annotations"]),
        )
        for row in index
    )


def derive_combos(shots: int, kinds: tuple[AnnotationKind, ...]) -> tuple[tuple[AnnotationKind, ...], ...]:
    """All unordered example-kind combinations with repetition for a shot count."""
    return tuple(combinations_with_replacement(kinds, shots))


@dataclass(frozen=True)
class ExperimentPlan:
    shots: int
    subject_kind: SubjectKind
    model_ids: tuple[str, ...]
    example_kind_combos: tuple[tuple[AnnotationKind, ...], ...]
    test_kinds: tuple[AnnotationKind, ...]
    trials_per_cell: int = 50
    dataset_path: Path = field(default_factory=shipped_dataset_path)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.shots not in (0, 1, 2):
            raise ValueError(f"shots must be 0, 1 or 2, got {self.shots}")
        if self.trials_per_cell < 1:
            raise ValueError("trialsPerCell must be >= 1")
        if not self.model_ids:
            raise ValueError("at least one model id required")
        if not self.test_kinds:
            raise ValueError("at least one test kind required")
        if not self.example_kind_combos:
            raise ValueError("at least one example-kind combination required")
        for combo in self.example_kind_combos:
            if len(combo) != self.shots:
                raise ValueError(f"combo {combo} does not match shots={self.shots}")


def load_plan(source: str | Path | dict) -> ExperimentPlan:
    """Build a plan from a JSON file or an already-parsed dict."""
    if isinstance(source, (str, Path)):
        payload = json.loads(Path(source).read_text(encoding="utf-8"))
    else:
        payload = dict(source)

    shots = int(payload.get("shots", 1))
    subject = SubjectKind(payload.get("subjectKind", "output"))
    kinds = tuple(AnnotationKind(k) for k in payload.get("testKinds", [k.value for k in AnnotationKind]))
    combo_source = payload.get("exampleKindCombos")
    if combo_source is None:
        combos = derive_combos(shots, tuple(AnnotationKind))
    else:
        combos = tuple(tuple(AnnotationKind(k) for k in combo) for combo in combo_source)
    dataset_path = Path(payload["datasetPath"]) if payload.get("datasetPath") else shipped_dataset_path()
    return ExperimentPlan(
        shots=shots,
        subject_kind=subject,
        model_ids=tuple(payload.get("modelIds", ["mock"])),
        example_kind_combos=combos,
        test_kinds=kinds,
        trials_per_cell=int(payload.get("trialsPerCell", 50)),
        dataset_path=dataset_path,
        seed=int(payload.get("seed", 0)),
    )


def combo_label(combo: tuple[AnnotationKind, ...]) -> str:
    return "+".join(k.value for k in combo)


def trial_digest(seed: int, combo: tuple[AnnotationKind, ...], test_kind: AnnotationKind, model: str, trial: int) -> str:
    key = f"{seed}|{combo_label(combo)}|{test_kind.value}|{model}|{trial}"
    return hashlib.sha256(key.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class TrialRecord:
    question_id: str
    component: Iri
    example_kinds: tuple[AnnotationKind, ...]
    test_kind: AnnotationKind
    model_id: str
    shots: int
    scored: ScoredExplanation

    def as_row(self) -> dict:
        score = self.scored.score
        return {
            "questionId": self.question_id,
            "component": self.component.value,
            "exampleKinds": combo_label(self.example_kinds),
            "testKind": self.test_kind.value,
            "model": self.model_id,
            "shots": str(self.shots),
            "prefixRating": str(score.prefix_rating),
            "annotationRatings": ";".join(str(r) for r in score.annotation_ratings),
            "qE": str(float(score.q_e)),
            "checks_json": self.scored.checks_as_json(),
        }


@dataclass(frozen=True)
class ExclusionRecord:
    example_kinds: tuple[AnnotationKind, ...]
    test_kind: AnnotationKind
    model_id: str
    trial: int
    error: str
    detail: str

    def as_row(self) -> dict:
        return {
            "exampleKinds": combo_label(self.example_kinds),
            "testKind": self.test_kind.value,
            "model": self.model_id,
            "trial": str(self.trial),
            "error": self.error,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class RunReport:
    results: tuple[ExperimentResult, ...]
    marginals: dict
    trials: tuple[TrialRecord, ...]
    exclusions: tuple[ExclusionRecord, ...]
    out_dir: Path

    @property
    def trials_csv(self) -> Path:
        return self.out_dir / "trials.csv"

    @property
    def matrix_csv(self) -> Path:
        return self.out_dir / "matrix.csv"

    @property
    def matrix_json(self) -> Path:
        return self.out_dir / "matrix.json"


def _check_feasible(plan: ExperimentPlan, corpus: tuple[CorpusEntry, ...], dataset: QuestionDataset) -> None:
    if plan.subject_kind is not SubjectKind.OUTPUT_DATA:
        raise PlanInfeasibleError(
            "the matrix runner scores output-data explanations; "
            "input-data explanations are rated through the service instead"
        )
    pool_kinds = {example.kind for example in output_example_pool()}
    for combo in plan.example_kind_combos:
        missing = [k.value for k in combo if k not in pool_kinds]
        if missing:
            raise PlanInfeasibleError(f"no examples for kinds: {', '.join(missing)}")
    by_kind: dict[AnnotationKind, list[CorpusEntry]] = {}
    for entry in corpus:
        by_kind.setdefault(entry.kind, []).append(entry)
    for kind in plan.test_kinds:
        if not by_kind.get(kind):
            raise PlanInfeasibleError(f"corpus holds no recorded output for kind {kind.value}")
    known = dataset.ids()
    for kind in plan.test_kinds:
        for entry in by_kind[kind]:
            if entry.question_number not in known:
                raise DatasetTooSmallError(
                    f"corpus entry {entry.file} references question {entry.question_number} "
                    f"missing from the dataset ({len(known)} questions)"
                )


def _run_trial(
    plan: ExperimentPlan,
    gateway: ChatGateway,
    pool_by_kind: dict[AnnotationKind, list[CorpusEntry]],
    combo: tuple[AnnotationKind, ...],
    test_kind: AnnotationKind,
    model_id: str,
    trial: int,
) -> TrialRecord | ExclusionRecord:
    digest = trial_digest(plan.seed, combo, test_kind, model_id, trial)
    rng = random.Random(int(digest[:12], 16))
    entry = rng.choice(pool_by_kind[test_kind])
    examples = select_examples(output_example_pool(), combo, seed=int(digest[12:20], 16))
    data_text = entry.text().rstrip("\n")
    prompt = build_output_prompt(examples, test_data=data_text, question_id=entry.question_id)
    try:
        completion = gateway.complete(prompt)
    except GatewayError as exc:
        return ExclusionRecord(
            example_kinds=combo,
            test_kind=test_kind,
            model_id=model_id,
            trial=trial,
            error=type(exc).__name__,
            detail=str(exc),
        )
    triple_set = parse_triple_set(data_text, graph=entry.graph, component=entry.component)
    scored = evaluate_output_explanation(completion.text, triple_set)
    return TrialRecord(
        question_id=entry.question_id,
        component=entry.component,
        example_kinds=combo,
        test_kind=test_kind,
        model_id=model_id,
        shots=plan.shots,
        scored=scored,
    )


def _write_csv(path: Path, columns: tuple[str, ...], rows: list[dict]) -> None:
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def _write_matrix_files(plan: ExperimentPlan, report: RunReport) -> None:
    by_cell = {(r.example_kinds, r.test_kind, r.model_id): r for r in report.results}
    exclusion_counts: dict[tuple, int] = {}
    for exc in report.exclusions:
        key = (exc.example_kinds, exc.test_kind, exc.model_id)
        exclusion_counts[key] = exclusion_counts.get(key, 0) + 1

    kind_columns = [k.value for k in plan.test_kinds]
    matrix_rows = []
    for combo in plan.example_kind_combos:
        for model_id in plan.model_ids:
            row = {"exampleKinds": combo_label(combo), "model": model_id}
            for kind in plan.test_kinds:
                cell = by_cell.get((combo, kind, model_id))
                row[kind.value] = format_qe(cell.mean_qe) if cell else ""
            marginal = report.marginals.get((combo, model_id))
            row["marginal"] = format_qe(marginal) if marginal is not None else ""
            matrix_rows.append(row)
    _write_csv(
        report.matrix_csv,
        ("exampleKinds", "model", *kind_columns, "marginal"),
        matrix_rows,
    )

    payload = {
        "plan": {
            "shots": plan.shots,
            "subjectKind": plan.subject_kind.value,
            "modelIds": list(plan.model_ids),
            "exampleKindCombos": [[k.value for k in combo] for combo in plan.example_kind_combos],
            "testKinds": kind_columns,
            "trialsPerCell": plan.trials_per_cell,
            "seed": plan.seed,
        },
        "cells": [
            {
                "exampleKinds": combo_label(r.example_kinds),
                "testKind": r.test_kind.value,
                "model": r.model_id,
                "meanQE": float(r.mean_qe),
                "pearsonR": r.pearson_r,
                "trialCount": r.trial_count,
                "exclusions": exclusion_counts.get((r.example_kinds, r.test_kind, r.model_id), 0),
            }
            for r in report.results
        ],
        "marginals": [
            {"exampleKinds": combo_label(combo), "model": model_id, "meanQE": float(value)}
            for (combo, model_id), value in report.marginals.items()
        ],
        "exclusionCount": len(report.exclusions),
    }
    report.matrix_json.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def run(
    plan: ExperimentPlan,
    gateway: ChatGateway,
    out_dir: str | Path,
    workers: int = 1,
) -> RunReport:
    """Execute the full matrix and write trials.csv, matrix.csv, matrix.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dataset = load_dataset(plan.dataset_path)
    corpus = load_corpus()
    _check_feasible(plan, corpus, dataset)

    pool_by_kind: dict[AnnotationKind, list[CorpusEntry]] = {}
    for entry in corpus:
        pool_by_kind.setdefault(entry.kind, []).append(entry)

    cells = [
        (combo, kind, model_id)
        for combo in plan.example_kind_combos
        for kind in plan.test_kinds
        for model_id in plan.model_ids
    ]
    tasks = [
        (position, trial, combo, kind, model_id)
        for position, (combo, kind, model_id) in enumerate(cells)
        for trial in range(plan.trials_per_cell)
    ]

    def execute(task):
        position, trial, combo, kind, model_id = task
        outcome = _run_trial(plan, gateway, pool_by_kind, combo, kind, model_id, trial)
        return (position, trial), outcome

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            outcomes = dict(executor.map(execute, tasks))
    else:
        outcomes = dict(execute(task) for task in tasks)

    trials: list[TrialRecord] = []
    exclusions: list[ExclusionRecord] = []
    for key in sorted(outcomes):
        outcome = outcomes[key]
        if isinstance(outcome, TrialRecord):
            trials.append(outcome)
        else:
            exclusions.append(outcome)

    grouped: dict[tuple, list] = {}
    for record in trials:
        grouped.setdefault((record.example_kinds, record.test_kind, record.model_id), []).append(
            record.scored.score
        )
    results = tuple(aggregate(grouped))
    marginals = marginal_means(results)

    report = RunReport(
        results=results,
        marginals=marginals,
        trials=tuple(trials),
        exclusions=tuple(exclusions),
        out_dir=out,
    )
    _write_csv(report.trials_csv, TRIAL_COLUMNS, [t.as_row() for t in trials])
    _write_csv(out / "exclusions.csv", EXCLUSION_COLUMNS, [e.as_row() for e in exclusions])
    _write_matrix_files(plan, report)
    return report
