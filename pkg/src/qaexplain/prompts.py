"""Few-shot prompt assembly for LLM-generated explanations.

Two prompt families exist: one explains output data (grounded RDF
annotations), the other explains input data (a SPARQL SELECT query).
Each prompt is built from three text assets (context, example block,
task block) joined by a single blank line. The example block repeats
once per shot; zero-shot prompts omit it entirely.

The asset files keep the original placeholder markers verbatim: the
output family uses angle brackets (``<EXAMPLE_RDF_DATA>``), the input
family uses ``${...}`` markers. Both are plain string substitutions,
nothing is escaped.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from itertools import combinations_with_replacement

from .model import AnnotationKind, ExplainError, InputQueryKey, SubjectKind

OUTPUT_PROMPT_CLOSING = "Don't introduce your answer and only return the result."
INPUT_PROMPT_CLOSING = "Don't use more than 3 sentences."

# First line of the example block; doubles as the oracle for counting shots.
OUTPUT_EXAMPLE_HEADER = "For example, the following explanation was created for the question"
INPUT_EXAMPLE_HEADER = "Here's an example explanation:"
OUTPUT_TASK_HEADER = "Now, create an explanation for the following RDF data:"


class EmptyTestDataError(ExplainError):
    """Output prompt requested for blank test data."""


class EmptyTestQueryError(ExplainError):
    """Input prompt requested for a blank test query."""


class NoExampleForKindError(ExplainError):
    def __init__(self, kind: object) -> None:
        super().__init__(f"example pool has no entry for kind {kind!r}")
        self.kind = kind


ExampleKind = AnnotationKind | InputQueryKey


@dataclass(frozen=True)
class ExamplePair:
    """A worked (raw data, explanation) pair embedded into a prompt."""

    kind: ExampleKind
    raw_data: str
    explanation_text: str
    question_id: str | None = None

    def __post_init__(self) -> None:
        if not self.raw_data.strip():
            raise ValueError("example raw_data must be non-empty")
        if not self.explanation_text.strip():
            raise ValueError("example explanation_text must be non-empty")


@dataclass(frozen=True)
class PromptSpec:
    text: str
    shots: int
    subject_kind: SubjectKind
    example_kinds: tuple[ExampleKind, ...] = field(default=())
    test_ref: str = ""

    def __post_init__(self) -> None:
        if not self.text:
            raise ValueError("prompt text must be non-empty")
        if self.shots not in (0, 1, 2):
            raise ValueError(f"shots must be 0, 1 or 2, got {self.shots}")
        if self.shots != len(self.example_kinds):
            raise ValueError(
                f"shots={self.shots} but {len(self.example_kinds)} example kinds given"
            )


@lru_cache(maxsize=None)
def _prompt_asset(name: str) -> str:
    root = resources.files("qaexplain") / "assets" / "prompts"
    # keep leading content intact, drop only the file's trailing newlines
    return (root / f"{name}.txt").read_text(encoding="utf-8").rstrip("\n")


def build_output_prompt(
    examples: list[ExamplePair] | tuple[ExamplePair, ...],
    test_data: str,
    question_id: str,
) -> PromptSpec:
    """Assemble the output-data prompt for 0, 1 or 2 examples."""
    if len(examples) > 2:
        raise ValueError(f"at most 2 examples supported, got {len(examples)}")
    if not test_data.strip():
        raise EmptyTestDataError("test data must be non-empty")

    sections = [_prompt_asset("output_context")]
    for example in examples:
        block = _prompt_asset("output_example")
        block = block.replace("<QUESTION_ID_EXAMPLE>", example.question_id or question_id)
        block = block.replace("<EXAMPLE_EXPLANATION>", example.explanation_text)
        block = block.replace("<EXAMPLE_RDF_DATA>", example.raw_data)
        sections.append(block)
    sections.append(_prompt_asset("output_task").replace("<TASK_RDF_DATA_TEST>", test_data))

    return PromptSpec(
        text="\n\n".join(sections),
        shots=len(examples),
        subject_kind=SubjectKind.OUTPUT_DATA,
        example_kinds=tuple(example.kind for example in examples),
        test_ref=question_id,
    )


def build_input_prompt(
    example: ExamplePair | None,
    test_query: str,
    component_name: str,
) -> PromptSpec:
    """Assemble the input-data prompt, with at most one example."""
    if not test_query.strip():
        raise EmptyTestQueryError("test query must be non-empty")

    sections = [_prompt_asset("input_context")]
    if example is not None:
        block = _prompt_asset("input_example")
        block = block.replace("${EXAMPLE_QUERY}", example.raw_data)
        block = block.replace("${EXAMPLE_EXPLANATION}", example.explanation_text)
        sections.append(block)
    task = _prompt_asset("input_task")
    task = task.replace("${COMPONENT}", component_name)
    task = task.replace("${TEST_QUERY}", test_query)
    sections.append(task)

    return PromptSpec(
        text="\n\n".join(sections),
        shots=0 if example is None else 1,
        subject_kind=SubjectKind.INPUT_DATA,
        example_kinds=() if example is None else (example.kind,),
        test_ref=f"component:{component_name}",
    )


def _kind_token(kind: ExampleKind) -> str:
    return f"{type(kind).__name__}:{kind.value}"


def select_examples(
    pool: list[ExamplePair] | tuple[ExamplePair, ...],
    wanted: list[ExampleKind] | tuple[ExampleKind, ...],
    seed: int = 0,
) -> list[ExamplePair]:
    """Pick one pool entry per wanted kind, deterministically.

    Order follows `wanted`; repeated kinds are allowed and may select
    different entries because the position salts the hash.
    """
    chosen: list[ExamplePair] = []
    for position, kind in enumerate(wanted):
        candidates = [entry for entry in pool if entry.kind == kind]
        if not candidates:
            raise NoExampleForKindError(kind)
        digest = hashlib.sha256(f"{seed}|{_kind_token(kind)}|{position}".encode()).hexdigest()
        chosen.append(candidates[int(digest[:8], 16) % len(candidates)])
    return chosen


def two_shot_combinations() -> list[tuple[AnnotationKind, AnnotationKind]]:
    """All unordered pairs over the four annotation kinds, repeats included."""
    return list(combinations_with_replacement(list(AnnotationKind), 2))


def _example_dirs(group: str):
    root = resources.files("qaexplain") / "assets" / "examples" / group
    return sorted((entry for entry in root.iterdir() if entry.is_dir()), key=lambda e: e.name)


@lru_cache(maxsize=None)
def output_example_pool() -> tuple[ExamplePair, ...]:
    """Canonical per-kind output examples shipped with the package."""
    import json

    pairs = []
    for entry in _example_dirs("output"):
        meta = json.loads((entry / "meta.json").read_text(encoding="utf-8"))
        pairs.append(
            ExamplePair(
                kind=AnnotationKind(meta["kind"]),
                raw_data=(entry / "data.nt").read_text(encoding="utf-8").rstrip("\n"),
                explanation_text=(entry / "explanation.txt").read_text(encoding="utf-8").rstrip("\n"),
                question_id=meta.get("questionId"),
            )
        )
    return tuple(pairs)


@lru_cache(maxsize=None)
def input_example_pool() -> tuple[ExamplePair, ...]:
    """One example per registered input query key."""
    pairs = []
    for entry in _example_dirs("input"):
        key = InputQueryKey(entry.name)
        pairs.append(
            ExamplePair(
                kind=key,
                raw_data=(entry / "query.rq").read_text(encoding="utf-8").rstrip("\n"),
                explanation_text=(entry / "explanation.txt").read_text(encoding="utf-8").rstrip("\n"),
            )
        )
    return tuple(pairs)
