"""Template-based verbalization of input queries and output annotations.

Templates live as data files (assets/templates/*.tmpl): a small header
(id, kind, optional annotation-kind / query-key, locale), a '---' line,
then the body. Bodies use ${name} placeholders and &{...} conditional
segments; a conditional is emitted only when every placeholder inside it
has a present binding. Placeholders are restricted to the documented
binding vocabulary.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Mapping, Sequence

import importlib.resources

from qaexplain.annotations import Diagnostic, MissingTypeError, group_annotations
from qaexplain.model import (
    Annotation,
    AnnotationKind,
    ExplainError,
    Explanation,
    InputQueryKey,
    Method,
    Provenance,
    SubjectKind,
    TripleSet,
    term_text,
)
from qaexplain.ntriples import serialize_ntriples

BINDING_VOCABULARY = frozenset(
    {
        "component",
        "numberOfAnnotations",
        "graph",
        "annotationType",
        "annotatedAt",
        "annotatedBy",
        "score",
        "hasBody",
        "start",
        "end",
        "targetQuestion",
    }
)


class TemplateSyntaxError(ExplainError):
    pass


class MissingBindingError(ExplainError):
    def __init__(self, name: str):
        super().__init__(f"no binding for non-conditional placeholder ${{{name}}}")
        self.name = name


class UnknownKeyError(ExplainError):
    pass


class UnknownAnnotationKindError(ExplainError):
    pass


class NoAnnotationsError(ExplainError):
    pass


class TemplateKind(Enum):
    INPUT_FIXED = "input_fixed"
    OUTPUT_PREFIX = "output_prefix"
    OUTPUT_ITEM = "output_item"


_PLACEHOLDER = re.compile(r"\$\{([A-Za-z][A-Za-z0-9_]*)\}")


def _split_segments(body: str) -> tuple[tuple[str, str], ...]:
    """Split a body into ('text'|'cond', content) segments; validates bracketing."""
    segments: list[tuple[str, str]] = []
    i = 0
    n = len(body)
    while i < n:
        amp = body.find("&{", i)
        if amp < 0:
            segments.append(("text", body[i:]))
            break
        if amp > i:
            segments.append(("text", body[i:amp]))
        j = amp + 2
        while j < n:
            if body.startswith("${", j):
                close = body.find("}", j)
                if close < 0:
                    raise TemplateSyntaxError("unterminated placeholder inside conditional")
                j = close + 1
                continue
            if body.startswith("&{", j):
                raise TemplateSyntaxError("conditional segments must not nest")
            if body[j] == "}":
                break
            j += 1
        else:
            raise TemplateSyntaxError("unterminated conditional segment")
        segments.append(("cond", body[amp + 2 : j]))
        i = j + 1
    return tuple(segments)


@dataclass(frozen=True)
class Template:
    id: str
    kind: TemplateKind
    body: str
    annotation_kind: AnnotationKind | None = None
    query_key: InputQueryKey | None = None
    locale: str = "en"

    def __post_init__(self) -> None:
        segments = _split_segments(self.body)
        for _, content in segments:
            for name in _PLACEHOLDER.findall(content):
                if name not in BINDING_VOCABULARY:
                    raise TemplateSyntaxError(
                        f"template {self.id}: unknown placeholder ${{{name}}}"
                    )
        object.__setattr__(self, "_segments", segments)

    @property
    def segments(self) -> tuple[tuple[str, str], ...]:
        return self._segments  # type: ignore[attr-defined]

    @property
    def placeholders(self) -> frozenset[str]:
        return frozenset(_PLACEHOLDER.findall(self.body))


def _render_plain(content: str, bindings: Mapping[str, str | None], conditional: bool) -> str:
    def substitute(match: re.Match) -> str:
        name = match.group(1)
        value = bindings.get(name)
        if value is None:
            if conditional:
                raise AssertionError("conditional rendered with absent binding")
            raise MissingBindingError(name)
        return value

    return _PLACEHOLDER.sub(substitute, content)


def render_template(template: Template, bindings: Mapping[str, str | None]) -> str:
    """Render with conditional-segment semantics; absent bindings are legal only inside &{...}."""
    parts: list[str] = []
    for seg_kind, content in template.segments:
        if seg_kind == "text":
            parts.append(_render_plain(content, bindings, conditional=False))
        else:
            names = _PLACEHOLDER.findall(content)
            if all(bindings.get(n) is not None for n in names):
                parts.append(_render_plain(content, bindings, conditional=True))
    return "".join(parts)


def parse_template_text(text: str) -> Template:
    header: dict[str, str] = {}
    lines = text.split("\n")
    body_start = None
    for i, line in enumerate(lines):
        if line.strip() == "---":
            body_start = i + 1
            break
        if not line.strip():
            continue
        if ":" not in line:
            raise TemplateSyntaxError(f"malformed header line: {line!r}")
        key, _, value = line.partition(":")
        header[key.strip()] = value.strip()
    if body_start is None:
        raise TemplateSyntaxError("missing '---' separator")
    body = "\n".join(lines[body_start:]).rstrip("\n")
    if "id" not in header or "kind" not in header:
        raise TemplateSyntaxError("template header needs 'id' and 'kind'")
    try:
        kind = TemplateKind(header["kind"])
    except ValueError as e:
        raise TemplateSyntaxError(f"unknown template kind {header['kind']!r}") from e
    annotation_kind = None
    if "annotation-kind" in header:
        annotation_kind = AnnotationKind(header["annotation-kind"])
    query_key = None
    if "query-key" in header:
        query_key = InputQueryKey(header["query-key"])
    return Template(
        id=header["id"],
        kind=kind,
        body=body,
        annotation_kind=annotation_kind,
        query_key=query_key,
        locale=header.get("locale", "en"),
    )


class TemplateRegistry:
    """Immutable lookup of the loaded templates."""

    def __init__(self, templates: Sequence[Template]):
        self._by_id = {t.id: t for t in templates}
        self._prefix = next(
            (t for t in templates if t.kind is TemplateKind.OUTPUT_PREFIX), None
        )
        self._items = {
            t.annotation_kind: t
            for t in templates
            if t.kind is TemplateKind.OUTPUT_ITEM and t.annotation_kind is not None
        }
        self._inputs = {
            t.query_key: t
            for t in templates
            if t.kind is TemplateKind.INPUT_FIXED and t.query_key is not None
        }

    @classmethod
    def from_dir(cls, path: Path | str) -> "TemplateRegistry":
        path = Path(path)
        templates = []
        for file in sorted(path.glob("*.tmpl")):
            templates.append(parse_template_text(file.read_text(encoding="utf-8")))
        if not templates:
            raise TemplateSyntaxError(f"no templates found in {path}")
        return cls(templates)

    def get(self, template_id: str) -> Template:
        if template_id not in self._by_id:
            raise UnknownKeyError(f"no template with id {template_id!r}")
        return self._by_id[template_id]

    def output_prefix(self) -> Template:
        if self._prefix is None:
            raise UnknownKeyError("no output prefix template loaded")
        return self._prefix

    def output_item(self, kind: AnnotationKind) -> Template:
        if kind not in self._items:
            raise UnknownAnnotationKindError(f"no item template for kind {kind.value}")
        return self._items[kind]

    def input_for_key(self, key: InputQueryKey) -> Template:
        if key not in self._inputs:
            raise UnknownKeyError(f"no input template registered for key {key.value}")
        return self._inputs[key]

    def all(self) -> list[Template]:
        return list(self._by_id.values())


@lru_cache(maxsize=1)
def default_registry() -> TemplateRegistry:
    root = importlib.resources.files("qaexplain") / "assets" / "templates"
    templates = []
    for file in sorted(root.iterdir(), key=lambda f: f.name):
        if file.name.endswith(".tmpl"):
            templates.append(parse_template_text(file.read_text(encoding="utf-8")))
    return TemplateRegistry(templates)


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


def content_ref(prefix: str, text: str) -> str:
    return f"{prefix}:sha256:{hashlib.sha256(text.encode('utf-8')).hexdigest()[:16]}"


def explain_input(
    record,
    registry: TemplateRegistry | None = None,
    created_at: str | None = None,
) -> Explanation:
    """Fixed-template explanation of a registered input query.

    Accepts an InputQueryRecord or a bare InputQueryKey. The explanation
    text is deterministic for a given key.
    """
    registry = registry or default_registry()
    if isinstance(record, InputQueryKey):
        key = record
        source_ref = f"query-key:{key.value}"
    else:
        key = record.key
        source_ref = content_ref("query", record.normalized_text)
    template = registry.input_for_key(key)
    text = render_template(template, {})
    return Explanation(
        subject_kind=SubjectKind.INPUT_DATA,
        method=Method.TEMPLATE,
        text=text,
        provenance=Provenance(created_at=created_at or _now_iso()),
        source_ref=source_ref,
    )


def output_bindings(annotation: Annotation) -> dict[str, str | None]:
    """Item-template bindings for one annotation; lexical forms preserved."""
    return {
        "annotatedAt": annotation.annotated_at,
        "annotatedBy": str(annotation.annotated_by),
        "score": str(annotation.score) if annotation.score is not None else None,
        "hasBody": term_text(annotation.body),
        "start": str(annotation.selector.start) if annotation.selector else None,
        "end": str(annotation.selector.end) if annotation.selector else None,
        "targetQuestion": str(annotation.target_question)
        if annotation.target_question
        else None,
    }


def explain_output(
    triple_set: TripleSet,
    registry: TemplateRegistry | None = None,
    diagnostics: list[Diagnostic] | None = None,
    created_at: str | None = None,
) -> Explanation:
    """Template explanation of a component's output: prefix plus numbered items.

    The explanation text is deterministic for a given TripleSet.
    """
    registry = registry or default_registry()
    try:
        annotations = group_annotations(triple_set, diagnostics)
    except MissingTypeError as e:
        raise NoAnnotationsError(str(e)) from e
    if not annotations:
        raise NoAnnotationsError("triple set groups into zero annotations")

    prefix_bindings: dict[str, str | None] = {
        "component": str(triple_set.component),
        "numberOfAnnotations": str(len(annotations)),
        "graph": str(triple_set.graph),
        "annotationType": annotations[0].kind.type_label,
    }
    parts = [render_template(registry.output_prefix(), prefix_bindings)]
    for i, annotation in enumerate(annotations, start=1):
        item = registry.output_item(annotation.kind)
        parts.append(f"{i}. " + render_template(item, output_bindings(annotation)))
    text = " ".join(parts)
    return Explanation(
        subject_kind=SubjectKind.OUTPUT_DATA,
        method=Method.TEMPLATE,
        text=text,
        provenance=Provenance(created_at=created_at or _now_iso()),
        source_ref=content_ref("triples", serialize_ntriples(triple_set.triples)),
    )
