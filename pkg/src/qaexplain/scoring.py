"""Quantitative rating of generated output-data explanations.

The score of one explanation combines a prefix rating (did the text name
the right component and annotation count?) with a per-annotation rating
(are the annotation's values present and correct?). Both start at 3 and
lose one point per error class, floored at 1, so the total always lands
in [2, 6]. All arithmetic is exact (fractions.Fraction); floats appear
only in report formatting and in the Pearson square root.

The original ratings behind this scheme were produced by human experts.
This module is an automated proxy: value recognition is heuristic
substring/token matching, with the cue lexicon shipped as a data file
(assets/cues/field_cues.json). The heuristics:

* numbers match after Decimal normalization, or when the text rounds the
  true value to at least 4 significant digits
* timestamps match by substring relation against the stored lexical form
  (at least 10 characters of overlap, so a date-only rendering counts)
* IRIs match in full, without their scheme, or by exact local name
* the component matches by full IRI or case-insensitive local name

A value the ground truth does not contain but the text states anyway
(a hallucination) is reported as Incorrect and depreciates the rating;
a cue phrase with no recognizable value next to it never counts as
Incorrect, only as Missing when the field was expected.

Statedness scans are scoped to the annotation's own numbered segment
("1. ...", "2. ...") when the text enumerates annotations; plain
presence checks run over the whole text.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation, ROUND_HALF_UP
from enum import Enum
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from typing import Iterable, Mapping, Sequence

from .annotations import group_annotations
from .model import (
    COMPONENTS_BY_KIND,
    Annotation,
    AnnotationKind,
    Depreciation,
    DepreciationReason,
    ExplainError,
    Iri,
    Literal,
    QualityScore,
    TripleSet,
)


class EmptyAnnotationListError(ExplainError):
    """q_e needs at least one annotation rating."""


class ConstantVectorError(ExplainError):
    """Pearson r is undefined when either vector has zero variance."""


class LengthMismatchError(ExplainError):
    """Pearson r needs two equally long vectors of length >= 2."""


class CheckField(Enum):
    COMPONENT = "component"
    COUNT = "count"
    ANNOTATED_AT = "annotatedAt"
    SCORE = "score"
    START = "start"
    END = "end"
    BODY = "body"


class FieldStatus(Enum):
    FOUND = "Found"
    MISSING = "Missing"
    INCORRECT = "Incorrect"
    NOT_APPLICABLE = "NotApplicable"


@dataclass(frozen=True)
class ValueCheck:
    field: CheckField
    expected: str
    status: FieldStatus
    stated: str | None = None

    def as_dict(self) -> dict:
        return {
            "field": self.field.value,
            "expected": self.expected,
            "status": self.status.value,
            "stated": self.stated,
        }


@lru_cache(maxsize=None)
def _cue_lexicon() -> dict[str, dict[str, tuple[re.Pattern, ...]]]:
    raw = json.loads(
        (resources.files("qaexplain") / "assets" / "cues" / "field_cues.json").read_text(
            encoding="utf-8"
        )
    )
    compiled: dict[str, dict[str, tuple[re.Pattern, ...]]] = {}
    for field_name, groups in raw.items():
        compiled[field_name] = {
            part: tuple(re.compile(p, re.IGNORECASE | re.MULTILINE) for p in patterns)
            for part, patterns in groups.items()
        }
    return compiled


# standalone number token; the lookbehind keeps digits inside dates,
# times, IRIs and decimals from matching, the lookahead still allows a
# sentence-final period
def _token_pattern(token: str) -> re.Pattern:
    return re.compile(rf"(?<![\w.:-]){re.escape(token)}(?![\w:-])(?!\.\d)")


SEGMENT_MARKER = re.compile(r"(?<![\w.:-])(\d+)\.(?=\s)")


def enumerated_segments(text: str) -> dict[int, str]:
    """Map enumeration ordinal -> segment text ('1. foo 2. bar')."""
    markers = list(SEGMENT_MARKER.finditer(text))
    out: dict[int, str] = {}
    for i, marker in enumerate(markers):
        stop = markers[i + 1].start() if i + 1 < len(markers) else len(text)
        out[int(marker.group(1))] = text[marker.end() : stop]
    return out


def _scope_for(text: str, index: int | None) -> str:
    if index is None:
        return text
    return enumerated_segments(text).get(index, text)


def _stated_values(field_name: str, scope: str) -> list[str]:
    values = []
    for pattern in _cue_lexicon()[field_name]["stated"]:
        for match in pattern.finditer(scope):
            value = match.group("value")
            if value:
                values.append(value.strip().rstrip(".,;:!?"))
    return values


def _cue_present(field_name: str, scope: str) -> bool:
    return any(p.search(scope) for p in _cue_lexicon()[field_name]["cues"])


def _round_sig(value: Decimal, digits: int) -> Decimal:
    if value == 0:
        return Decimal(0)
    quantum = Decimal(1).scaleb(value.adjusted() - digits + 1)
    return value.quantize(quantum, rounding=ROUND_HALF_UP)


def _number_matches(stated: str, expected: Decimal) -> bool:
    try:
        value = Decimal(stated)
    except InvalidOperation:
        return False
    if value == expected:
        return True
    # accept the text rounding the true value to >= 4 significant digits
    for digits in range(4, 20):
        if value == _round_sig(expected, digits):
            return True
    return False


def _timestamp_matches(stated: str, expected: str) -> bool:
    if len(stated) < 10:
        return False
    return stated in expected or expected in stated


def _iri_variants(iri: Iri) -> list[str]:
    value = iri.value
    variants = [value]
    schemeless = re.sub(r"^[a-z][a-z0-9+.-]*:(//)?", "", value, flags=re.IGNORECASE)
    if schemeless and schemeless != value:
        variants.append(schemeless)
    local = iri.local_name
    if local:
        variants.append(local)
    return variants


def _iri_matches(stated: str, expected: Iri) -> bool:
    stated = stated.strip().rstrip(".,;:!?").strip("`\"'<>")
    return stated in _iri_variants(expected)


_WS = re.compile(r"\s+")


def _squash(text: str) -> str:
    return _WS.sub(" ", text).strip()


def _literal_matches(stated: str, expected: Literal) -> bool:
    return _squash(expected.lexical) in _squash(stated)


def _present_anywhere(field: CheckField, text: str, annotation: Annotation) -> bool:
    if field is CheckField.ANNOTATED_AT:
        assert annotation.annotated_at is not None
        for pattern in _cue_lexicon()["annotatedAt"]["stated"]:
            for match in pattern.finditer(text):
                if _timestamp_matches(match.group("value"), annotation.annotated_at):
                    return True
        return False
    if field is CheckField.SCORE:
        assert annotation.score is not None
        number = re.compile(r"(?<![\w.:-])\d+(?:\.\d+)?(?![\w:-])(?!\.\d)")
        return any(_number_matches(m.group(0), annotation.score) for m in number.finditer(text))
    if field in (CheckField.START, CheckField.END):
        assert annotation.selector is not None
        value = annotation.selector.start if field is CheckField.START else annotation.selector.end
        return bool(_token_pattern(str(value)).search(text))
    if field is CheckField.BODY:
        body = annotation.body
        if isinstance(body, Iri):
            return any(variant in text for variant in _iri_variants(body))
        assert isinstance(body, Literal)
        return _squash(body.lexical) in _squash(text)
    raise AssertionError(field)


def _stated_matches(field: CheckField, stated: str, annotation: Annotation) -> bool:
    if field is CheckField.ANNOTATED_AT:
        return _timestamp_matches(stated, annotation.annotated_at or "")
    if field is CheckField.SCORE:
        return annotation.score is not None and _number_matches(stated, annotation.score)
    if field is CheckField.START:
        return annotation.selector is not None and stated == str(annotation.selector.start)
    if field is CheckField.END:
        return annotation.selector is not None and stated == str(annotation.selector.end)
    if field is CheckField.BODY:
        if isinstance(annotation.body, Iri):
            return _iri_matches(stated, annotation.body)
        if isinstance(annotation.body, Literal):
            return _literal_matches(stated, annotation.body)
        return False
    raise AssertionError(field)


_FIELD_NAMES = {
    CheckField.ANNOTATED_AT: "annotatedAt",
    CheckField.SCORE: "score",
    CheckField.START: "start",
    CheckField.END: "end",
    CheckField.BODY: "body",
}


def _expected_text(field: CheckField, annotation: Annotation) -> str | None:
    if field is CheckField.ANNOTATED_AT:
        return annotation.annotated_at
    if field is CheckField.SCORE:
        return str(annotation.score) if annotation.score is not None else None
    if field is CheckField.START:
        return str(annotation.selector.start) if annotation.selector else None
    if field is CheckField.END:
        return str(annotation.selector.end) if annotation.selector else None
    if field is CheckField.BODY:
        if annotation.body is None:
            return None
        return annotation.body.value if isinstance(annotation.body, Iri) else annotation.body.lexical
    raise AssertionError(field)


def _check_annotation_field(
    field: CheckField, text: str, scope: str, annotation: Annotation
) -> ValueCheck:
    name = _FIELD_NAMES[field]
    expected = _expected_text(field, annotation)
    stated = _stated_values(name, scope)

    if expected is None:
        # nothing to report unless the text invents a value
        if stated:
            return ValueCheck(field, "", FieldStatus.INCORRECT, stated=stated[0])
        return ValueCheck(field, "", FieldStatus.NOT_APPLICABLE)

    matching = [s for s in stated if _stated_matches(field, s, annotation)]
    if matching:
        return ValueCheck(field, expected, FieldStatus.FOUND, stated=matching[0])
    if stated:
        return ValueCheck(field, expected, FieldStatus.INCORRECT, stated=stated[0])
    if _present_anywhere(field, text, annotation):
        return ValueCheck(field, expected, FieldStatus.FOUND)
    return ValueCheck(field, expected, FieldStatus.MISSING)


def score_annotation(
    text: str, annotation: Annotation, index: int | None = None
) -> tuple[int, list[ValueCheck]]:
    """Rate one annotation against the explanation text.

    `index` is the annotation's 1-based position in the explanation's
    enumeration; when given and the text carries "1." style markers,
    statedness checks are confined to that segment.
    """
    scope = _scope_for(text, index)
    checks = [
        _check_annotation_field(field, text, scope, annotation)
        for field in (
            CheckField.ANNOTATED_AT,
            CheckField.SCORE,
            CheckField.START,
            CheckField.END,
            CheckField.BODY,
        )
    ]
    missing = any(c.status is FieldStatus.MISSING for c in checks)
    incorrect = any(c.status is FieldStatus.INCORRECT for c in checks)
    rating = max(1, 3 - int(missing) - int(incorrect))
    return rating, checks


@lru_cache(maxsize=1)
def _all_component_iris() -> tuple[Iri, ...]:
    return tuple(Iri(c) for kind in COMPONENTS_BY_KIND for c in COMPONENTS_BY_KIND[kind])


def _component_named(text: str, component: Iri) -> bool:
    if component.value in text:
        return True
    local = component.local_name
    if not local:
        return False
    return bool(re.search(rf"(?<![\w-]){re.escape(local)}(?![\w-])", text, re.IGNORECASE))


_COUNT_STATED = re.compile(r"(?<![\w.:-])(\d+)\s+annotation", re.IGNORECASE)


def score_prefix(
    text: str, expected_component: Iri, expected_count: int
) -> tuple[int, list[ValueCheck]]:
    """Rate the explanation prefix: component naming and annotation count."""
    if expected_count < 1:
        raise ValueError("expected_count must be >= 1")

    if _component_named(text, expected_component):
        component_check = ValueCheck(
            CheckField.COMPONENT, expected_component.value, FieldStatus.FOUND
        )
    else:
        others = [
            c for c in _all_component_iris() if c != expected_component and _component_named(text, c)
        ]
        status = FieldStatus.INCORRECT if others else FieldStatus.MISSING
        component_check = ValueCheck(
            CheckField.COMPONENT,
            expected_component.value,
            status,
            stated=others[0].value if others else None,
        )

    stated_counts = [m.group(1) for m in _COUNT_STATED.finditer(text)]
    if str(expected_count) in stated_counts:
        count_check = ValueCheck(CheckField.COUNT, str(expected_count), FieldStatus.FOUND)
    elif stated_counts:
        count_check = ValueCheck(
            CheckField.COUNT, str(expected_count), FieldStatus.INCORRECT, stated=stated_counts[0]
        )
    elif _token_pattern(str(expected_count)).search(text):
        count_check = ValueCheck(CheckField.COUNT, str(expected_count), FieldStatus.FOUND)
    else:
        count_check = ValueCheck(CheckField.COUNT, str(expected_count), FieldStatus.MISSING)

    rating = max(
        1,
        3
        - int(component_check.status is not FieldStatus.FOUND)
        - int(count_check.status is not FieldStatus.FOUND),
    )
    return rating, [component_check, count_check]


def q_e(prefix_rating: int, annotation_ratings: Sequence[int]) -> Fraction:
    """Overall explanation quality: prefix rating plus mean annotation rating."""
    if not annotation_ratings:
        raise EmptyAnnotationListError("at least one annotation rating required")
    if not 1 <= prefix_rating <= 3:
        raise ValueError(f"prefix rating {prefix_rating} out of range")
    for rating in annotation_ratings:
        if not 1 <= rating <= 3:
            raise ValueError(f"annotation rating {rating} out of range")
    return Fraction(prefix_rating) + Fraction(sum(annotation_ratings), len(annotation_ratings))


@dataclass(frozen=True)
class ScoredExplanation:
    score: QualityScore
    prefix_checks: tuple[ValueCheck, ...]
    annotation_checks: tuple[tuple[ValueCheck, ...], ...]

    def checks_as_json(self) -> str:
        payload = {
            "prefix": [c.as_dict() for c in self.prefix_checks],
            "annotations": [[c.as_dict() for c in checks] for checks in self.annotation_checks],
        }
        return json.dumps(payload, separators=(",", ":"))


def evaluate_output_explanation(text: str, triple_set: TripleSet) -> ScoredExplanation:
    """Score an explanation text against the annotations in its source data."""
    annotations = group_annotations(triple_set)
    prefix_rating, prefix_checks = score_prefix(text, triple_set.component, len(annotations))

    annotation_ratings: list[int] = []
    per_annotation: list[tuple[ValueCheck, ...]] = []
    depreciations: list[Depreciation] = []

    for check in prefix_checks:
        if check.status is FieldStatus.FOUND:
            continue
        reason = (
            DepreciationReason.WRONG_COMPONENT
            if check.field is CheckField.COMPONENT
            else DepreciationReason.WRONG_COUNT
        )
        depreciations.append(Depreciation("prefix", reason))

    for i, annotation in enumerate(annotations):
        rating, checks = score_annotation(text, annotation, index=i + 1)
        annotation_ratings.append(rating)
        per_annotation.append(tuple(checks))
        if any(c.status is FieldStatus.MISSING for c in checks):
            depreciations.append(Depreciation(i, DepreciationReason.MISSING_VALUES))
        if any(c.status is FieldStatus.INCORRECT for c in checks):
            depreciations.append(Depreciation(i, DepreciationReason.INCORRECT_VALUES))

    score = QualityScore(
        prefix_rating=prefix_rating,
        annotation_ratings=tuple(annotation_ratings),
        q_e=q_e(prefix_rating, annotation_ratings),
        depreciations=tuple(depreciations),
    )
    return ScoredExplanation(
        score=score,
        prefix_checks=tuple(prefix_checks),
        annotation_checks=tuple(per_annotation),
    )


def pearson(x: Sequence[Fraction | int], y: Sequence[Fraction | int]) -> float:
    """Sample Pearson correlation coefficient.

    Covariance and variances are computed exactly; only the final square
    root goes through floats, with the sign reattached from the exact
    covariance so perfect (anti)correlation returns exactly +/-1.0.
    """
    if len(x) != len(y) or len(x) < 2:
        raise LengthMismatchError(f"need two equal-length vectors of >= 2 points, got {len(x)}/{len(y)}")
    xs = [Fraction(v) for v in x]
    ys = [Fraction(v) for v in y]
    n = len(xs)
    mean_x = sum(xs) / n
    mean_y = sum(ys) / n
    dx = [v - mean_x for v in xs]
    dy = [v - mean_y for v in ys]
    var_x = sum(d * d for d in dx)
    var_y = sum(d * d for d in dy)
    if var_x == 0 or var_y == 0:
        raise ConstantVectorError("pearson undefined for a constant vector")
    cov = sum(a * b for a, b in zip(dx, dy))
    if cov == 0:
        return 0.0
    ratio = (cov * cov) / (var_x * var_y)
    return math.copysign(math.sqrt(float(ratio)), float(cov))


@dataclass(frozen=True)
class ExperimentResult:
    """Aggregate for one (example kinds, test kind, model) matrix cell."""

    example_kinds: tuple[AnnotationKind, ...]
    test_kind: AnnotationKind
    model_id: str
    trial_scores: tuple[QualityScore, ...]
    mean_qe: Fraction
    pearson_r: float | None
    trial_count: int

    def __post_init__(self) -> None:
        if not self.trial_scores:
            raise ValueError("a result cell needs at least one trial")
        expected = sum(s.q_e for s in self.trial_scores) / len(self.trial_scores)
        if self.mean_qe != expected:
            raise ValueError(f"mean_qe {self.mean_qe} != {expected}")


GroupKey = tuple[tuple[AnnotationKind, ...], AnnotationKind, str]


def aggregate(groups: Mapping[GroupKey, Sequence[QualityScore]]) -> list[ExperimentResult]:
    """Fold per-trial scores into matrix cells.

    Pearson r correlates each cell's Q_E values with its annotation
    counts; it is omitted (None) when either vector is constant.
    """
    results = []
    for (example_kinds, test_kind, model_id), scores in groups.items():
        if not scores:
            raise ValueError(f"empty group {(example_kinds, test_kind, model_id)}")
        mean = sum(s.q_e for s in scores) / len(scores)
        try:
            r = pearson(
                [s.q_e for s in scores],
                [len(s.annotation_ratings) for s in scores],
            )
        except (ConstantVectorError, LengthMismatchError):
            r = None
        results.append(
            ExperimentResult(
                example_kinds=tuple(example_kinds),
                test_kind=test_kind,
                model_id=model_id,
                trial_scores=tuple(scores),
                mean_qe=mean,
                pearson_r=r,
                trial_count=len(scores),
            )
        )
    return results


def marginal_means(results: Iterable[ExperimentResult]) -> dict[tuple[tuple[AnnotationKind, ...], str], Fraction]:
    """Row means over all trials of one (example kinds, model) row."""
    rows: dict[tuple[tuple[AnnotationKind, ...], str], list[QualityScore]] = {}
    for cell in results:
        rows.setdefault((cell.example_kinds, cell.model_id), []).extend(cell.trial_scores)
    return {
        key: sum(s.q_e for s in scores) / len(scores) for key, scores in rows.items()
    }


def format_qe(value: Fraction) -> str:
    """Report formatting: two decimals, matching the result tables."""
    return f"{float(value):.2f}"
