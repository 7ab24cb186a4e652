import random
import statistics
from fractions import Fraction
from itertools import product

import pytest
from hypothesis import given, strategies as st

from qaexplain.model import AnnotationKind, Depreciation, DepreciationReason, Iri
from qaexplain.scoring import (
    CheckField,
    ConstantVectorError,
    EmptyAnnotationListError,
    ExperimentResult,
    FieldStatus,
    LengthMismatchError,
    ValueCheck,
    aggregate,
    evaluate_output_explanation,
    format_qe,
    marginal_means,
    pearson,
    q_e,
    score_annotation,
    score_prefix,
)
from qaexplain.templates import explain_output

from conftest import make_random_annotation, make_triple_set
from goldens import SPOT_GENERATIVE_EXPLANATION


def checks_by_field(checks):
    return {c.field: c for c in checks}


# recorded generative explanation vs the recorded spot annotation


def test_recorded_generative_prefix_rating(spot_triple_set):
    rating, checks = score_prefix(SPOT_GENERATIVE_EXPLANATION, spot_triple_set.component, 1)
    assert rating == 3
    by = checks_by_field(checks)
    assert by[CheckField.COMPONENT].status is FieldStatus.FOUND
    assert by[CheckField.COUNT].status is FieldStatus.FOUND


def test_recorded_generative_annotation_rating(spot_triple_set):
    from qaexplain.annotations import group_annotations

    annotation = group_annotations(spot_triple_set)[0]
    rating, checks = score_annotation(SPOT_GENERATIVE_EXPLANATION, annotation, index=1)
    assert rating == 1
    by = checks_by_field(checks)
    assert by[CheckField.ANNOTATED_AT].status is FieldStatus.FOUND
    # the stated confidence is really the annotation id: a hallucinated score
    assert by[CheckField.SCORE].status is FieldStatus.INCORRECT
    assert by[CheckField.START].status is FieldStatus.MISSING
    assert by[CheckField.END].status is FieldStatus.MISSING
    assert by[CheckField.BODY].status is FieldStatus.INCORRECT


def test_recorded_generative_overall_score(spot_triple_set):
    scored = evaluate_output_explanation(SPOT_GENERATIVE_EXPLANATION, spot_triple_set)
    assert scored.score.prefix_rating == 3
    assert scored.score.annotation_ratings == (1,)
    assert scored.score.q_e == Fraction(4)
    assert set(scored.score.depreciations) == {
        Depreciation(0, DepreciationReason.MISSING_VALUES),
        Depreciation(0, DepreciationReason.INCORRECT_VALUES),
    }


# template self-consistency: the template echoes every value verbatim,
# so scoring its own output must give full marks


def test_template_explanation_scores_maximum(spot_triple_set):
    text = explain_output(spot_triple_set).text
    scored = evaluate_output_explanation(text, spot_triple_set)
    assert scored.score.prefix_rating == 3
    assert scored.score.annotation_ratings == (3,)
    assert scored.score.q_e == Fraction(6)
    assert scored.score.depreciations == ()


def test_template_self_consistency_across_generated_sets():
    rng = random.Random(424242)
    for _ in range(60):
        kind = rng.choice(list(AnnotationKind))
        first = make_random_annotation(rng, kind=kind)
        anns = [first] + [
            make_random_annotation(rng, kind=kind, component=first.annotated_by)
            for _ in range(rng.randint(0, 3))
        ]
        ts = make_triple_set(anns)
        scored = evaluate_output_explanation(explain_output(ts).text, ts)
        assert scored.score.prefix_rating == 3, scored
        assert scored.score.annotation_ratings == (3,) * len(anns), scored
        assert scored.score.q_e == Fraction(6)


# single mutations knock off exactly one point, and repeats of the same
# error class are not double counted


def test_deleting_one_value_phrase_costs_one_point(spot_triple_set):
    text = explain_output(spot_triple_set).text
    mutated = text.replace(" starting from position 10 and ending at position 16", "")
    scored = evaluate_output_explanation(mutated, spot_triple_set)
    assert scored.score.prefix_rating == 3
    assert scored.score.annotation_ratings == (2,)
    assert scored.score.q_e == Fraction(5)


def test_two_missing_fields_count_once():
    rng = random.Random(7)
    ann = make_random_annotation(rng, kind=AnnotationKind.INSTANCE)
    ts = make_triple_set([ann])
    text = explain_output(ts).text
    assert ann.score is not None or True
    mutated = text
    if ann.score is not None:
        mutated = mutated.replace(f" with a confidence of {ann.score}", "")
    mutated = mutated.replace(
        f" starting from position {ann.selector.start} and ending at position {ann.selector.end}",
        "",
    )
    scored = evaluate_output_explanation(mutated, ts)
    # timestamp and body still present; missing class applied once
    assert scored.score.annotation_ratings == (2,)


def test_wrong_count_depreciates_prefix(spot_triple_set):
    text = explain_output(spot_triple_set).text.replace("1 annotation(s)", "2 annotation(s)")
    rating, checks = score_prefix(text, spot_triple_set.component, 1)
    assert rating == 2
    assert checks_by_field(checks)[CheckField.COUNT].status is FieldStatus.INCORRECT


def test_wrong_component_depreciates_prefix(spot_triple_set):
    text = explain_output(spot_triple_set).text.replace("urn:qanary:TextRazor", "urn:qanary:SINA")
    rating, checks = score_prefix(text, spot_triple_set.component, 1)
    assert rating == 2
    assert checks_by_field(checks)[CheckField.COMPONENT].status is FieldStatus.INCORRECT


def test_wrong_component_and_count_floor(spot_triple_set):
    text = "Some component did something."
    rating, checks = score_prefix(text, spot_triple_set.component, 1)
    assert rating == 1
    by = checks_by_field(checks)
    assert by[CheckField.COMPONENT].status is FieldStatus.MISSING
    assert by[CheckField.COUNT].status is FieldStatus.MISSING


def test_component_matched_by_local_name(spot_triple_set):
    rating, checks = score_prefix(
        "The TextRazor component added 1 annotation.", spot_triple_set.component, 1
    )
    assert rating == 3
    assert checks_by_field(checks)[CheckField.COMPONENT].status is FieldStatus.FOUND


def test_score_matched_after_rounding():
    rng = random.Random(8)
    ann = make_random_annotation(rng, kind=AnnotationKind.SPOT_INSTANCE)
    ts = make_triple_set([ann])
    assert ann.score is not None
    rounded = str(ann.score.quantize(__import__("decimal").Decimal("0.0001")))
    text = explain_output(ts).text.replace(str(ann.score), rounded)
    scored = evaluate_output_explanation(text, ts)
    assert scored.score.annotation_ratings == (3,), (ann.score, rounded, text)


def test_cue_without_value_is_missing_not_incorrect():
    rng = random.Random(9)
    ann = make_random_annotation(rng, kind=AnnotationKind.SPOT_INSTANCE)
    ts = make_triple_set([ann])
    assert ann.score is not None
    text = explain_output(ts).text.replace(f" with a confidence of {ann.score}", " with high confidence")
    scored = evaluate_output_explanation(text, ts)
    by = checks_by_field(scored.annotation_checks[0])
    assert by[CheckField.SCORE].status is FieldStatus.MISSING
    assert scored.score.annotation_ratings == (2,)


def test_hallucinated_cue_without_value_is_not_applicable(spot_triple_set):
    # ground truth has no body; naming no concrete value must not depreciate
    text = explain_output(spot_triple_set).text + " The component found an entity."
    scored = evaluate_output_explanation(text, spot_triple_set)
    by = checks_by_field(scored.annotation_checks[0])
    assert by[CheckField.BODY].status is not FieldStatus.INCORRECT
    assert scored.score.annotation_ratings == (3,)


# q_e arithmetic


def test_q_e_known_values():
    assert q_e(3, [1]) == Fraction(4)
    assert q_e(3, [3, 3, 3]) == Fraction(6)
    assert q_e(2, [1, 3]) == Fraction(4)
    assert q_e(1, [1]) == Fraction(2)


def test_q_e_brute_force_oracle():
    cases = 0
    for prefix in (1, 2, 3):
        for length in (1, 2, 3):
            for ratings in product((1, 2, 3), repeat=length):
                got = q_e(prefix, list(ratings))
                # independent recomputation with integer arithmetic
                assert got * length == prefix * length + sum(ratings)
                assert Fraction(2) <= got <= Fraction(6)
                cases += 1
    assert cases == 117


def test_q_e_rejects_bad_input():
    with pytest.raises(EmptyAnnotationListError):
        q_e(3, [])
    with pytest.raises(ValueError):
        q_e(0, [3])
    with pytest.raises(ValueError):
        q_e(3, [4])


@given(
    prefix=st.integers(1, 3),
    ratings=st.lists(st.integers(1, 3), min_size=1, max_size=8),
    bump=st.integers(0, 7),
)
def test_q_e_monotone_in_each_argument(prefix, ratings, bump):
    base = q_e(prefix, ratings)
    if prefix < 3:
        assert q_e(prefix + 1, ratings) > base
    i = bump % len(ratings)
    if ratings[i] < 3:
        raised = ratings.copy()
        raised[i] += 1
        assert q_e(prefix, raised) > base


# pearson


def test_pearson_perfect_correlation_is_exact():
    assert pearson([1, 2, 3], [1, 2, 3]) == 1.0
    assert pearson([1, 2, 3], [3, 2, 1]) == -1.0
    assert pearson([1, 2, 3], [10, 20, 30]) == 1.0


def test_pearson_textbook_case():
    assert pearson([1, 2, 3, 4], [2, 1, 4, 3]) == pytest.approx(0.6, abs=1e-12)


def test_pearson_matches_statistics_module():
    rng = random.Random(31337)
    for _ in range(200):
        n = rng.randint(2, 12)
        x = [rng.randint(-50, 50) for _ in range(n)]
        y = [rng.randint(-50, 50) for _ in range(n)]
        if len(set(x)) < 2 or len(set(y)) < 2:
            continue
        assert pearson(x, y) == pytest.approx(statistics.correlation(x, y), abs=1e-9)


def test_pearson_symmetries():
    rng = random.Random(5)
    x = [rng.randint(0, 30) for _ in range(9)]
    y = [rng.randint(0, 30) for _ in range(9)]
    r = pearson(x, y)
    assert pearson(y, x) == pytest.approx(r, abs=1e-12)
    assert pearson([3 * v + 7 for v in x], y) == pytest.approx(r, abs=1e-9)
    assert pearson([-v for v in x], y) == pytest.approx(-r, abs=1e-9)


def test_pearson_errors():
    with pytest.raises(ConstantVectorError):
        pearson([1, 1, 1], [1, 2, 3])
    with pytest.raises(LengthMismatchError):
        pearson([1, 2], [1, 2, 3])
    with pytest.raises(LengthMismatchError):
        pearson([1], [1])


# aggregation


def score_of(prefix, ratings):
    return __import__("qaexplain.model", fromlist=["QualityScore"]).QualityScore(
        prefix_rating=prefix,
        annotation_ratings=tuple(ratings),
        q_e=q_e(prefix, ratings),
    )


def test_aggregate_means_and_marginals():
    combo = (AnnotationKind.INSTANCE,)
    groups = {
        (combo, AnnotationKind.INSTANCE, "mock"): [score_of(3, [3]), score_of(3, [1])],
        (combo, AnnotationKind.RELATION, "mock"): [score_of(2, [2])],
    }
    cells = aggregate(groups)
    by_kind = {c.test_kind: c for c in cells}
    assert by_kind[AnnotationKind.INSTANCE].mean_qe == Fraction(5)
    assert by_kind[AnnotationKind.INSTANCE].trial_count == 2
    assert by_kind[AnnotationKind.RELATION].mean_qe == Fraction(4)
    marginals = marginal_means(cells)
    assert marginals[(combo, "mock")] == Fraction(14, 3)


def test_aggregate_constant_scores_have_no_pearson():
    combo = (AnnotationKind.SPOT_INSTANCE,)
    groups = {(combo, AnnotationKind.SPOT_INSTANCE, "mock"): [score_of(3, [3]), score_of(3, [3])]}
    (cell,) = aggregate(groups)
    assert cell.mean_qe == Fraction(6)
    assert cell.pearson_r is None


def test_aggregate_pearson_when_variance_allows():
    combo = (AnnotationKind.INSTANCE,)
    groups = {
        (combo, AnnotationKind.INSTANCE, "mock"): [
            score_of(3, [3]),          # q_e 6, 1 annotation
            score_of(3, [1, 1]),       # q_e 4, 2 annotations
            score_of(1, [1, 1, 1]),    # q_e 2, 3 annotations
        ]
    }
    (cell,) = aggregate(groups)
    assert cell.pearson_r == -1.0


def test_experiment_result_validates_mean():
    with pytest.raises(ValueError):
        ExperimentResult(
            example_kinds=(),
            test_kind=AnnotationKind.INSTANCE,
            model_id="mock",
            trial_scores=(score_of(3, [3]),),
            mean_qe=Fraction(5),
            pearson_r=None,
            trial_count=1,
        )


def test_format_qe_two_decimals():
    assert format_qe(Fraction(6)) == "6.00"
    assert format_qe(Fraction(14, 3)) == "4.67"
    assert format_qe(Fraction(4)) == "4.00"


def test_value_check_serialization():
    check = ValueCheck(CheckField.SCORE, "0.5", FieldStatus.FOUND, stated="0.5")
    assert check.as_dict() == {
        "field": "score",
        "expected": "0.5",
        "status": "Found",
        "stated": "0.5",
    }
