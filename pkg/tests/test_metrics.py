from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from factkit.adjudicate import Verdict, VerdictKind, assess_fact
from factkit.facts import EntityRef, TimePoint, current_values
from factkit.gateway import ModelAnswer
from factkit.metrics import (
    NOT_APPLICABLE,
    AccuracyBreakdown,
    DuplicateFactError,
    EditTarget,
    MissingAnswerError,
    RangeError,
    accuracy_breakdown,
    answers_agree,
    efficacy_success,
    evaluate_intervention,
    harmonic_mean,
    paraphrase_success,
    prompt_agreement,
    round_half_up_pct,
    select_outdated,
    write_edit_targets,
)
from factkit.prompts import PerturbationAxis, PromptVariant

from conftest import AL_NASSR, JUVENTUS, MAN_UTD, claim, make_record, make_snapshot


def verdict_for(kind: VerdictKind) -> Verdict:
    if kind is VerdictKind.IRRELEVANT:
        return Verdict(kind)
    return Verdict(kind, matched_qid="Q1", matched_surface="x")


def assessment(fact_id: str, aggregate: VerdictKind, model_id="m1"):
    return assess_fact(fact_id, model_id, [verdict_for(aggregate)] * 3)


def assessments_with_counts(correct: int, outdated: int, irrelevant: int, model_id="m1"):
    out = []
    kinds = (
        [VerdictKind.CORRECT] * correct
        + [VerdictKind.OUTDATED] * outdated
        + [VerdictKind.IRRELEVANT] * irrelevant
    )
    for i, kind in enumerate(kinds):
        out.append(assessment(f"f{i:03d}", kind, model_id))
    return out


class TestRounding:
    def test_half_up(self):
        assert round_half_up_pct(1, 8) == 13  # 12.5 -> 13
        assert round_half_up_pct(5, 8) == 63  # 62.5 -> 63

    def test_table_shape_130(self):
        assert round_half_up_pct(68, 130) == 52
        assert round_half_up_pct(52, 130) == 40
        assert round_half_up_pct(10, 130) == 8


class TestAccuracyBreakdown:
    def test_gpt4_shaped_fixture(self):
        breakdown = accuracy_breakdown(assessments_with_counts(80, 13, 7))
        assert (breakdown.correct_pct, breakdown.outdated_pct, breakdown.irrelevant_pct) == (
            80,
            13,
            7,
        )
        assert breakdown.n_facts == 100

    def test_all_correct(self):
        breakdown = accuracy_breakdown(assessments_with_counts(5, 0, 0))
        assert (breakdown.correct_pct, breakdown.outdated_pct, breakdown.irrelevant_pct) == (
            100,
            0,
            0,
        )

    def test_rounding_on_130_facts(self):
        breakdown = accuracy_breakdown(assessments_with_counts(68, 52, 10))
        assert (breakdown.correct_pct, breakdown.outdated_pct, breakdown.irrelevant_pct) == (
            52,
            40,
            8,
        )
        assert breakdown.correct_fraction == pytest.approx(68 / 130)

    def test_duplicate_fact_rejected(self):
        rows = assessments_with_counts(2, 0, 0)
        with pytest.raises(DuplicateFactError):
            accuracy_breakdown(rows + [rows[0]])

    def test_counts_sum_invariant(self):
        with pytest.raises(ValueError):
            AccuracyBreakdown(
                model_id="m", n_facts=10, n_correct=5, n_outdated=4, n_irrelevant=2
            )

    def test_json_round_trip(self):
        breakdown = accuracy_breakdown(assessments_with_counts(6, 3, 1))
        assert AccuracyBreakdown.from_json(breakdown.to_json()) == breakdown


@pytest.fixture
def record(ronaldo_record):
    return ronaldo_record


def make_answers(record, texts, axis=PerturbationAxis.SUBJECT, model_id="m1"):
    return [
        ModelAnswer(
            fact_id=record.fact_id,
            axis=axis,
            variant_index=i + 1,
            model_id=model_id,
            raw_text=text,
        )
        for i, text in enumerate(texts)
    ]


class TestAgreement:
    def test_same_entity_different_surfaces_agree(self, record):
        assert answers_agree(["Al-Nassr", "Al Nassr FC", "Al-Nassr"], record)

    def test_identical_strings_agree_even_unresolved(self, record):
        assert answers_agree(["mystery club", "mystery club", "mystery club"], record)

    def test_distinct_entities_disagree(self, record):
        assert not answers_agree(["Al-Nassr", "Juventus", "Al-Nassr"], record)

    def test_mixed_resolution_disagrees(self, record):
        assert not answers_agree(["Al-Nassr", "mystery club", "Al-Nassr"], record)

    def test_permutation_invariant(self, record):
        texts = ["Al-Nassr", "Juventus", "Al Nassr FC"]
        base = answers_agree(texts, record)
        for perm in [
            [texts[1], texts[0], texts[2]],
            [texts[2], texts[1], texts[0]],
        ]:
            assert answers_agree(perm, record) == base

    def test_report_percentage(self, record):
        other = make_record(
            fact_id="Q2:P54",
            subject=EntityRef("Q2", "Someone Else"),
            claims=[claim(JUVENTUS, start=TimePoint(2020))],
        )
        groups = [
            (record, make_answers(record, ["Al-Nassr", "Al-Nassr", "Al-Nassr"])),
            (other, make_answers(other, ["Juventus", "Inter", "Juventus"])),
        ]
        report = prompt_agreement(groups, PerturbationAxis.SUBJECT)
        assert report.per_fact == {"Q11571:P54": True, "Q2:P54": False}
        assert report.agreement_pct == 50.0

    def test_rounded_display_shape(self, record):
        # 28 of 130 agreeing facts displays as 22%
        assert round_half_up_pct(28, 130) == 22

    def test_axis_mismatch_rejected(self, record):
        groups = [
            (record, make_answers(record, ["a", "b", "c"], axis=PerturbationAxis.PROPERTY))
        ]
        with pytest.raises(ValueError):
            prompt_agreement(groups, PerturbationAxis.SUBJECT)


class TestSelectOutdated:
    def test_counts_match_breakdown(self):
        records = []
        rows = []
        kinds = (
            [VerdictKind.CORRECT] * 60
            + [VerdictKind.OUTDATED] * 54
            + [VerdictKind.IRRELEVANT] * 16
        )
        for i, kind in enumerate(kinds):
            record = make_record(
                fact_id=f"f{i:03d}",
                subject=EntityRef(f"Q{i + 1}", f"S{i}"),
                claims=[
                    claim(EntityRef(f"Q{1000 + i}", f"V{i}"), start=TimePoint(2023))
                ],
            )
            records.append(record)
            rows.append(assessment(f"f{i:03d}", kind))
        snapshot = make_snapshot(records)
        targets = select_outdated(rows, snapshot)
        breakdown = accuracy_breakdown(rows)
        assert len(targets) == breakdown.n_outdated == 54

        # brute-force filter over the assessment dump agrees exactly
        expected_ids = [
            a.fact_id for a in rows if a.aggregate is VerdictKind.OUTDATED
        ]
        assert [t.fact_id for t in targets] == expected_ids

    def test_all_correct_model_yields_no_targets(self, record):
        snapshot = make_snapshot([record])
        rows = [assessment(record.fact_id, VerdictKind.CORRECT)]
        assert select_outdated(rows, snapshot) == []

    def test_targets_carry_current_values(self, record):
        snapshot = make_snapshot([record])
        rows = [assessment(record.fact_id, VerdictKind.OUTDATED)]
        targets = select_outdated(rows, snapshot)
        assert targets[0].current_values == tuple(current_values(record))

    def test_edit_target_file_format(self, tmp_path, record):
        snapshot = make_snapshot([record])
        targets = select_outdated(
            [assessment(record.fact_id, VerdictKind.OUTDATED)], snapshot
        )
        prompts = {
            record.fact_id: [
                PromptVariant(
                    fact_id=record.fact_id,
                    axis=PerturbationAxis.PROPERTY,
                    variant_index=i,
                    text=f"question {i} about Cristiano Ronaldo?",
                    subject_surface="Cristiano Ronaldo",
                )
                for i in (1, 2, 3)
            ]
        }
        path = tmp_path / "targets.jsonl"
        write_edit_targets(path, targets, snapshot, prompts)
        row = json.loads(path.read_text().splitlines()[0])
        assert row == {
            "fact_id": "Q11571:P54",
            "subject_qid": "Q11571",
            "property": "P54",
            "new_value_qid": AL_NASSR.qid,
            "new_value_label": "Al-Nassr FC",
            "question": "question 1 about Cristiano Ronaldo?",
            "paraphrases": [
                "question 2 about Cristiano Ronaldo?",
                "question 3 about Cristiano Ronaldo?",
            ],
        }


def two_target_snapshot():
    a = make_record(
        fact_id="fa",
        subject=EntityRef("Q11", "Player A"),
        claims=[
            claim(AL_NASSR, start=TimePoint(2023)),
            claim(JUVENTUS, start=TimePoint(2018), end=TimePoint(2021)),
        ],
    )
    b = make_record(
        fact_id="fb",
        subject=EntityRef("Q12", "Player B"),
        claims=[
            claim(MAN_UTD, start=TimePoint(2022)),
            claim(JUVENTUS, start=TimePoint(2016), end=TimePoint(2020)),
        ],
    )
    snapshot = make_snapshot([a, b])
    targets = [
        EditTarget("fa", tuple(current_values(a))),
        EditTarget("fb", tuple(current_values(b))),
    ]
    return snapshot, targets


class TestEditScores:
    def test_efficacy_all_correct(self):
        snapshot, targets = two_target_snapshot()
        answers = {"fa": "Al-Nassr", "fb": "Manchester United"}
        assert efficacy_success(answers, targets, snapshot) == 1.0

    def test_efficacy_none_correct(self):
        snapshot, targets = two_target_snapshot()
        answers = {"fa": "Juventus", "fb": "nobody knows"}
        assert efficacy_success(answers, targets, snapshot) == 0.0

    def test_efficacy_fraction(self):
        snapshot, targets = two_target_snapshot()
        answers = {"fa": "Al-Nassr", "fb": "Juventus"}
        assert efficacy_success(answers, targets, snapshot) == 0.5

    def test_efficacy_missing_answer(self):
        snapshot, targets = two_target_snapshot()
        with pytest.raises(MissingAnswerError, match="fb"):
            efficacy_success({"fa": "Al-Nassr"}, targets, snapshot)

    def test_paraphrase_counts_instances(self):
        # 2 targets x 2 paraphrases = 4 instances, 3 correct -> 0.75
        snapshot, targets = two_target_snapshot()
        answers = {
            "fa": ["Al-Nassr", "Al-Nassr FC"],
            "fb": ["Manchester United", "Juventus"],
        }
        assert paraphrase_success(answers, targets, snapshot) == 0.75

    def test_paraphrase_requires_two_per_target(self):
        snapshot, targets = two_target_snapshot()
        with pytest.raises(MissingAnswerError):
            paraphrase_success({"fa": ["x", "y"], "fb": ["x"]}, targets, snapshot)

    def test_no_targets_is_a_precondition_violation(self):
        snapshot, _ = two_target_snapshot()
        with pytest.raises(ValueError):
            paraphrase_success({}, [], snapshot)


class TestHarmonicMean:
    def test_identity(self):
        assert harmonic_mean(1.0, 1.0) == 1.0

    def test_zero_annihilates(self):
        assert harmonic_mean(0.9, 0.0) == 0.0
        assert harmonic_mean(0.0, 0.0) == 0.0

    def test_hand_computed_value(self):
        assert harmonic_mean(0.8, 0.6) == pytest.approx(0.6857142857142857, abs=1e-9)

    def test_range_checked(self):
        with pytest.raises(RangeError):
            harmonic_mean(1.2, 0.5)
        with pytest.raises(RangeError):
            harmonic_mean(0.5, -0.1)

    @given(st.floats(0, 1), st.floats(0, 1))
    def test_symmetry_and_bounds(self, e, p):
        hm = harmonic_mean(e, p)
        assert hm == harmonic_mean(p, e)
        assert min(e, p) - 1e-12 <= hm <= max(e, p) + 1e-12

    @given(st.floats(0, 1))
    def test_idempotent_on_diagonal(self, x):
        assert harmonic_mean(x, x) == pytest.approx(x)


def test_evaluate_intervention_composes():
    snapshot, targets = two_target_snapshot()
    result = evaluate_intervention(
        model_id="m1",
        method_name="memory-patch",
        targets=targets,
        snapshot=snapshot,
        original_answers={"fa": "Al-Nassr", "fb": "Juventus"},
        paraphrase_answers={
            "fa": ["Al-Nassr", "Al-Nassr FC"],
            "fb": ["Manchester United", "Juventus"],
        },
    )
    assert result.efficacy == 0.5
    assert result.paraphrase == 0.75
    assert result.harmonic_mean == pytest.approx(harmonic_mean(0.5, 0.75))
    assert result.n_targets == 2


def test_not_applicable_is_a_distinct_marker():
    assert NOT_APPLICABLE is not None
    assert NOT_APPLICABLE != 0
    assert repr(NOT_APPLICABLE) == "NotApplicable"
