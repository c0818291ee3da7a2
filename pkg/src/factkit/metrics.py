"""Run-level scores: accuracy breakdowns, prompt-agreement consistency,
edit-target selection, and efficacy/paraphrase scoring of update methods.

Display percentages are rounded half-up to integers; the raw fractions are
always kept alongside so analysis never depends on display rounding.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .adjudicate import (
    ArityError,
    FactAssessment,
    VerdictKind,
    classify_text,
    normalize_answer,
    resolve_answer,
)
from .facts import BenchmarkSnapshot, EntityRef, FactRecord, current_values
from .gateway import ModelAnswer
from .prompts import PerturbationAxis, PromptVariant


class DuplicateFactError(ValueError):
    """The same fact appears twice in one assessment set."""


class MissingAnswerError(LookupError):
    """Post-intervention answers are missing for some edit targets."""


class RangeError(ValueError):
    """A fraction argument lies outside [0, 1]."""


class NotApplicable:
    """Marks an unsupported model/method pair; rendered as '---', never as 0."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "NotApplicable"


NOT_APPLICABLE = NotApplicable()


def round_half_up_pct(numerator: int, denominator: int) -> int:
    """Integer percent with exact half-up rounding (no float in the middle)."""
    if denominator <= 0:
        raise ValueError("denominator must be positive")
    return (200 * numerator + denominator) // (2 * denominator)


@dataclass(frozen=True)
class AccuracyBreakdown:
    """Correct/Outdated/Irrelevant shares of one model's fact assessments."""

    model_id: str
    n_facts: int
    n_correct: int
    n_outdated: int
    n_irrelevant: int

    def __post_init__(self) -> None:
        if self.n_correct + self.n_outdated + self.n_irrelevant != self.n_facts:
            raise ValueError("verdict counts must sum to n_facts")
        if self.n_facts <= 0:
            raise ValueError("n_facts must be positive")

    @property
    def correct_fraction(self) -> float:
        return self.n_correct / self.n_facts

    @property
    def outdated_fraction(self) -> float:
        return self.n_outdated / self.n_facts

    @property
    def irrelevant_fraction(self) -> float:
        return self.n_irrelevant / self.n_facts

    @property
    def correct_pct(self) -> int:
        return round_half_up_pct(self.n_correct, self.n_facts)

    @property
    def outdated_pct(self) -> int:
        return round_half_up_pct(self.n_outdated, self.n_facts)

    @property
    def irrelevant_pct(self) -> int:
        return round_half_up_pct(self.n_irrelevant, self.n_facts)

    def to_json(self) -> dict:
        return {
            "model_id": self.model_id,
            "n_facts": self.n_facts,
            "counts": {
                "correct": self.n_correct,
                "outdated": self.n_outdated,
                "irrelevant": self.n_irrelevant,
            },
            "fractions": {
                "correct": self.correct_fraction,
                "outdated": self.outdated_fraction,
                "irrelevant": self.irrelevant_fraction,
            },
            "display_pct": {
                "correct": self.correct_pct,
                "outdated": self.outdated_pct,
                "irrelevant": self.irrelevant_pct,
            },
        }

    @classmethod
    def from_json(cls, data: dict) -> "AccuracyBreakdown":
        counts = data["counts"]
        return cls(
            model_id=data["model_id"],
            n_facts=data["n_facts"],
            n_correct=counts["correct"],
            n_outdated=counts["outdated"],
            n_irrelevant=counts["irrelevant"],
        )


def accuracy_breakdown(assessments: Sequence[FactAssessment]) -> AccuracyBreakdown:
    """Counts of aggregate verdicts, one assessment per fact."""
    if not assessments:
        raise ValueError("no assessments")
    seen: set[str] = set()
    counts = {kind: 0 for kind in VerdictKind}
    for assessment in assessments:
        if assessment.fact_id in seen:
            raise DuplicateFactError(f"fact {assessment.fact_id} assessed twice")
        seen.add(assessment.fact_id)
        counts[assessment.aggregate] += 1
    model_ids = {a.model_id for a in assessments}
    if len(model_ids) != 1:
        raise ValueError(f"assessments span multiple models: {sorted(model_ids)}")
    return AccuracyBreakdown(
        model_id=model_ids.pop(),
        n_facts=len(assessments),
        n_correct=counts[VerdictKind.CORRECT],
        n_outdated=counts[VerdictKind.OUTDATED],
        n_irrelevant=counts[VerdictKind.IRRELEVANT],
    )


@dataclass(frozen=True)
class AgreementReport:
    """Per-fact prompt agreement for one model on one perturbation axis."""

    model_id: str
    axis: PerturbationAxis
    per_fact: Mapping[str, bool]

    def __post_init__(self) -> None:
        object.__setattr__(self, "per_fact", dict(self.per_fact))
        if not self.per_fact:
            raise ValueError("agreement report needs at least one fact")

    @property
    def n_facts(self) -> int:
        return len(self.per_fact)

    @property
    def n_agree(self) -> int:
        return sum(1 for agreed in self.per_fact.values() if agreed)

    @property
    def agreement_fraction(self) -> float:
        return self.n_agree / self.n_facts

    @property
    def agreement_pct(self) -> float:
        return 100.0 * self.n_agree / self.n_facts

    @property
    def agreement_pct_display(self) -> int:
        return round_half_up_pct(self.n_agree, self.n_facts)

    def to_json(self) -> dict:
        return {
            "model_id": self.model_id,
            "axis": self.axis.value,
            "n_facts": self.n_facts,
            "n_agree": self.n_agree,
            "agreement_pct": self.agreement_pct,
            "display_pct": self.agreement_pct_display,
            "per_fact": dict(sorted(self.per_fact.items())),
        }


def answers_agree(raw_texts: Sequence[str], record: FactRecord) -> bool:
    """One fact agrees when all three answers resolve to the same entity.

    Resolution goes through the adjudicator's matching, so surface variants
    of one name ("Al-Nassr" / "Al Nassr FC") still agree. When none of the
    three resolves to any known entity, the answers agree only if their
    normalized strings are identical; a mix of resolved and unresolved
    answers is a disagreement.
    """
    if len(raw_texts) != 3:
        raise ArityError(f"{record.fact_id}: expected 3 answers, got {len(raw_texts)}")
    qids = [resolve_answer(text, record) for text in raw_texts]
    if all(q is not None for q in qids):
        return len(set(qids)) == 1
    if all(q is None for q in qids):
        return len({normalize_answer(text) for text in raw_texts}) == 1
    return False


def prompt_agreement(
    groups: Iterable[tuple[FactRecord, Sequence[ModelAnswer]]],
    axis: PerturbationAxis,
) -> AgreementReport:
    """Agreement over per-fact answer triples for one model and axis."""
    per_fact: dict[str, bool] = {}
    model_ids: set[str] = set()
    for record, answers in groups:
        if len(answers) != 3:
            raise ArityError(
                f"{record.fact_id}: expected 3 answers, got {len(answers)}"
            )
        for answer in answers:
            if answer.axis is not axis:
                raise ValueError(
                    f"{record.fact_id}: answer axis {answer.axis} != report axis {axis}"
                )
            model_ids.add(answer.model_id)
        if record.fact_id in per_fact:
            raise DuplicateFactError(f"fact {record.fact_id} grouped twice")
        per_fact[record.fact_id] = answers_agree(
            [a.raw_text for a in answers], record
        )
    if len(model_ids) != 1:
        raise ValueError(f"answers span multiple models: {sorted(model_ids)}")
    return AgreementReport(model_id=model_ids.pop(), axis=axis, per_fact=per_fact)


@dataclass(frozen=True)
class EditTarget:
    """An outdated fact paired with the values an update should install."""

    fact_id: str
    current_values: tuple[EntityRef, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "current_values", tuple(self.current_values))
        if not self.current_values:
            raise ValueError(f"{self.fact_id}: edit target needs a current value")


def select_outdated(
    assessments: Sequence[FactAssessment], snapshot: BenchmarkSnapshot
) -> list[EditTarget]:
    """Exactly the facts whose aggregate verdict is Outdated, in input order."""
    targets = []
    for assessment in assessments:
        if assessment.aggregate is VerdictKind.OUTDATED:
            record = snapshot.record_by_id(assessment.fact_id)
            targets.append(
                EditTarget(
                    fact_id=assessment.fact_id,
                    current_values=tuple(current_values(record)),
                )
            )
    return targets


def write_edit_targets(
    path: str | Path,
    targets: Sequence[EditTarget],
    snapshot: BenchmarkSnapshot,
    prompts_by_fact: Mapping[str, Sequence[PromptVariant]],
) -> None:
    """Hand-off file for external update tools, one JSON row per target.

    The question is the variant-1 prompt; the two remaining property
    perturbations ride along as paraphrases.
    """
    with Path(path).open("w", encoding="utf-8") as handle:
        for target in targets:
            record = snapshot.record_by_id(target.fact_id)
            prompts = sorted(prompts_by_fact[target.fact_id], key=lambda p: p.variant_index)
            if len(prompts) != 3:
                raise ArityError(f"{target.fact_id}: expected 3 prompts")
            new_value = target.current_values[0]
            row = {
                "fact_id": target.fact_id,
                "subject_qid": record.subject.qid,
                "property": record.property_id,
                "new_value_qid": new_value.qid,
                "new_value_label": new_value.label,
                "question": prompts[0].text,
                "paraphrases": [prompts[1].text, prompts[2].text],
            }
            handle.write(json.dumps(row, sort_keys=True) + "\n")


def load_edit_targets(path: str | Path) -> list[dict]:
    rows = []
    with Path(path).open(encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def efficacy_success(
    original_answers: Mapping[str, str],
    targets: Sequence[EditTarget],
    snapshot: BenchmarkSnapshot,
) -> float:
    """Fraction of targets whose original-prompt answer now names a current value."""
    if not targets:
        raise ValueError("no edit targets")
    missing = [t.fact_id for t in targets if t.fact_id not in original_answers]
    if missing:
        raise MissingAnswerError(f"missing original-prompt answers for {missing}")
    correct = 0
    for target in targets:
        record = snapshot.record_by_id(target.fact_id)
        verdict = classify_text(original_answers[target.fact_id], record)
        if verdict.kind is VerdictKind.CORRECT:
            correct += 1
    return correct / len(targets)


def paraphrase_success(
    paraphrase_answers: Mapping[str, Sequence[str]],
    targets: Sequence[EditTarget],
    snapshot: BenchmarkSnapshot,
) -> float:
    """Fraction of (target x paraphrase-prompt) instances answered correctly."""
    if not targets:
        raise ValueError("no edit targets")
    missing = [
        t.fact_id
        for t in targets
        if len(paraphrase_answers.get(t.fact_id, ())) != 2
    ]
    if missing:
        raise MissingAnswerError(f"missing paraphrase answers for {missing}")
    correct = 0
    total = 0
    for target in targets:
        record = snapshot.record_by_id(target.fact_id)
        for text in paraphrase_answers[target.fact_id]:
            total += 1
            if classify_text(text, record).kind is VerdictKind.CORRECT:
                correct += 1
    return correct / total


def harmonic_mean(efficacy: float, paraphrase: float) -> float:
    """2ep/(e+p), defined as 0 when both inputs are 0."""
    for value in (efficacy, paraphrase):
        if not 0.0 <= value <= 1.0:
            raise RangeError(f"fraction {value} outside [0, 1]")
    if efficacy + paraphrase == 0:
        return 0.0
    return 2.0 * efficacy * paraphrase / (efficacy + paraphrase)


@dataclass(frozen=True)
class EditEvalResult:
    """Efficacy, paraphrase, and harmonic-mean scores for one update method."""

    model_id: str
    method_name: str
    n_targets: int
    efficacy: float
    paraphrase: float
    harmonic_mean: float

    def __post_init__(self) -> None:
        expected = harmonic_mean(self.efficacy, self.paraphrase)
        if abs(self.harmonic_mean - expected) > 1e-12:
            raise ValueError("harmonic_mean inconsistent with efficacy and paraphrase")

    def to_json(self) -> dict:
        return {
            "model_id": self.model_id,
            "method_name": self.method_name,
            "n_targets": self.n_targets,
            "efficacy": self.efficacy,
            "paraphrase": self.paraphrase,
            "harmonic_mean": self.harmonic_mean,
        }


def evaluate_intervention(
    model_id: str,
    method_name: str,
    targets: Sequence[EditTarget],
    snapshot: BenchmarkSnapshot,
    original_answers: Mapping[str, str],
    paraphrase_answers: Mapping[str, Sequence[str]],
) -> EditEvalResult:
    efficacy = efficacy_success(original_answers, targets, snapshot)
    paraphrase = paraphrase_success(paraphrase_answers, targets, snapshot)
    return EditEvalResult(
        model_id=model_id,
        method_name=method_name,
        n_targets=len(targets),
        efficacy=efficacy,
        paraphrase=paraphrase,
        harmonic_mean=harmonic_mean(efficacy, paraphrase),
    )
