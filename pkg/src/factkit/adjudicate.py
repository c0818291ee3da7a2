"""Answer classification against a fact record.

An answer is Correct when it names a current value, Outdated when it names a
previously valid one, Irrelevant otherwise. Matching is containment of a
normalized label or alias at token boundaries, not exact equality: even when
told to answer with the name only, base models wrap names in sentences.

The matching procedure here (normalization rules, alias containment,
longest-match ties) is a declared protocol of this toolkit — see README.
"""
from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .facts import (
    EntityRef,
    FactRecord,
    TemporalClaim,
    current_value_claims,
    historical_value_claims,
)
from .gateway import ModelAnswer


class ArityError(ValueError):
    """A per-fact verdict group does not contain exactly three verdicts."""


class VerdictKind(str, Enum):
    CORRECT = "correct"
    OUTDATED = "outdated"
    IRRELEVANT = "irrelevant"


_KIND_RANK = {
    VerdictKind.CORRECT: 2,
    VerdictKind.OUTDATED: 1,
    VerdictKind.IRRELEVANT: 0,
}


def kind_rank(kind: VerdictKind) -> int:
    """Lattice position: Correct > Outdated > Irrelevant."""
    return _KIND_RANK[kind]


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    matched_qid: str | None = None
    matched_surface: str | None = None

    def __post_init__(self) -> None:
        if (self.kind is VerdictKind.IRRELEVANT) != (self.matched_qid is None):
            raise ValueError(
                "matched_qid must be present exactly when the verdict is not irrelevant"
            )


@dataclass(frozen=True)
class FactAssessment:
    """Per-fact verdicts for the three prompts plus their best-of aggregate."""

    fact_id: str
    model_id: str
    per_prompt: tuple[Verdict, Verdict, Verdict]
    aggregate: VerdictKind

    def __post_init__(self) -> None:
        object.__setattr__(self, "per_prompt", tuple(self.per_prompt))
        if len(self.per_prompt) != 3:
            raise ArityError("per_prompt must hold exactly 3 verdicts")
        expected = upper_bound([v.kind for v in self.per_prompt])
        if self.aggregate is not expected:
            raise ValueError(
                f"{self.fact_id}: aggregate {self.aggregate} != best-of {expected}"
            )


_STOP_PHRASES: list[tuple[str, ...]] | None = None


def _load_stop_phrases() -> list[tuple[str, ...]]:
    global _STOP_PHRASES
    if _STOP_PHRASES is None:
        raw = json.loads(
            resources.files("factkit.data").joinpath("stop_phrases.json").read_text()
        )
        phrases = [tuple(_basic_normalize(p).split()) for p in raw["phrases"]]
        # longest first so "the answer is" wins over a shorter prefix of itself
        _STOP_PHRASES = sorted({p for p in phrases if p}, key=len, reverse=True)
    return _STOP_PHRASES


def _basic_normalize(text: str) -> str:
    """Compatibility-fold, strip diacritics, casefold, punctuation to spaces."""
    text = unicodedata.normalize("NFKC", text)
    decomposed = unicodedata.normalize("NFD", text)
    text = "".join(ch for ch in decomposed if unicodedata.category(ch) != "Mn")
    text = text.casefold()
    text = "".join(
        " " if unicodedata.category(ch).startswith("P") else ch for ch in text
    )
    return " ".join(text.split())


def normalize_answer(raw_text: str) -> str:
    """Normalize a free-form model answer for label matching.

    Applies unicode compatibility normalization, diacritic folding, case
    folding, punctuation-to-space, whitespace collapsing, and then strips
    leading boilerplate per the shipped stop-phrase list.
    """
    tokens = _basic_normalize(raw_text).split()
    stripped = True
    while stripped and tokens:
        stripped = False
        for phrase in _load_stop_phrases():
            if len(tokens) > len(phrase) and tuple(tokens[: len(phrase)]) == phrase:
                tokens = tokens[len(phrase) :]
                stripped = True
                break
    return " ".join(tokens)


def match_entity(normalized_answer: str, entity: EntityRef) -> str | None:
    """Longest normalized label-or-alias of the entity contained in the
    answer at token boundaries; None when nothing matches."""
    if not normalized_answer:
        return None
    padded = f" {normalized_answer} "
    candidates = sorted(
        {_basic_normalize(surface) for surface in entity.surfaces()},
        key=lambda c: (-len(c), c),
    )
    for candidate in candidates:
        if candidate and f" {candidate} " in padded:
            return candidate
    return None


def _claim_recency(claim: TemporalClaim) -> tuple[int, int, int]:
    return claim.start.sort_key() if claim.start else (-(10**9), 0, 0)


def _best_match(
    normalized_answer: str, pairs: Sequence[tuple[EntityRef, TemporalClaim]]
) -> tuple[EntityRef, str] | None:
    matches: list[tuple[int, tuple[int, int, int], int, EntityRef, str]] = []
    for order, (value, claim) in enumerate(pairs):
        surface = match_entity(normalized_answer, value)
        if surface is not None:
            matches.append((len(surface), _claim_recency(claim), -order, value, surface))
    if not matches:
        return None
    # longest matched surface wins, then the most recent start date
    matches.sort(key=lambda m: (m[0], m[1], m[2]), reverse=True)
    _, _, _, value, surface = matches[0]
    return value, surface


def classify_text(raw_text: str, record: FactRecord) -> Verdict:
    """Classify a raw answer string against one fact record.

    Current values are checked before historical ones, so an answer naming
    both an old and the new value counts as Correct.
    """
    normalized = normalize_answer(raw_text)
    current = _best_match(normalized, current_value_claims(record))
    if current is not None:
        value, surface = current
        return Verdict(VerdictKind.CORRECT, matched_qid=value.qid, matched_surface=surface)
    historical = _best_match(normalized, historical_value_claims(record))
    if historical is not None:
        value, surface = historical
        return Verdict(VerdictKind.OUTDATED, matched_qid=value.qid, matched_surface=surface)
    return Verdict(VerdictKind.IRRELEVANT)


def classify(answer: ModelAnswer, record: FactRecord) -> Verdict:
    if answer.fact_id != record.fact_id:
        raise ValueError(
            f"answer is for {answer.fact_id}, record is {record.fact_id}"
        )
    return classify_text(answer.raw_text, record)


def resolve_answer(raw_text: str, record: FactRecord) -> str | None:
    """The entity qid an answer resolves to (current or historical), if any."""
    return classify_text(raw_text, record).matched_qid


def upper_bound(kinds: Sequence[VerdictKind]) -> VerdictKind:
    """Best verdict achieved across a fact's three prompts."""
    if len(kinds) != 3:
        raise ArityError(f"expected exactly 3 verdicts, got {len(kinds)}")
    return max(kinds, key=kind_rank)


def assess_fact(
    fact_id: str, model_id: str, verdicts: Sequence[Verdict]
) -> FactAssessment:
    if len(verdicts) != 3:
        raise ArityError(f"{fact_id}: expected exactly 3 verdicts, got {len(verdicts)}")
    return FactAssessment(
        fact_id=fact_id,
        model_id=model_id,
        per_prompt=tuple(verdicts),
        aggregate=upper_bound([v.kind for v in verdicts]),
    )


def verdict_dump_row(answer: ModelAnswer, verdict: Verdict) -> dict:
    row = {
        "fact_id": answer.fact_id,
        "model_id": answer.model_id,
        "axis": answer.axis.value,
        "variant_index": answer.variant_index,
        "verdict": verdict.kind.value,
    }
    if verdict.matched_qid is not None:
        row["matched_qid"] = verdict.matched_qid
    return row


def write_verdict_dump(
    path: str | Path, rows: Iterable[tuple[ModelAnswer, Verdict]]
) -> None:
    """Line-delimited JSON rows for downstream metrics and audits."""
    with Path(path).open("w", encoding="utf-8") as handle:
        for answer, verdict in rows:
            handle.write(json.dumps(verdict_dump_row(answer, verdict), sort_keys=True))
            handle.write("\n")
