"""Question rendering and the two prompt-perturbation families.

Perturbed wordings are curated config, never generated here: property
variants come from the template file (three phrasings per category and
property), subject variants from an alias file (three surfaces per subject).
Rendering is deterministic so replay runs are byte-stable.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

from .facts import Category, FactRecord

INSTRUCTION_PREFIX = "Answer with the name only. "

# Questions must stay present-tense with no explicit time specifier; an
# embedded year is the mechanically checkable violation.
YEAR_TOKEN_RE = re.compile(r"\b(19|20)\d{2}\b")


class MissingTemplateError(LookupError):
    """No (or not exactly three) templates registered for a category/property."""


class PlaceholderMismatchError(ValueError):
    """Template placeholders do not match what rendering requires."""


class MissingPerturbationsError(LookupError):
    """No curated subject surfaces registered for the subject."""


class AlreadyPrefixedError(ValueError):
    """The instruction prefix was already applied to this variant."""


class PerturbationAxis(str, Enum):
    SUBJECT = "subject"
    PROPERTY = "property"


@dataclass(frozen=True)
class PromptTemplate:
    """One question phrasing with a ``{subject}`` slot and optional ``{title}``."""

    template_id: str
    category: Category
    property_id: str
    variant_index: int
    text: str

    def __post_init__(self) -> None:
        if not 1 <= self.variant_index <= 3:
            raise ValueError(f"{self.template_id}: variant_index must be 1..3")
        if self.text.count("{subject}") != 1:
            raise PlaceholderMismatchError(
                f"{self.template_id}: template must contain exactly one {{subject}}"
            )
        if YEAR_TOKEN_RE.search(self.text):
            raise ValueError(
                f"{self.template_id}: explicit year token in template text"
            )

    @property
    def needs_title(self) -> bool:
        return "{title}" in self.text


@dataclass(frozen=True)
class SubjectPerturbationSet:
    """Three curated surface forms of one subject."""

    subject_qid: str
    surfaces: tuple[str, str, str]

    def __post_init__(self) -> None:
        object.__setattr__(self, "surfaces", tuple(self.surfaces))
        if len(self.surfaces) != 3:
            raise ValueError(f"{self.subject_qid}: exactly 3 surfaces required")
        if len(set(self.surfaces)) != 3 or not all(self.surfaces):
            raise ValueError(f"{self.subject_qid}: surfaces must be distinct and non-empty")


@dataclass(frozen=True)
class PromptVariant:
    """One rendered question, tagged with the perturbation axis that produced it."""

    fact_id: str
    axis: PerturbationAxis
    variant_index: int
    text: str
    subject_surface: str
    instruction_prefixed: bool = False


def _render_one(
    record: FactRecord,
    template: PromptTemplate,
    surface: str,
    axis: PerturbationAxis,
    variant_index: int,
) -> PromptVariant:
    text = template.text
    if template.needs_title:
        if not record.official_title:
            raise PlaceholderMismatchError(
                f"{template.template_id}: template needs {{title}} but record "
                f"{record.fact_id} has no official_title"
            )
        text = text.replace("{title}", record.official_title)
    elif record.category is Category.COUNTRY and record.official_title:
        # Country templates are expected to carry the title slot; a missing
        # slot silently drops the role word, which is a config bug.
        raise PlaceholderMismatchError(
            f"{template.template_id}: country template lacks {{title}}"
        )
    text = text.replace("{subject}", surface)
    if text.count(surface) != 1:
        raise PlaceholderMismatchError(
            f"{template.template_id}: surface {surface!r} must occur exactly once "
            f"in the rendered prompt"
        )
    if YEAR_TOKEN_RE.search(text):
        raise ValueError(f"{template.template_id}: rendered prompt contains a year token")
    return PromptVariant(
        fact_id=record.fact_id,
        axis=axis,
        variant_index=variant_index,
        text=text,
        subject_surface=surface,
    )


def render_property_variants(
    record: FactRecord, templates: Sequence[PromptTemplate]
) -> list[PromptVariant]:
    """Three question phrasings sharing the canonical subject surface."""
    selected = sorted(
        (
            t
            for t in templates
            if t.category is record.category and t.property_id == record.property_id
        ),
        key=lambda t: t.variant_index,
    )
    if [t.variant_index for t in selected] != [1, 2, 3]:
        raise MissingTemplateError(
            f"need template variants 1..3 for ({record.category.value}, "
            f"{record.property_id}); found {[t.variant_index for t in selected]}"
        )
    return [
        _render_one(record, t, record.subject.label, PerturbationAxis.PROPERTY, t.variant_index)
        for t in selected
    ]


def render_subject_variants(
    record: FactRecord,
    template: PromptTemplate,
    perturbations: SubjectPerturbationSet,
) -> list[PromptVariant]:
    """One fixed phrasing rendered with each curated subject surface."""
    if perturbations.subject_qid != record.subject.qid:
        raise MissingPerturbationsError(
            f"perturbation set is for {perturbations.subject_qid}, "
            f"record subject is {record.subject.qid}"
        )
    return [
        _render_one(record, template, surface, PerturbationAxis.SUBJECT, index)
        for index, surface in enumerate(perturbations.surfaces, start=1)
    ]


def apply_instruction_prefix(variant: PromptVariant) -> PromptVariant:
    """Prepend the name-only instruction; refuses to double-apply."""
    if variant.instruction_prefixed:
        raise AlreadyPrefixedError(f"{variant.fact_id}: prefix already applied")
    return replace(
        variant, text=INSTRUCTION_PREFIX + variant.text, instruction_prefixed=True
    )


def load_templates(path: str | Path) -> list[PromptTemplate]:
    """Template file: a JSON array of {template_id, category, property, variant_index, text}."""
    rows = json.loads(Path(path).read_text(encoding="utf-8"))
    return [
        PromptTemplate(
            template_id=row["template_id"],
            category=Category(row["category"]),
            property_id=row["property"],
            variant_index=row["variant_index"],
            text=row["text"],
        )
        for row in rows
    ]


def load_perturbations(path: str | Path) -> dict[str, SubjectPerturbationSet]:
    """Perturbation file: a JSON array of {subject_qid, surfaces[3]}."""
    rows = json.loads(Path(path).read_text(encoding="utf-8"))
    out: dict[str, SubjectPerturbationSet] = {}
    for row in rows:
        pert = SubjectPerturbationSet(
            subject_qid=row["subject_qid"], surfaces=tuple(row["surfaces"])
        )
        if pert.subject_qid in out:
            raise ValueError(f"duplicate perturbation set for {pert.subject_qid}")
        out[pert.subject_qid] = pert
    return out


def perturbations_for(
    record: FactRecord, registry: Mapping[str, SubjectPerturbationSet]
) -> SubjectPerturbationSet:
    try:
        return registry[record.subject.qid]
    except KeyError:
        raise MissingPerturbationsError(
            f"no subject perturbations registered for {record.subject.qid}"
        ) from None


def single_differing_span(a: str, b: str) -> tuple[str, str]:
    """The middle chunks left after stripping the common prefix and suffix.

    Used by invariant checks: subject-perturbation siblings must differ in
    exactly one contiguous span (the surface substitution).
    """
    prefix = 0
    while prefix < min(len(a), len(b)) and a[prefix] == b[prefix]:
        prefix += 1
    suffix = 0
    while (
        suffix < min(len(a), len(b)) - prefix
        and a[len(a) - 1 - suffix] == b[len(b) - 1 - suffix]
    ):
        suffix += 1
    return a[prefix : len(a) - suffix], b[prefix : len(b) - suffix]
