"""factkit: dynamic time-sensitive fact benchmarking for language models.

Builds fact snapshots from a live knowledge base, renders perturbed question
prompts, adjudicates model answers as correct/outdated/irrelevant, scores
knowledge-update interventions, and produces entity-aware annotated corpora
for consistency-oriented fine-tuning.
"""

from .facts import (
    BenchmarkSnapshot,
    Category,
    EmptyCurrentSetError,
    EntityRef,
    FactRecord,
    Rank,
    SchemaError,
    TemporalClaim,
    TimePoint,
    TimePrecision,
    current_values,
    historical_values,
    load_snapshot,
    save_snapshot,
)
from .adjudicate import (
    FactAssessment,
    Verdict,
    VerdictKind,
    classify,
    classify_text,
    match_entity,
    normalize_answer,
    upper_bound,
)
from .gateway import ModelAnswer, ModelSpec, QueryFailure, open_gateway, query_batch
from .metrics import (
    AccuracyBreakdown,
    AgreementReport,
    EditEvalResult,
    EditTarget,
    accuracy_breakdown,
    harmonic_mean,
    prompt_agreement,
    select_outdated,
)
from .prompts import (
    PerturbationAxis,
    PromptTemplate,
    PromptVariant,
    SubjectPerturbationSet,
    apply_instruction_prefix,
    render_property_variants,
    render_subject_variants,
)

__version__ = "0.1.0"
