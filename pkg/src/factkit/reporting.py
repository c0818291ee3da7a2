"""Report emission: accuracy tables, agreement tables, and scatter data.

Outputs are byte-deterministic given identical inputs: rows sort by release
year then model id, floats use fixed formatting, and the only run-specific
value is the manifest id each report references.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Sequence

from .gateway import ModelSpec
from .metrics import NOT_APPLICABLE, AccuracyBreakdown, AgreementReport, EditEvalResult


def file_sha256(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to reproduce a run's outputs byte-exactly."""

    run_id: str
    command: str
    snapshot_id: str
    model_ids: tuple[str, ...]
    input_hashes: Mapping[str, str]
    decoding_params: Mapping[str, object]
    created_at: str = field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat()
    )

    def to_json(self) -> dict:
        return {
            "run_id": self.run_id,
            "command": self.command,
            "snapshot_id": self.snapshot_id,
            "model_ids": list(self.model_ids),
            "input_hashes": dict(sorted(self.input_hashes.items())),
            "decoding_params": dict(self.decoding_params),
            "created_at": self.created_at,
        }

    def write(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json(), sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )


@dataclass(frozen=True)
class ModelRow:
    """A per-model report row: the breakdown and/or agreement results."""

    model_id: str
    release_year: int
    breakdown: AccuracyBreakdown | None = None
    subject_agreement: AgreementReport | None = None
    property_agreement: AgreementReport | None = None


def _sorted_rows(rows: Sequence[ModelRow]) -> list[ModelRow]:
    return sorted(rows, key=lambda r: (r.release_year, r.model_id))


def breakdown_markdown(rows: Sequence[ModelRow], run_id: str) -> str:
    lines = [
        "# Accuracy breakdown",
        "",
        f"Manifest: {run_id}",
        "",
        "| (Year) Model | Correct | Outdated | Irrelevant |",
        "|---|---:|---:|---:|",
    ]
    for row in _sorted_rows(rows):
        b = row.breakdown
        if b is None:
            continue
        lines.append(
            f"| ({row.release_year}) {row.model_id} "
            f"| {b.correct_pct}% | {b.outdated_pct}% | {b.irrelevant_pct}% |"
        )
    return "\n".join(lines) + "\n"


def breakdown_csv(rows: Sequence[ModelRow], run_id: str) -> str:
    lines = [
        "run_id,model_id,release_year,n_facts,"
        "correct_count,outdated_count,irrelevant_count,"
        "correct_fraction,outdated_fraction,irrelevant_fraction,"
        "correct_pct,outdated_pct,irrelevant_pct"
    ]
    for row in _sorted_rows(rows):
        b = row.breakdown
        if b is None:
            continue
        lines.append(
            f"{run_id},{row.model_id},{row.release_year},{b.n_facts},"
            f"{b.n_correct},{b.n_outdated},{b.n_irrelevant},"
            f"{b.correct_fraction:.6f},{b.outdated_fraction:.6f},"
            f"{b.irrelevant_fraction:.6f},"
            f"{b.correct_pct},{b.outdated_pct},{b.irrelevant_pct}"
        )
    return "\n".join(lines) + "\n"


def agreement_markdown(rows: Sequence[ModelRow], run_id: str) -> str:
    lines = [
        "# Prompt agreement",
        "",
        f"Manifest: {run_id}",
        "",
        "| (Year) Model | Subject Agrmt. (%) | Property Agrmt. (%) |",
        "|---|---:|---:|",
    ]
    for row in _sorted_rows(rows):
        if row.subject_agreement is None and row.property_agreement is None:
            continue
        subject = (
            f"{row.subject_agreement.agreement_pct_display}%"
            if row.subject_agreement
            else "---"
        )
        prop = (
            f"{row.property_agreement.agreement_pct_display}%"
            if row.property_agreement
            else "---"
        )
        lines.append(f"| ({row.release_year}) {row.model_id} | {subject} | {prop} |")
    return "\n".join(lines) + "\n"


def scatter_data(rows: Sequence[ModelRow], run_id: str) -> str:
    """Plot-ready (release_year, agreement_pct, model_id, axis) records."""
    lines = [f"# manifest: {run_id}", "release_year,agreement_pct,model_id,axis"]
    for row in _sorted_rows(rows):
        for report in (row.subject_agreement, row.property_agreement):
            if report is None:
                continue
            lines.append(
                f"{row.release_year},{report.agreement_pct:.4f},"
                f"{row.model_id},{report.axis.value}"
            )
    return "\n".join(lines) + "\n"


def edit_eval_markdown(
    results: Sequence[EditEvalResult | object],
    model_id: str,
    n_targets: int,
    run_id: str,
) -> str:
    """One model's update-method comparison; unsupported pairs render as ---."""
    lines = [
        "# Update intervention scores",
        "",
        f"Manifest: {run_id}",
        "",
        f"Model: {model_id} ({n_targets} outdated facts)",
        "",
        "| Method | Efficacy | Paraphrase | Harmonic mean |",
        "|---|---:|---:|---:|",
    ]
    for result in results:
        if result is NOT_APPLICABLE:
            continue
        assert isinstance(result, EditEvalResult)
        lines.append(
            f"| {result.method_name} | {result.efficacy:.3f} "
            f"| {result.paraphrase:.3f} | {result.harmonic_mean:.3f} |"
        )
    return "\n".join(lines) + "\n"


def rows_from_files(
    model_specs: Mapping[str, ModelSpec],
    breakdown_files: Sequence[str | Path] = (),
    agreement_files: Sequence[str | Path] = (),
) -> list[ModelRow]:
    """Assemble report rows from evaluate/consistency output files."""
    from .metrics import AgreementReport as _AR
    from .prompts import PerturbationAxis

    breakdowns: dict[str, AccuracyBreakdown] = {}
    for path in breakdown_files:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        b = AccuracyBreakdown.from_json(data)
        breakdowns[b.model_id] = b

    agreements: dict[tuple[str, str], AgreementReport] = {}
    for path in agreement_files:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        report = _AR(
            model_id=data["model_id"],
            axis=PerturbationAxis(data["axis"]),
            per_fact=data["per_fact"],
        )
        agreements[(report.model_id, report.axis.value)] = report

    model_ids = sorted(
        {b for b in breakdowns} | {m for m, _ in agreements}
    )
    rows = []
    for model_id in model_ids:
        spec = model_specs.get(model_id)
        rows.append(
            ModelRow(
                model_id=model_id,
                release_year=spec.release_year if spec else 0,
                breakdown=breakdowns.get(model_id),
                subject_agreement=agreements.get((model_id, "subject")),
                property_agreement=agreements.get((model_id, "property")),
            )
        )
    return rows
