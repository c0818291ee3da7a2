"""Command-line pipeline orchestration.

Subcommands compose the library modules end to end: ingest a benchmark
definition into a snapshot, evaluate or consistency-check a model (fully
offline in replay mode), score update interventions, annotate a corpus, and
emit report files. Exit codes: 0 success, 1 validation failure, 2 transport
failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import annotate as ann
from . import facts, gateway, metrics, prompts, reporting, wikidata
from .adjudicate import assess_fact, classify, verdict_dump_row


def _run_id(explicit: str | None) -> str:
    if explicit:
        return explicit
    return "run-" + datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S")


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def cmd_ingest(args: argparse.Namespace) -> int:
    rows = json.loads(Path(args.definition).read_text(encoding="utf-8"))
    if not rows:
        print("error: benchmark definition is empty", file=sys.stderr)
        return 1
    client = wikidata.WikidataClient(cache_dir=args.cache, offline=args.offline)
    records = []
    rejected = []
    warnings: list[str] = []
    for row in rows:
        sink: list[str] = []
        try:
            record = client.build_fact_record(
                subject_qid=row["subject_qid"],
                property_id=row["property_id"],
                property_name=row.get("property_name", row["property_id"]),
                category=facts.Category(row["category"]),
                exclusions=row.get("exclusions", ()),
                official_title=row.get("official_title"),
                fact_id=row.get("fact_id"),
                warnings=sink,
            )
            records.append(record)
        except (wikidata.HttpError, OSError) as exc:
            rejected.append({"row": row, "reason": f"transport: {exc}"})
        except (ValueError, KeyError) as exc:
            rejected.append({"row": row, "reason": str(exc)})
        warnings.extend(sink)

    report = {
        "accepted": len(records),
        "rejected": rejected,
        "warnings": warnings,
    }
    if args.report:
        _write_json(Path(args.report), report)
    if not records:
        print(f"error: all {len(rows)} rows rejected", file=sys.stderr)
        for item in rejected:
            print(f"  - {item['reason']}", file=sys.stderr)
        return 1

    snapshot = facts.BenchmarkSnapshot(
        snapshot_id=args.snapshot_id or facts.new_snapshot_id(),
        fetched_at=datetime.now(timezone.utc),
        records=tuple(records),
        provenance=f"wikidata entity-data API via cache {args.cache}",
    )
    facts.save_snapshot(snapshot, args.out)
    print(
        f"snapshot {snapshot.snapshot_id}: {len(records)} records "
        f"(content hash {snapshot.content_hash()[:12]}), "
        f"{len(rejected)} rejected, {len(warnings)} warnings"
    )
    for item in rejected:
        print(f"rejected: {item['reason']}", file=sys.stderr)
    return 0 if not rejected else 1


def _render_variants(
    snapshot: facts.BenchmarkSnapshot,
    axis: prompts.PerturbationAxis,
    template_file: str,
    perturbation_file: str | None,
    base_variant: int,
    spec: gateway.ModelSpec,
):
    """Per-fact prompt triples; render failures come back as error strings."""
    templates = prompts.load_templates(template_file)
    perturbation_sets = (
        prompts.load_perturbations(perturbation_file) if perturbation_file else {}
    )
    rendered: dict[str, list[prompts.PromptVariant]] = {}
    errors: dict[str, str] = {}
    for record in snapshot.records:
        try:
            if axis is prompts.PerturbationAxis.PROPERTY:
                variants = prompts.render_property_variants(record, templates)
            else:
                base = [
                    t
                    for t in templates
                    if t.category is record.category
                    and t.property_id == record.property_id
                    and t.variant_index == base_variant
                ]
                if not base:
                    raise prompts.MissingTemplateError(
                        f"no base template (variant {base_variant}) for "
                        f"({record.category.value}, {record.property_id})"
                    )
                perturbation = prompts.perturbations_for(record, perturbation_sets)
                variants = prompts.render_subject_variants(record, base[0], perturbation)
            if spec.needs_instruction_prefix:
                variants = [prompts.apply_instruction_prefix(v) for v in variants]
            rendered[record.fact_id] = variants
        except (ValueError, LookupError) as exc:
            errors[record.fact_id] = str(exc)
    return rendered, errors


def _query_all(
    spec: gateway.ModelSpec,
    rendered: dict[str, list[prompts.PromptVariant]],
    replay: str | None,
    transcript: str | None,
    parallelism: int,
):
    gw = gateway.open_gateway(spec, replay=replay, transcript=transcript)
    flat = [v for variants in rendered.values() for v in variants]
    results = gateway.query_batch(gw, spec, flat, parallelism=parallelism)
    by_fact: dict[str, list] = {}
    for result in results:
        by_fact.setdefault(result.fact_id, []).append(result)
    return by_fact


def _manifest(args, command: str, snapshot: facts.BenchmarkSnapshot, spec) -> reporting.RunManifest:
    hashes = {}
    for attr in ("snapshot", "templates", "perturbations", "replay", "models"):
        path = getattr(args, attr, None)
        if path:
            hashes[str(path)] = reporting.file_sha256(path)
    return reporting.RunManifest(
        run_id=_run_id(getattr(args, "run_id", None)),
        command=command,
        snapshot_id=snapshot.snapshot_id,
        model_ids=(spec.model_id,),
        input_hashes=hashes,
        decoding_params={
            "temperature": spec.temperature,
            "max_output_tokens": spec.max_output_tokens,
            "instruction_prefix": spec.needs_instruction_prefix,
        },
    )


def cmd_evaluate(args: argparse.Namespace) -> int:
    snapshot = facts.load_snapshot(args.snapshot)
    specs = gateway.load_model_specs(args.models)
    if args.model not in specs:
        print(f"error: model {args.model} not in {args.models}", file=sys.stderr)
        return 1
    spec = specs[args.model]
    axis = prompts.PerturbationAxis(args.axis)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    rendered, render_errors = _render_variants(
        snapshot, axis, args.templates, args.perturbations, args.base_variant, spec
    )
    by_fact = _query_all(spec, rendered, args.replay, args.transcript, args.parallelism)

    assessments = []
    dump_rows = []
    fact_errors: dict[str, str] = dict(render_errors)
    for fact_id, results in by_fact.items():
        record = snapshot.record_by_id(fact_id)
        failures = gateway.batch_failures(results)
        if failures:
            fact_errors[fact_id] = "; ".join(f.error for f in failures)
            continue
        answers = sorted(results, key=lambda a: a.variant_index)
        verdicts = [classify(a, record) for a in answers]
        for answer, verdict in zip(answers, verdicts):
            dump_rows.append(verdict_dump_row(answer, verdict))
        assessments.append(assess_fact(fact_id, spec.model_id, verdicts))

    with (out_dir / "verdicts.jsonl").open("w", encoding="utf-8") as handle:
        for row in dump_rows:
            handle.write(json.dumps(row, sort_keys=True) + "\n")
    _write_json(
        out_dir / "aggregates.json",
        {a.fact_id: a.aggregate.value for a in assessments},
    )
    if fact_errors:
        _write_json(out_dir / "errors.json", fact_errors)

    manifest = _manifest(args, "evaluate", snapshot, spec)
    manifest.write(out_dir / "manifest.json")

    if not assessments:
        print("error: no facts produced answers", file=sys.stderr)
        return 2 if not render_errors else 1

    breakdown = metrics.accuracy_breakdown(assessments)
    _write_json(out_dir / "breakdown.json", breakdown.to_json())

    if args.emit_targets:
        targets = metrics.select_outdated(assessments, snapshot)
        # Edit targets always carry the property-axis question and paraphrases.
        if axis is prompts.PerturbationAxis.PROPERTY:
            target_prompts = rendered
        else:
            target_prompts, _ = _render_variants(
                snapshot,
                prompts.PerturbationAxis.PROPERTY,
                args.templates,
                None,
                args.base_variant,
                gateway.ModelSpec(model_id=spec.model_id, endpoint="replay:unused"),
            )
        metrics.write_edit_targets(args.emit_targets, targets, snapshot, target_prompts)
        print(f"edit targets: {len(targets)} -> {args.emit_targets}")

    print(
        f"{spec.model_id} on {breakdown.n_facts} facts: "
        f"C {breakdown.correct_pct}% / O {breakdown.outdated_pct}% / "
        f"I {breakdown.irrelevant_pct}%"
        + (f" ({len(fact_errors)} facts flagged)" if fact_errors else "")
    )
    return 0


def cmd_consistency(args: argparse.Namespace) -> int:
    snapshot = facts.load_snapshot(args.snapshot)
    specs = gateway.load_model_specs(args.models)
    if args.model not in specs:
        print(f"error: model {args.model} not in {args.models}", file=sys.stderr)
        return 1
    spec = specs[args.model]
    axis = prompts.PerturbationAxis(args.axis)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    rendered, render_errors = _render_variants(
        snapshot, axis, args.templates, args.perturbations, args.base_variant, spec
    )
    by_fact = _query_all(spec, rendered, args.replay, args.transcript, args.parallelism)

    groups = []
    fact_errors: dict[str, str] = dict(render_errors)
    for fact_id, results in by_fact.items():
        failures = gateway.batch_failures(results)
        if failures:
            fact_errors[fact_id] = "; ".join(f.error for f in failures)
            continue
        answers = sorted(results, key=lambda a: a.variant_index)
        groups.append((snapshot.record_by_id(fact_id), answers))

    if fact_errors:
        _write_json(out_dir / "errors.json", fact_errors)
    manifest = _manifest(args, "consistency", snapshot, spec)
    manifest.write(out_dir / "manifest.json")

    if not groups:
        print("error: no facts produced answers", file=sys.stderr)
        return 2

    report = metrics.prompt_agreement(groups, axis)
    _write_json(out_dir / f"agreement-{axis.value}.json", report.to_json())
    print(
        f"{spec.model_id} {axis.value} agreement: "
        f"{report.agreement_pct_display}% "
        f"({report.n_agree}/{report.n_facts} facts)"
        + (f" ({len(fact_errors)} facts flagged)" if fact_errors else "")
    )
    return 0


def cmd_edit_eval(args: argparse.Namespace) -> int:
    snapshot = facts.load_snapshot(args.snapshot)
    target_rows = metrics.load_edit_targets(args.targets)
    if not target_rows:
        print("error: no edit targets", file=sys.stderr)
        return 1
    targets = []
    for row in target_rows:
        record = snapshot.record_by_id(row["fact_id"])
        targets.append(
            metrics.EditTarget(
                fact_id=row["fact_id"],
                current_values=tuple(facts.current_values(record)),
            )
        )

    original: dict[str, str] = {}
    paraphrases: dict[str, list[str]] = {}
    with Path(args.post).open(encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            if row["variant_index"] == 1:
                original[row["fact_id"]] = row["raw_text"]
            else:
                paraphrases.setdefault(row["fact_id"], []).append(row["raw_text"])

    try:
        result = metrics.evaluate_intervention(
            model_id=args.model,
            method_name=args.method,
            targets=targets,
            snapshot=snapshot,
            original_answers=original,
            paraphrase_answers=paraphrases,
        )
    except metrics.MissingAnswerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / f"edit-eval-{args.method}.json", result.to_json())
    print(
        f"{args.model}/{args.method} on {result.n_targets} targets: "
        f"efficacy {result.efficacy:.3f}, paraphrase {result.paraphrase:.3f}, "
        f"harmonic mean {result.harmonic_mean:.3f}"
    )
    return 0


_SCENARIOS_NEEDING_NE_SPANS = {
    ann.ScenarioKind.NE_ALL,
    ann.ScenarioKind.NE_SELECTED,
    ann.ScenarioKind.ID_PLUS_NE_SELECTED,
}


def cmd_annotate(args: argparse.Namespace) -> int:
    kind = ann.ScenarioKind(args.scenario)
    corpus = ann.read_corpus(args.corpus)
    registry = ann.load_registry(args.registry)
    docs = corpus if args.no_selection else ann.select_documents(corpus, registry)

    ne_spans: list[ann.EntitySpan] = []
    if args.spans:
        ne_spans = ann.read_spans(args.spans)
    elif kind in _SCENARIOS_NEEDING_NE_SPANS:
        print(f"error: scenario {kind.value} requires --spans", file=sys.stderr)
        return 1

    selected = None
    if kind in (ann.ScenarioKind.NE_SELECTED, ann.ScenarioKind.ID_PLUS_NE_SELECTED):
        if not ne_spans:
            print("error: no spans to compute frequency selection", file=sys.stderr)
            return 1
        selected = ann.frequency_select(ne_spans, args.fraction, basis=args.selection_basis)

    roots = ann.load_alias_roots(args.roots) if args.roots else None
    if kind is ann.ScenarioKind.NORMALIZED and roots is None:
        print("error: scenario normalized requires --roots", file=sys.stderr)
        return 1

    scenario = ann.TagScenario(
        kind=kind,
        frequency_fraction=args.fraction,
        selected_surfaces=selected,
        subject_registry=registry,
        alias_root_map=roots,
    )

    needs_gazetteer = kind in (
        ann.ScenarioKind.ID_SUBJECT,
        ann.ScenarioKind.ID_PLUS_NE_SELECTED,
        ann.ScenarioKind.NORMALIZED,
    )

    annotated: list[ann.AnnotatedDoc] = []
    skipped: list[dict] = []
    tagged_total = 0
    tagged_surfaces: set[str] = set()
    for doc in docs:
        spans = list(s for s in ne_spans if s.doc_id == doc.doc_id)
        if needs_gazetteer:
            spans.extend(ann.gazetteer_spans(doc, registry))
        spans = ann.resolve_overlaps(spans)
        try:
            if kind is ann.ScenarioKind.NORMALIZED:
                subject_spans = [
                    s for s in spans if registry.subject_for_span(s) is not None
                ]
                result = ann.normalize_entities(doc, subject_spans, roots)
            else:
                result = ann.annotate(doc, spans, scenario)
                if ann.detag(result.text) != doc.body:
                    raise ann.MalformedTaggingError(
                        f"{doc.doc_id}: detag round-trip mismatch"
                    )
        except (ann.DelimiterCollisionError, ann.MissingRootError) as exc:
            skipped.append({"doc_id": doc.doc_id, "reason": str(exc)})
            continue
        annotated.append(result)
        tagged_total += result.tag_count
        if kind is not ann.ScenarioKind.NORMALIZED:
            tagged_surfaces.update(
                s.surface
                for s in spans
                if ann._tag_for_span(s, scenario) is not None
            )

    ann.write_annotated(args.out, annotated)
    stats = {
        "scenario": kind.value,
        "docs_total": len(corpus),
        "docs_selected": len(docs),
        "docs_annotated": len(annotated),
        "docs_skipped": skipped,
        "tagged_entities": tagged_total,
        "tagged_surface_vocabulary": len(tagged_surfaces),
        "selected_set_size": len(selected) if selected is not None else None,
    }
    if args.stats:
        _write_json(Path(args.stats), stats)
    print(
        f"annotate {kind.value}: {len(annotated)}/{len(docs)} docs, "
        f"{tagged_total} tagged entities, vocabulary {len(tagged_surfaces)}"
        + (f", {len(skipped)} skipped" if skipped else "")
    )
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    specs = gateway.load_model_specs(args.models) if args.models else {}
    rows = reporting.rows_from_files(
        specs,
        breakdown_files=args.breakdowns or (),
        agreement_files=args.agreements or (),
    )
    run_id = _run_id(args.run_id)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    emitted = []
    if args.format == "md":
        if any(r.breakdown for r in rows):
            path = out_dir / "breakdown.md"
            path.write_text(reporting.breakdown_markdown(rows, run_id), encoding="utf-8")
            emitted.append(path)
        if any(r.subject_agreement or r.property_agreement for r in rows):
            path = out_dir / "agreement.md"
            path.write_text(reporting.agreement_markdown(rows, run_id), encoding="utf-8")
            emitted.append(path)
    elif args.format == "csv":
        path = out_dir / "breakdown.csv"
        path.write_text(reporting.breakdown_csv(rows, run_id), encoding="utf-8")
        emitted.append(path)
    else:
        path = out_dir / "agreement_scatter.csv"
        path.write_text(reporting.scatter_data(rows, run_id), encoding="utf-8")
        emitted.append(path)
    for path in emitted:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="factkit",
        description="Dynamic fact benchmarking, adjudication, and corpus annotation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="build a snapshot from a benchmark definition")
    p.add_argument("--def", dest="definition", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--cache", default="wikidata-cache")
    p.add_argument("--offline", action="store_true")
    p.add_argument("--report", help="write the validation report JSON here")
    p.add_argument("--snapshot-id")
    p.set_defaults(func=cmd_ingest)

    for name, func in (("evaluate", cmd_evaluate), ("consistency", cmd_consistency)):
        p = sub.add_parser(name)
        p.add_argument("--snapshot", required=True)
        p.add_argument("--model", required=True)
        p.add_argument("--models", required=True, help="model spec JSON file")
        p.add_argument("--axis", choices=["subject", "property"], required=True)
        p.add_argument("--replay", help="replay transcript file (offline run)")
        p.add_argument("--transcript", help="append live exchanges here")
        p.add_argument("--templates", required=True)
        p.add_argument("--perturbations")
        p.add_argument("--base-variant", type=int, default=1,
                       help="property-template variant used for subject perturbations")
        p.add_argument("--parallelism", type=int, default=1)
        p.add_argument("--out", required=True)
        p.add_argument("--run-id")
        if name == "evaluate":
            p.add_argument("--emit-targets", help="write outdated-fact edit targets here")
        p.set_defaults(func=func)

    p = sub.add_parser("edit-eval", help="score an update intervention's answers")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--targets", required=True)
    p.add_argument("--post", required=True, help="post-intervention answers JSONL")
    p.add_argument("--model", required=True)
    p.add_argument("--method", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_edit_eval)

    p = sub.add_parser("annotate", help="rewrite a corpus under a tagging scenario")
    p.add_argument("--corpus", required=True)
    p.add_argument(
        "--scenario",
        choices=[k.value for k in ann.ScenarioKind],
        required=True,
    )
    p.add_argument("--registry", required=True, help="subject registry JSON file")
    p.add_argument("--spans", help="NE spans JSONL (from the NER adapter)")
    p.add_argument("--roots", help="alias -> root form JSON (normalized scenario)")
    p.add_argument("--fraction", type=float, default=ann.DEFAULT_FREQUENCY_FRACTION)
    p.add_argument("--selection-basis", choices=["surfaces", "mentions"],
                   default="surfaces",
                   help="population the frequency cut is taken over")
    p.add_argument("--no-selection", action="store_true",
                   help="annotate every document, skipping relevance selection")
    p.add_argument("--out", required=True)
    p.add_argument("--stats", help="write annotation statistics JSON here")
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("report", help="emit report files from result JSONs")
    p.add_argument("--format", choices=["md", "csv", "scatter"], required=True)
    p.add_argument("--breakdowns", nargs="*")
    p.add_argument("--agreements", nargs="*")
    p.add_argument("--models")
    p.add_argument("--out", required=True)
    p.add_argument("--run-id")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (wikidata.HttpError, gateway.TransportError) as exc:
        print(f"transport failure: {exc}", file=sys.stderr)
        return 2
    except (facts.SchemaError, ValueError, LookupError, OSError) as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
