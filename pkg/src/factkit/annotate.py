"""Entity-aware corpus annotation.

Selects documents that are actually about the tracked subjects, then
rewrites each document under one of five structured entity representations:

  ne-all       every detected named-entity span tagged with its NE category
  ne-selected  only the top-frequency surface forms tagged with NE categories
  normalized   subject aliases replaced by a root form (no tags inserted)
  id           subject spans tagged with a per-subject identifier
  id+ne        subject spans get identifier tags, frequent non-subject
               spans get NE category tags

Tagged chunks use start/end delimiters, ``<TAG> chunk </>``, and for every
tagging scenario removing the delimiters must reproduce the source text
byte-exactly. All span offsets are byte offsets into the UTF-8 body.
"""
from __future__ import annotations

import json
import math
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .facts import EntityRef

MENTION_THRESHOLD = 5
DEFAULT_FREQUENCY_FRACTION = 0.015

# Anything in a body that already looks like a delimiter makes tagging
# ambiguous; such documents are skipped, never escaped.
_COLLISION_RE = re.compile(r"</>|<[A-Za-z0-9_]+>")
_OPEN_RE = re.compile(r"<([A-Za-z0-9_]+)> ")
_TOKEN_RE = re.compile(r"\w+", re.UNICODE)


class DelimiterCollisionError(ValueError):
    """The document body already contains text matching the tag grammar."""


class MalformedTaggingError(ValueError):
    """Delimiters in an annotated text are unbalanced or nested."""


class MissingRootError(LookupError):
    """A subject alias has no root form registered."""


class EmptyTagError(ValueError):
    """A subject label contains nothing usable for an identifier tag."""


class ScenarioKind(str, Enum):
    NE_ALL = "ne-all"
    NE_SELECTED = "ne-selected"
    NORMALIZED = "normalized"
    ID_SUBJECT = "id"
    ID_PLUS_NE_SELECTED = "id+ne"


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str
    body: str
    category: str | None = None


@dataclass(frozen=True)
class EntitySpan:
    """A mention with byte offsets into the document body."""

    doc_id: str
    start: int
    end: int
    surface: str
    label: str
    qid: str | None = None

    def __post_init__(self) -> None:
        if not (0 <= self.start < self.end):
            raise ValueError(
                f"{self.doc_id}: invalid span offsets {self.start}..{self.end}"
            )

    def check_against(self, body_bytes: bytes) -> None:
        if self.end > len(body_bytes):
            raise ValueError(
                f"{self.doc_id}: span {self.start}..{self.end} beyond body "
                f"({len(body_bytes)} bytes)"
            )
        if body_bytes[self.start : self.end] != self.surface.encode("utf-8"):
            raise ValueError(
                f"{self.doc_id}: span {self.start}..{self.end} does not slice "
                f"to {self.surface!r}"
            )


@dataclass(frozen=True)
class AnnotatedDoc:
    doc_id: str
    scenario: ScenarioKind
    text: str
    tag_count: int


class SubjectRegistry:
    """Tracked subjects with an alias -> subject lookup."""

    def __init__(self, subjects: Sequence[EntityRef]):
        self.subjects = tuple(subjects)
        self.by_qid: dict[str, EntityRef] = {}
        self.alias_map: dict[str, EntityRef] = {}
        for subject in self.subjects:
            if subject.qid in self.by_qid:
                raise ValueError(f"duplicate subject {subject.qid}")
            self.by_qid[subject.qid] = subject
            for surface in subject.surfaces():
                owner = self.alias_map.get(surface)
                if owner is not None and owner.qid != subject.qid:
                    raise ValueError(
                        f"alias {surface!r} claimed by both {owner.qid} and {subject.qid}"
                    )
                self.alias_map[surface] = subject

    def __len__(self) -> int:
        return len(self.subjects)

    def subject_for_span(self, span: EntitySpan) -> EntityRef | None:
        if span.qid is not None:
            return self.by_qid.get(span.qid)
        return self.alias_map.get(span.surface)


def load_registry(path: str | Path) -> SubjectRegistry:
    """Registry file: a JSON array of {qid, label, aliases[]}."""
    rows = json.loads(Path(path).read_text(encoding="utf-8"))
    return SubjectRegistry(
        [
            EntityRef(
                qid=row["qid"], label=row["label"], aliases=tuple(row.get("aliases", ()))
            )
            for row in rows
        ]
    )


@dataclass(frozen=True)
class TagScenario:
    """One entity-representation scheme plus the data it needs."""

    kind: ScenarioKind
    frequency_fraction: float = DEFAULT_FREQUENCY_FRACTION
    selected_surfaces: frozenset[str] | None = None
    subject_registry: SubjectRegistry | None = None
    alias_root_map: Mapping[str, str] | None = None

    def __post_init__(self) -> None:
        if not 0 < self.frequency_fraction <= 1:
            raise ValueError("frequency_fraction must be in (0, 1]")
        needs_selection = self.kind in (
            ScenarioKind.NE_SELECTED,
            ScenarioKind.ID_PLUS_NE_SELECTED,
        )
        if needs_selection and self.selected_surfaces is None:
            raise ValueError(f"{self.kind.value}: selected_surfaces required")
        needs_registry = self.kind in (
            ScenarioKind.ID_SUBJECT,
            ScenarioKind.ID_PLUS_NE_SELECTED,
            ScenarioKind.NORMALIZED,
        )
        if needs_registry and self.subject_registry is None:
            raise ValueError(f"{self.kind.value}: subject_registry required")
        if self.kind is ScenarioKind.NORMALIZED and self.alias_root_map is None:
            raise ValueError("normalized: alias_root_map required")


def _fold_ascii_alnum(text: str) -> str:
    decomposed = unicodedata.normalize("NFKD", text)
    stripped = "".join(ch for ch in decomposed if unicodedata.category(ch) != "Mn")
    return "".join(ch for ch in stripped if ch.isascii() and ch.isalnum())


def make_id_tag(subject: EntityRef) -> str:
    """Identifier tag for a subject: name parts stripped to alphanumerics and
    concatenated, e.g. ``<CristianoRonaldo>``."""
    parts = [_fold_ascii_alnum(part) for part in subject.label.split()]
    joined = "".join(parts)
    if not joined:
        raise EmptyTagError(f"{subject.qid}: label {subject.label!r} yields no tag")
    return f"<{joined}>"


def sanitize_tag(label: str) -> str:
    """Coerce an NE category label into the tag grammar ``[A-Za-z0-9_]+``."""
    tag = re.sub(r"[^A-Za-z0-9_]", "_", label.strip())
    if not tag.strip("_"):
        raise EmptyTagError(f"label {label!r} yields no usable tag")
    return tag


def _boundary_pattern(alias: str, ignore_case: bool = False) -> re.Pattern:
    flags = re.IGNORECASE if ignore_case else 0
    return re.compile(rf"(?<!\w){re.escape(alias)}(?!\w)", flags)


def count_alias_mentions(text: str, alias: str) -> int:
    """Case-sensitive mention count.

    Aliases of four or more characters match at token boundaries; shorter,
    acronym-like aliases must equal a whole token exactly.
    """
    if not alias:
        return 0
    if len(alias) >= 4:
        return len(_boundary_pattern(alias).findall(text))
    return sum(1 for token in _TOKEN_RE.findall(text) if token == alias)


def title_mentions_subject(title: str, registry: SubjectRegistry) -> bool:
    for alias in registry.alias_map:
        if _boundary_pattern(alias, ignore_case=True).search(title):
            return True
    return False


def select_documents(
    corpus: Iterable[Document], registry: SubjectRegistry
) -> list[Document]:
    """Keep a document when a subject appears in its title, or when one
    subject's aliases together account for at least five body mentions."""
    if not len(registry):
        raise ValueError("subject registry is empty")
    selected = []
    for doc in corpus:
        if title_mentions_subject(doc.title, registry):
            selected.append(doc)
            continue
        for subject in registry.subjects:
            total = sum(
                count_alias_mentions(doc.body, alias) for alias in subject.surfaces()
            )
            if total >= MENTION_THRESHOLD:
                selected.append(doc)
                break
    return selected


def _byte_offsets(body: str) -> list[int]:
    offsets = [0]
    total = 0
    for ch in body:
        total += len(ch.encode("utf-8"))
        offsets.append(total)
    return offsets


def gazetteer_spans(
    doc: Document, registry: SubjectRegistry, label: str = "PERS"
) -> list[EntitySpan]:
    """Subject-alias occurrences as byte-offset spans carrying the subject qid.

    This is the span source used when no external NE tagger output is
    available; overlapping alias hits are left for resolve_overlaps.
    """
    offsets = _byte_offsets(doc.body)
    spans: list[EntitySpan] = []
    token_spans = [(m.start(), m.end()) for m in _TOKEN_RE.finditer(doc.body)]
    for subject in registry.subjects:
        for alias in subject.surfaces():
            if not alias:
                continue
            if len(alias) >= 4:
                hits = [
                    (m.start(), m.end())
                    for m in _boundary_pattern(alias).finditer(doc.body)
                ]
            else:
                hits = [
                    (start, end)
                    for start, end in token_spans
                    if doc.body[start:end] == alias
                ]
            for char_start, char_end in hits:
                spans.append(
                    EntitySpan(
                        doc_id=doc.doc_id,
                        start=offsets[char_start],
                        end=offsets[char_end],
                        surface=doc.body[char_start:char_end],
                        label=label,
                        qid=subject.qid,
                    )
                )
    spans.sort(key=lambda s: (s.start, s.end))
    return spans


def frequency_select(
    spans: Sequence[EntitySpan], fraction: float, basis: str = "surfaces"
) -> frozenset[str]:
    """The most frequent ``ceil(fraction x N)`` surface forms.

    ``basis`` picks what N is: ``"surfaces"`` (default) counts distinct
    surface forms, ``"mentions"`` counts total mentions. Counting is over
    exact surface strings; ties break lexicographically so the selection is
    deterministic.
    """
    if not spans:
        raise ValueError("no spans to select from")
    if not 0 < fraction <= 1:
        raise ValueError("fraction must be in (0, 1]")
    counts = Counter(span.surface for span in spans)
    if basis == "surfaces":
        population = len(counts)
    elif basis == "mentions":
        population = len(spans)
    else:
        raise ValueError(f"unknown selection basis {basis!r}")
    keep = min(len(counts), math.ceil(fraction * population))
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return frozenset(surface for surface, _ in ranked[:keep])


def resolve_overlaps(spans: Sequence[EntitySpan]) -> list[EntitySpan]:
    """Drop overlapping spans: subject (qid-bearing) spans beat plain NE
    spans, longer spans beat shorter, earlier start wins. Output is sorted
    by start and guaranteed non-overlapping per document."""
    by_doc: dict[str, list[EntitySpan]] = {}
    for span in spans:
        by_doc.setdefault(span.doc_id, []).append(span)
    resolved: list[EntitySpan] = []
    for doc_id in sorted(by_doc):
        candidates = sorted(
            by_doc[doc_id],
            key=lambda s: (0 if s.qid else 1, -(s.end - s.start), s.start),
        )
        kept: list[EntitySpan] = []
        for span in candidates:
            if all(span.end <= other.start or span.start >= other.end for other in kept):
                kept.append(span)
        kept.sort(key=lambda s: s.start)
        resolved.extend(kept)
    return resolved


def check_delimiter_collision(body: str) -> None:
    match = _COLLISION_RE.search(body)
    if match:
        raise DelimiterCollisionError(
            f"body already contains delimiter-like text {match.group(0)!r}"
        )


def _tag_for_span(
    span: EntitySpan, scenario: TagScenario
) -> str | None:
    """The tag to wrap a span with under this scenario, or None to skip it."""
    kind = scenario.kind
    if kind is ScenarioKind.NE_ALL:
        return sanitize_tag(span.label)
    if kind is ScenarioKind.NE_SELECTED:
        if span.surface in scenario.selected_surfaces:
            return sanitize_tag(span.label)
        return None
    subject = scenario.subject_registry.subject_for_span(span)
    if kind is ScenarioKind.ID_SUBJECT:
        return make_id_tag(subject)[1:-1] if subject is not None else None
    if kind is ScenarioKind.ID_PLUS_NE_SELECTED:
        if subject is not None:
            return make_id_tag(subject)[1:-1]
        if span.surface in scenario.selected_surfaces:
            return sanitize_tag(span.label)
        return None
    raise ValueError(f"annotate does not handle scenario {kind.value}")


def _checked_doc_spans(
    doc: Document, spans: Sequence[EntitySpan]
) -> tuple[bytes, list[EntitySpan]]:
    body_bytes = doc.body.encode("utf-8")
    doc_spans = sorted(
        (s for s in spans if s.doc_id == doc.doc_id), key=lambda s: s.start
    )
    previous_end = 0
    for span in doc_spans:
        span.check_against(body_bytes)
        if span.start < previous_end:
            raise ValueError(
                f"{doc.doc_id}: overlapping spans; run resolve_overlaps first"
            )
        previous_end = span.end
    return body_bytes, doc_spans


def annotate(
    doc: Document, spans: Sequence[EntitySpan], scenario: TagScenario
) -> AnnotatedDoc:
    """Rewrite qualifying spans as ``<TAG> surface </>``.

    Replacements are applied right to left so earlier byte offsets stay
    valid. Raises DelimiterCollisionError when the body could not be
    detagged unambiguously afterwards.
    """
    if scenario.kind is ScenarioKind.NORMALIZED:
        raise ValueError("use normalize_entities for the normalized scenario")
    check_delimiter_collision(doc.body)
    body_bytes, doc_spans = _checked_doc_spans(doc, spans)

    out = bytearray(body_bytes)
    tag_count = 0
    for span in reversed(doc_spans):
        tag = _tag_for_span(span, scenario)
        if tag is None:
            continue
        replacement = b"<" + tag.encode("utf-8") + b"> " + span.surface.encode("utf-8") + b" </>"
        out[span.start : span.end] = replacement
        tag_count += 1
    return AnnotatedDoc(
        doc_id=doc.doc_id,
        scenario=scenario.kind,
        text=out.decode("utf-8"),
        tag_count=tag_count,
    )


def normalize_entities(
    doc: Document,
    spans: Sequence[EntitySpan],
    alias_root_map: Mapping[str, str],
) -> AnnotatedDoc:
    """Replace each subject-alias span with the subject's root form.

    No delimiters are inserted; the same alias is always replaced by the
    same root, so every mention of a subject ends up lexically identical.
    """
    body_bytes, doc_spans = _checked_doc_spans(doc, spans)
    out = bytearray(body_bytes)
    replaced = 0
    for span in reversed(doc_spans):
        if span.surface not in alias_root_map:
            raise MissingRootError(
                f"{doc.doc_id}: no root form for alias {span.surface!r}"
            )
        root = alias_root_map[span.surface]
        if root != span.surface:
            out[span.start : span.end] = root.encode("utf-8")
            replaced += 1
    return AnnotatedDoc(
        doc_id=doc.doc_id,
        scenario=ScenarioKind.NORMALIZED,
        text=out.decode("utf-8"),
        tag_count=replaced,
    )


def detag(annotated_text: str) -> str:
    """Strip every ``<TAG> `` prefix and `` </>`` suffix, recovering the
    source text byte-exactly. Raises MalformedTaggingError on unbalanced or
    nested delimiters."""
    out: list[str] = []
    position = 0
    inside = False
    token_re = re.compile(r"<([A-Za-z0-9_]+)> | </>")
    for match in token_re.finditer(annotated_text):
        chunk = annotated_text[position : match.start()]
        is_open = match.group(0) != " </>"
        if is_open:
            if inside:
                raise MalformedTaggingError(
                    f"nested open delimiter at byte {match.start()}"
                )
            out.append(chunk)
            inside = True
        else:
            if not inside:
                raise MalformedTaggingError(
                    f"close delimiter without open at byte {match.start()}"
                )
            if "<" in chunk:
                raise MalformedTaggingError(
                    f"stray '<' inside tagged chunk at byte {position}"
                )
            out.append(chunk)
            inside = False
        position = match.end()
    if inside:
        raise MalformedTaggingError("unclosed open delimiter at end of text")
    out.append(annotated_text[position:])
    return "".join(out)


def read_corpus(path: str | Path) -> list[Document]:
    """Corpus file: line-delimited JSON {doc_id, title, text, category?}."""
    docs = []
    seen: set[str] = set()
    with Path(path).open(encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            if row["doc_id"] in seen:
                raise ValueError(f"duplicate doc_id {row['doc_id']}")
            seen.add(row["doc_id"])
            docs.append(
                Document(
                    doc_id=row["doc_id"],
                    title=row.get("title", ""),
                    body=row["text"],
                    category=row.get("category"),
                )
            )
    return docs


def read_spans(path: str | Path) -> list[EntitySpan]:
    """Span file: line-delimited JSON {doc_id, start, end, surface, label, qid?}."""
    spans = []
    with Path(path).open(encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            spans.append(
                EntitySpan(
                    doc_id=row["doc_id"],
                    start=row["start"],
                    end=row["end"],
                    surface=row["surface"],
                    label=row["label"],
                    qid=row.get("qid"),
                )
            )
    return spans


def write_annotated(path: str | Path, docs: Iterable[AnnotatedDoc]) -> None:
    with Path(path).open("w", encoding="utf-8") as handle:
        for doc in docs:
            row = {"doc_id": doc.doc_id, "scenario": doc.scenario.value, "text": doc.text}
            handle.write(json.dumps(row, sort_keys=True) + "\n")


def load_alias_roots(path: str | Path) -> dict[str, str]:
    """Roots file: either {alias: root} or a JSON array of {alias, root}."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(raw, dict):
        return dict(raw)
    return {row["alias"]: row["root"] for row in raw}
