"""Temporal fact data model and versioned benchmark snapshots.

A fact is a subject entity plus a property whose attribute values carry
start/end validity dates. The snapshot pins the full claim history so a
run can be re-scored offline long after the knowledge base moved on.
"""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
SCHEMA_VERSION = 1

_QID_RE = re.compile(r"^Q[0-9]+$")
_PID_RE = re.compile(r"^P[0-9]+$")


class SchemaError(ValueError):
    """A snapshot file or record violates the snapshot schema."""


class EmptyCurrentSetError(ValueError):
    """No claim qualifies as a current value for the record."""


class Category(str, Enum):
    COUNTRY = "country"
    ATHLETE = "athlete"
    ORGANIZATION = "organization"


class Rank(str, Enum):
    PREFERRED = "preferred"
    NORMAL = "normal"
    DEPRECATED = "deprecated"


class TimePrecision(str, Enum):
    YEAR = "year"
    MONTH = "month"
    DAY = "day"


def is_qid(value: str) -> bool:
    return isinstance(value, str) and bool(_QID_RE.match(value))


def is_pid(value: str) -> bool:
    return isinstance(value, str) and bool(_PID_RE.match(value))


@dataclass(frozen=True)
class EntityRef:
    """A knowledge-base item with its canonical label and alternative surface forms."""

    qid: str
    label: str
    aliases: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not is_qid(self.qid):
            raise ValueError(f"invalid item id {self.qid!r} (expected Q + digits)")
        if not self.label:
            raise ValueError(f"{self.qid}: label must be non-empty")
        object.__setattr__(self, "aliases", tuple(self.aliases))
        seen = set()
        for alias in self.aliases:
            if not alias:
                raise ValueError(f"{self.qid}: empty alias")
            if alias == self.label or alias in seen:
                raise ValueError(f"{self.qid}: duplicate alias {alias!r}")
            seen.add(alias)

    def surfaces(self) -> tuple[str, ...]:
        """Label first, then aliases."""
        return (self.label,) + self.aliases


@dataclass(frozen=True, eq=True)
class TimePoint:
    """A calendar instant at year, month, or day precision.

    Ordering compares year, then month, then day, with an absent component
    sorting earliest; that makes the ordering total across precisions.
    """

    year: int
    month: int | None = None
    day: int | None = None
    precision: TimePrecision | None = None

    def __post_init__(self) -> None:
        if self.month is not None and not 1 <= self.month <= 12:
            raise ValueError(f"month {self.month} out of range")
        if self.day is not None and not 1 <= self.day <= 31:
            raise ValueError(f"day {self.day} out of range")
        if self.day is not None and self.month is None:
            raise ValueError("day requires month")
        derived = (
            TimePrecision.DAY
            if self.day is not None
            else TimePrecision.MONTH
            if self.month is not None
            else TimePrecision.YEAR
        )
        if self.precision is None:
            object.__setattr__(self, "precision", derived)
        elif self.precision != derived:
            raise ValueError(
                f"precision {self.precision.value} inconsistent with populated fields"
            )

    def sort_key(self) -> tuple[int, int, int]:
        return (self.year, self.month or 0, self.day or 0)

    def __lt__(self, other: "TimePoint") -> bool:
        return self.sort_key() < other.sort_key()

    def __le__(self, other: "TimePoint") -> bool:
        return self.sort_key() <= other.sort_key()

    def __gt__(self, other: "TimePoint") -> bool:
        return self.sort_key() > other.sort_key()

    def __ge__(self, other: "TimePoint") -> bool:
        return self.sort_key() >= other.sort_key()

    def to_json(self) -> dict:
        out: dict = {"year": self.year}
        if self.month is not None:
            out["month"] = self.month
        if self.day is not None:
            out["day"] = self.day
        out["precision"] = self.precision.value
        return out

    @classmethod
    def from_json(cls, data: dict) -> "TimePoint":
        return cls(
            year=data["year"],
            month=data.get("month"),
            day=data.get("day"),
            precision=TimePrecision(data["precision"]) if "precision" in data else None,
        )


@dataclass(frozen=True)
class TemporalClaim:
    """One attribute value with its validity window and endorsement rank."""

    property_id: str
    value: EntityRef
    start: TimePoint | None = None
    end: TimePoint | None = None
    rank: Rank = Rank.NORMAL

    def __post_init__(self) -> None:
        if not is_pid(self.property_id):
            raise ValueError(f"invalid property id {self.property_id!r}")
        if self.start is not None and self.end is not None and self.start > self.end:
            raise ValueError(
                f"{self.property_id}/{self.value.qid}: start after end"
            )

    def is_open(self) -> bool:
        return self.end is None

    def to_json(self) -> dict:
        return {
            "property": self.property_id,
            "value": _entity_to_json(self.value),
            "start": self.start.to_json() if self.start else None,
            "end": self.end.to_json() if self.end else None,
            "rank": self.rank.value,
        }

    @classmethod
    def from_json(cls, data: dict) -> "TemporalClaim":
        return cls(
            property_id=data["property"],
            value=_entity_from_json(data["value"]),
            start=TimePoint.from_json(data["start"]) if data.get("start") else None,
            end=TimePoint.from_json(data["end"]) if data.get("end") else None,
            rank=Rank(data["rank"]),
        )


def _claim_start_key(claim: TemporalClaim) -> tuple:
    # Start descending, absent start last; stable within ties.
    if claim.start is None:
        return (1, 0, 0, 0)
    y, m, d = claim.start.sort_key()
    return (0, -y, -m, -d)


@dataclass(frozen=True)
class FactRecord:
    """A subject + property with its full temporally qualified claim history.

    ``exclusions`` lists value qids that never count as current answers
    (e.g. national-team memberships on an athlete's club record).
    """

    fact_id: str
    subject: EntityRef
    property_id: str
    property_name: str
    category: Category
    claims: tuple[TemporalClaim, ...]
    exclusions: frozenset[str] = frozenset()
    official_title: str | None = None

    def __post_init__(self) -> None:
        if not self.fact_id:
            raise ValueError("fact_id must be non-empty")
        if not is_pid(self.property_id):
            raise ValueError(f"{self.fact_id}: invalid property id {self.property_id!r}")
        claims = tuple(sorted(self.claims, key=_claim_start_key))
        object.__setattr__(self, "claims", claims)
        object.__setattr__(self, "exclusions", frozenset(self.exclusions))
        if not any(c.rank is not Rank.DEPRECATED for c in claims):
            raise ValueError(f"{self.fact_id}: no non-deprecated claim")
        for claim in claims:
            if claim.property_id != self.property_id:
                raise ValueError(
                    f"{self.fact_id}: claim property {claim.property_id} "
                    f"!= record property {self.property_id}"
                )

    def to_json(self) -> dict:
        return {
            "fact_id": self.fact_id,
            "subject": _entity_to_json(self.subject),
            "property": self.property_id,
            "property_name": self.property_name,
            "category": self.category.value,
            "claims": [c.to_json() for c in self.claims],
            "exclusions": sorted(self.exclusions),
            "official_title": self.official_title,
        }

    @classmethod
    def from_json(cls, data: dict) -> "FactRecord":
        return cls(
            fact_id=data["fact_id"],
            subject=_entity_from_json(data["subject"]),
            property_id=data["property"],
            property_name=data["property_name"],
            category=Category(data["category"]),
            claims=tuple(TemporalClaim.from_json(c) for c in data["claims"]),
            exclusions=frozenset(data.get("exclusions", [])),
            official_title=data.get("official_title"),
        )


def _entity_to_json(ref: EntityRef) -> dict:
    return {"qid": ref.qid, "label": ref.label, "aliases": list(ref.aliases)}


def _entity_from_json(data: dict) -> EntityRef:
    return EntityRef(
        qid=data["qid"], label=data["label"], aliases=tuple(data.get("aliases", ()))
    )


def _current_claims_unfiltered(record: FactRecord) -> list[TemporalClaim]:
    preferred = [c for c in record.claims if c.rank is Rank.PREFERRED]
    if preferred:
        return preferred
    return [
        c for c in record.claims if c.rank is Rank.NORMAL and c.end is None
    ]


def current_value_claims(record: FactRecord) -> list[tuple[EntityRef, TemporalClaim]]:
    """Current (value, claim) pairs after the exclusion filter, deduped by qid.

    Preferred-rank claims, when present, are the current set regardless of
    end dates; otherwise every open-ended non-deprecated claim qualifies.
    Order follows the stored claim order (most recent start first).
    """
    pairs: list[tuple[EntityRef, TemporalClaim]] = []
    seen: set[str] = set()
    for claim in _current_claims_unfiltered(record):
        qid = claim.value.qid
        if qid in record.exclusions or qid in seen:
            continue
        seen.add(qid)
        pairs.append((claim.value, claim))
    return pairs


def current_values(record: FactRecord) -> list[EntityRef]:
    """Values a correct answer must name. Raises if nothing qualifies."""
    values = [value for value, _ in current_value_claims(record)]
    if not values:
        raise EmptyCurrentSetError(
            f"{record.fact_id}: no claim qualifies as a current value"
        )
    return values


def historical_value_claims(record: FactRecord) -> list[tuple[EntityRef, TemporalClaim]]:
    """Ended (value, claim) pairs that are not current, most recently ended first."""
    current_qids = {c.value.qid for c in _current_claims_unfiltered(record)}
    ended = [
        c
        for c in record.claims
        if c.rank is not Rank.DEPRECATED and c.end is not None
        and c.value.qid not in current_qids
    ]
    ended.sort(key=lambda c: c.end.sort_key(), reverse=True)
    pairs: list[tuple[EntityRef, TemporalClaim]] = []
    seen: set[str] = set()
    for claim in ended:
        if claim.value.qid in seen:
            continue
        seen.add(claim.value.qid)
        pairs.append((claim.value, claim))
    return pairs


def historical_values(record: FactRecord) -> list[EntityRef]:
    """Previously valid values, most recently ended first. May be empty."""
    return [value for value, _ in historical_value_claims(record)]


@dataclass(frozen=True)
class BenchmarkSnapshot:
    """An immutable, validated set of fact records pinned at fetch time."""

    snapshot_id: str
    fetched_at: datetime
    records: tuple[FactRecord, ...]
    provenance: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "records", tuple(self.records))
        if not self.records:
            raise SchemaError("snapshot has no records")
        if self.fetched_at.tzinfo is None:
            raise SchemaError("fetched_at must be timezone-aware")
        seen: set[str] = set()
        for record in self.records:
            if record.fact_id in seen:
                raise SchemaError(f"duplicate fact_id {record.fact_id}")
            seen.add(record.fact_id)
            try:
                current_values(record)
            except EmptyCurrentSetError as exc:
                raise SchemaError(f"record {record.fact_id}: {exc}") from exc

    def record_by_id(self, fact_id: str) -> FactRecord:
        for record in self.records:
            if record.fact_id == fact_id:
                return record
        raise KeyError(fact_id)

    def content_hash(self) -> str:
        """Hash of the record payload only; stable across re-ingests."""
        blob = json.dumps(
            [r.to_json() for r in self.records], sort_keys=True, separators=(",", ":")
        )
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _format_rfc3339(stamp: datetime) -> str:
    stamp = stamp.astimezone(timezone.utc).replace(microsecond=0)
    return stamp.strftime("%Y-%m-%dT%H:%M:%SZ")


def _parse_rfc3339(text: str) -> datetime:
    return datetime.fromisoformat(text.replace("Z", "+00:00"))


def save_snapshot(snapshot: BenchmarkSnapshot, path: str | Path) -> None:
    """Write the snapshot as a single JSON document with deterministic key order."""
    payload = {
        "schema_version": SCHEMA_VERSION,
        "snapshot_id": snapshot.snapshot_id,
        "fetched_at": _format_rfc3339(snapshot.fetched_at),
        "provenance": snapshot.provenance,
        "records": [r.to_json() for r in snapshot.records],
    }
    Path(path).write_text(
        json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def load_snapshot(path: str | Path) -> BenchmarkSnapshot:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON: {exc}") from exc
    version = raw.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError(
            f"{path}: schema_version {version!r} unsupported (expected {SCHEMA_VERSION})"
        )
    records = []
    for item in raw.get("records", []):
        fact_id = item.get("fact_id", "<missing fact_id>")
        try:
            records.append(FactRecord.from_json(item))
        except (ValueError, KeyError) as exc:
            raise SchemaError(f"record {fact_id}: {exc}") from exc
    try:
        return BenchmarkSnapshot(
            snapshot_id=raw["snapshot_id"],
            fetched_at=_parse_rfc3339(raw["fetched_at"]),
            records=tuple(records),
            provenance=raw.get("provenance", ""),
        )
    except KeyError as exc:
        raise SchemaError(f"{path}: missing field {exc}") from exc


def new_snapshot_id(now: datetime | None = None) -> str:
    """Unique per ingest; content equality is checked via content_hash instead."""
    now = now or datetime.now(timezone.utc)
    stamp = now.strftime("%Y%m%dT%H%M%S")
    suffix = hashlib.sha256(repr(now.timestamp()).encode()).hexdigest()[:8]
    return f"snap-{stamp}-{suffix}"
