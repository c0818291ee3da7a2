"""Knowledge-base client: fetch entity documents, parse temporally qualified
claims, and assemble fact records.

Every response body is cached on disk (``<qid>.<date>.json``) so a benchmark
built today can be rebuilt byte-for-byte offline tomorrow. Parsing never
touches the network and is testable on cached documents alone.
"""
from __future__ import annotations

import json
import logging
import re
import threading
import time as _time
from dataclasses import dataclass, replace
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Mapping, Protocol, Sequence

from .facts import (
    Category,
    EntityRef,
    FactRecord,
    Rank,
    TemporalClaim,
    TimePoint,
    current_values,
    is_pid,
    is_qid,
)

logger = logging.getLogger(__name__)

ENTITY_DATA_URL = "https://www.wikidata.org/wiki/Special:EntityData/{qid}.json"
API_URL = "https://www.wikidata.org/w/api.php"
USER_AGENT = "factkit/0.1 (time-sensitive fact benchmark builder)"

START_TIME_PID = "P580"
END_TIME_PID = "P582"

# Wikidata time precision codes: 9 = year, 10 = month, 11 = day.
_PRECISION_BY_CODE = {9: "year", 10: "month", 11: "day"}

_TIME_RE = re.compile(r"^([+-])(\d{1,16})-(\d{2})-(\d{2})T")


class HttpError(RuntimeError):
    """Transport failed after exhausting retries."""


class NotFoundError(HttpError):
    """The entity does not exist (HTTP 404 or a 'missing' API marker)."""


class RateLimitedError(HttpError):
    """Still throttled after honoring Retry-After across all retries."""


class PropertyAbsentError(ValueError):
    """The subject has no usable statements for the requested property."""


@dataclass(frozen=True)
class FetchPolicy:
    """Politeness contract shared by all workers using one client."""

    max_concurrent_requests: int = 2
    min_request_interval: float = 0.25
    max_retries: int = 3
    timeout: float = 30.0

    def __post_init__(self) -> None:
        if self.max_concurrent_requests < 1:
            raise ValueError("max_concurrent_requests must be positive")
        if self.min_request_interval < 0:
            raise ValueError("min_request_interval must be non-negative")
        if self.max_retries < 0:
            raise ValueError("max_retries must be non-negative")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")


@dataclass(frozen=True)
class TransportResponse:
    status: int
    body: bytes
    headers: Mapping[str, str] = None  # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.headers is None:
            object.__setattr__(self, "headers", {})


class Transport(Protocol):
    def get(self, url: str, *, timeout: float) -> TransportResponse: ...


class LiveTransport:
    """requests-backed transport; created lazily so offline use never imports it."""

    def __init__(self) -> None:
        import requests

        self._session = requests.Session()
        self._session.headers["User-Agent"] = USER_AGENT

    def get(self, url: str, *, timeout: float) -> TransportResponse:
        resp = self._session.get(url, timeout=timeout)
        return TransportResponse(
            status=resp.status_code, body=resp.content, headers=dict(resp.headers)
        )


class _RequestGate:
    """Caps in-flight requests and enforces a global minimum spacing."""

    def __init__(self, policy: FetchPolicy, clock=_time.monotonic, sleep=_time.sleep):
        self._semaphore = threading.Semaphore(policy.max_concurrent_requests)
        self._interval = policy.min_request_interval
        self._lock = threading.Lock()
        self._next_allowed = 0.0
        self._clock = clock
        self._sleep = sleep

    def __enter__(self):
        self._semaphore.acquire()
        with self._lock:
            now = self._clock()
            wait = self._next_allowed - now
            self._next_allowed = max(now, self._next_allowed) + self._interval
        if wait > 0:
            self._sleep(wait)
        return self

    def __exit__(self, *exc) -> None:
        self._semaphore.release()


@dataclass(frozen=True)
class RawEntityDocument:
    """A wire entity document, preserved verbatim for separately testable parsing."""

    qid: str
    raw: dict

    @property
    def entity(self) -> dict:
        return self.raw["entities"][self.qid]

    @property
    def labels(self) -> dict:
        return self.entity.get("labels", {})

    @property
    def aliases(self) -> dict:
        return self.entity.get("aliases", {})

    @property
    def claims(self) -> dict:
        return self.entity.get("claims", {})


@dataclass(frozen=True)
class ParseWarning:
    """A non-fatal oddity found while mapping wire statements to claims."""

    qid: str
    property_id: str
    statement_index: int
    reason: str

    def __str__(self) -> str:
        return (
            f"{self.qid}/{self.property_id}[{self.statement_index}]: {self.reason}"
        )


def parse_wikidata_time(value: dict) -> tuple[TimePoint | None, str | None]:
    """Map a wire time value to a TimePoint.

    Returns (point, warning). Precision coarser than year rounds to year and
    warns; an unparseable time string returns (None, reason).
    """
    text = value.get("time", "")
    match = _TIME_RE.match(text)
    if not match:
        return None, f"unparseable time string {text!r}"
    sign, year_s, month_s, day_s = match.groups()
    year = int(year_s) * (-1 if sign == "-" else 1)
    code = value.get("precision", 11)
    warning = None
    if code < 9:
        warning = f"precision code {code} coarser than year; rounded to year"
        code = 9
    precision = _PRECISION_BY_CODE.get(code, "day")
    month = int(month_s)
    day = int(day_s)
    try:
        if precision == "year":
            return TimePoint(year=year), warning
        if precision == "month":
            if month == 0:
                return None, "month precision with zero month"
            return TimePoint(year=year, month=month), warning
        if month == 0 or day == 0:
            return None, "day precision with zero month or day"
        return TimePoint(year=year, month=month, day=day), warning
    except ValueError as exc:
        return None, str(exc)


def _qualifier_time(
    statement: dict, pid: str
) -> tuple[TimePoint | None, str | None, bool]:
    """Extract a start/end qualifier; returns (point, warning, present)."""
    snaks = statement.get("qualifiers", {}).get(pid, [])
    if not snaks:
        return None, None, False
    datavalue = snaks[0].get("datavalue")
    if not datavalue or datavalue.get("type") != "time":
        # novalue/somevalue qualifiers carry no usable instant
        return None, "qualifier has no time value", True
    point, warning = parse_wikidata_time(datavalue.get("value", {}))
    return point, warning, True


def parse_temporal_claims(
    doc: RawEntityDocument, property_id: str
) -> tuple[list[TemporalClaim], list[ParseWarning]]:
    """Map wire statements for one property to temporal claims.

    Pure and deterministic. Statements with non-item values are skipped with
    a warning; a statement whose qualifiers cannot be parsed (or whose end
    precedes its start) is excluded the same way.
    """
    claims: list[TemporalClaim] = []
    warnings: list[ParseWarning] = []

    def warn(index: int, reason: str) -> None:
        warnings.append(ParseWarning(doc.qid, property_id, index, reason))

    for index, statement in enumerate(doc.claims.get(property_id, [])):
        mainsnak = statement.get("mainsnak", {})
        datavalue = mainsnak.get("datavalue")
        if mainsnak.get("snaktype") != "value" or not datavalue:
            warn(index, "statement has no value")
            continue
        if datavalue.get("type") != "wikibase-entityid":
            warn(index, f"non-item value of type {datavalue.get('type')!r} skipped")
            continue
        value_qid = datavalue.get("value", {}).get("id")
        if not value_qid or not is_qid(value_qid):
            warn(index, f"invalid value id {value_qid!r}")
            continue
        try:
            rank = Rank(statement.get("rank", "normal"))
        except ValueError:
            warn(index, f"unknown rank {statement.get('rank')!r}")
            continue

        start, start_warning, _ = _qualifier_time(statement, START_TIME_PID)
        end, end_warning, end_present = _qualifier_time(statement, END_TIME_PID)
        for qualifier_warning in (start_warning, end_warning):
            if qualifier_warning:
                warn(index, qualifier_warning)
        if end_present and end is None:
            # An end qualifier we could not read: treat the claim as unusable
            # rather than silently promoting it to current.
            warn(index, "end qualifier unreadable; claim excluded")
            continue

        try:
            claims.append(
                TemporalClaim(
                    property_id=property_id,
                    value=EntityRef(qid=value_qid, label=value_qid),
                    start=start,
                    end=end,
                    rank=rank,
                )
            )
        except ValueError as exc:
            warn(index, f"{exc}; claim excluded")
    return claims, warnings


def _ref_from_entity(qid: str, entity: dict) -> tuple[EntityRef, str | None]:
    """Label fallback: English, then the multilingual default, then the qid."""
    labels = entity.get("labels", {})
    warning = None
    if "en" in labels:
        label = labels["en"]["value"]
    elif "mul" in labels:
        label = labels["mul"]["value"]
    else:
        label = qid
        warning = f"{qid}: no English or default label; using qid as label"
    aliases: list[str] = []
    for item in entity.get("aliases", {}).get("en", []):
        alias = item.get("value", "")
        if alias and alias != label and alias not in aliases:
            aliases.append(alias)
    return EntityRef(qid=qid, label=label, aliases=tuple(aliases)), warning


class ResponseCache:
    """Directory of raw response bodies, one file per entity per fetch date.

    Entity documents live at ``<qid>.<date>.json``; label-only fragments
    saved from batched lookups live at ``<qid>.labels.<date>.json`` so a
    partial document can never masquerade as a full one. Readers may run
    concurrently; writes are serialized and atomic.
    """

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self._write_lock = threading.Lock()

    def _glob(self, qid: str, kind: str) -> list[Path]:
        infix = "" if kind == "entity" else ".labels"
        pattern = re.compile(
            rf"^{re.escape(qid)}{re.escape(infix)}\.(\d{{4}}-\d{{2}}-\d{{2}})\.json$"
        )
        if not self.directory.is_dir():
            return []
        hits = [p for p in self.directory.iterdir() if pattern.match(p.name)]
        return sorted(hits, key=lambda p: p.name)

    def read_latest(self, qid: str, kind: str = "entity") -> dict | None:
        hits = self._glob(qid, kind)
        if not hits:
            return None
        return json.loads(hits[-1].read_text(encoding="utf-8"))

    def read_for_date(self, qid: str, day: date, kind: str = "entity") -> dict | None:
        infix = "" if kind == "entity" else ".labels"
        path = self.directory / f"{qid}{infix}.{day.isoformat()}.json"
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def write(self, qid: str, day: date, body: bytes | dict, kind: str = "entity") -> Path:
        infix = "" if kind == "entity" else ".labels"
        path = self.directory / f"{qid}{infix}.{day.isoformat()}.json"
        data = body if isinstance(body, bytes) else json.dumps(body, sort_keys=True).encode()
        with self._write_lock:
            self.directory.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp")
            tmp.write_bytes(data)
            tmp.replace(path)
        return path


class WikidataClient:
    """Fetches and assembles fact records under a shared politeness gate.

    ``offline=True`` serves everything from the cache and raises HttpError on
    a miss instead of touching the network.
    """

    def __init__(
        self,
        cache_dir: str | Path,
        policy: FetchPolicy | None = None,
        transport: Transport | None = None,
        offline: bool = False,
        today: Callable[[], date] | None = None,
    ):
        self.policy = policy or FetchPolicy()
        self.cache = ResponseCache(cache_dir)
        self.offline = offline
        self._transport = transport
        self._gate = _RequestGate(self.policy)
        self._today = today or (lambda: datetime.now(timezone.utc).date())

    def _get_transport(self) -> Transport:
        if self._transport is None:
            self._transport = LiveTransport()
        return self._transport

    def _request(self, url: str) -> bytes:
        if self.offline:
            raise HttpError(f"offline mode: refusing network request to {url}")
        last_error: Exception | None = None
        for attempt in range(self.policy.max_retries + 1):
            try:
                with self._gate:
                    resp = self._get_transport().get(url, timeout=self.policy.timeout)
            except HttpError:
                raise
            except Exception as exc:  # connection-level failure: retry
                last_error = HttpError(f"GET {url}: {exc}")
                _time.sleep(min(0.5 * 2**attempt, 8.0))
                continue
            if resp.status == 200:
                return resp.body
            if resp.status == 404:
                raise NotFoundError(f"GET {url}: 404")
            if resp.status == 429:
                retry_after = _parse_retry_after(resp.headers)
                last_error = RateLimitedError(f"GET {url}: 429")
                _time.sleep(min(retry_after, 30.0))
                continue
            if 500 <= resp.status < 600:
                last_error = HttpError(f"GET {url}: {resp.status}")
                _time.sleep(min(0.5 * 2**attempt, 8.0))
                continue
            raise HttpError(f"GET {url}: unexpected status {resp.status}")
        assert last_error is not None
        raise last_error

    def fetch_entity(self, qid: str) -> RawEntityDocument:
        """Return the entity document, preferring today's cached copy."""
        if not is_qid(qid):
            raise ValueError(f"invalid item id {qid!r} (expected Q + digits)")
        today = self._today()
        cached = self.cache.read_for_date(qid, today)
        if cached is None and self.offline:
            cached = self.cache.read_latest(qid)
        if cached is not None:
            return RawEntityDocument(qid=qid, raw=cached)
        if self.offline:
            raise HttpError(f"offline mode: {qid} not in cache")
        body = self._request(ENTITY_DATA_URL.format(qid=qid))
        try:
            raw = json.loads(body)
        except json.JSONDecodeError as exc:
            raise HttpError(f"{qid}: response is not JSON: {exc}") from exc
        if "entities" not in raw or qid not in raw["entities"]:
            raise NotFoundError(f"{qid}: no entity in response")
        self.cache.write(qid, today, body)
        return RawEntityDocument(qid=qid, raw=raw)

    def resolve_entity_refs(
        self, qids: Sequence[str], batch_size: int = 50
    ) -> tuple[dict[str, EntityRef], dict[str, str]]:
        """English labels and aliases for each qid, batched over the wire.

        Cached documents (full or label fragments) are used first; only the
        remainder is fetched. Returns (refs, errors) so partial failures do
        not abort a whole ingest.
        """
        if not qids:
            return {}, {}
        for qid in qids:
            if not is_qid(qid):
                raise ValueError(f"invalid item id {qid!r}")
        refs: dict[str, EntityRef] = {}
        errors: dict[str, str] = {}
        pending: list[str] = []
        for qid in dict.fromkeys(qids):  # preserve order, drop duplicates
            entity = self._cached_entity_fragment(qid)
            if entity is not None:
                refs[qid] = self._build_ref(qid, entity)
            else:
                pending.append(qid)

        if pending and self.offline:
            for qid in pending:
                errors[qid] = "not cached and offline"
            return refs, errors

        today = self._today()
        for start in range(0, len(pending), batch_size):
            batch = pending[start : start + batch_size]
            url = (
                f"{API_URL}?action=wbgetentities&format=json"
                f"&props=labels%7Caliases&ids={'%7C'.join(batch)}"
            )
            try:
                raw = json.loads(self._request(url))
            except HttpError as exc:
                for qid in batch:
                    errors[qid] = str(exc)
                continue
            entities = raw.get("entities", {})
            for qid in batch:
                entity = entities.get(qid)
                if entity is None or "missing" in entity:
                    errors[qid] = "not found"
                    continue
                self.cache.write(qid, today, {"entities": {qid: entity}}, kind="labels")
                refs[qid] = self._build_ref(qid, entity)
        return refs, errors

    def _cached_entity_fragment(self, qid: str) -> dict | None:
        for kind in ("entity", "labels"):
            body = (
                self.cache.read_for_date(qid, self._today(), kind)
                or (self.cache.read_latest(qid, kind) if self.offline else None)
            )
            if body is not None:
                return body.get("entities", {}).get(qid)
        return None

    def _build_ref(self, qid: str, entity: dict) -> EntityRef:
        ref, warning = _ref_from_entity(qid, entity)
        if warning:
            logger.warning(warning)
        return ref

    def build_fact_record(
        self,
        subject_qid: str,
        property_id: str,
        property_name: str,
        category: Category,
        exclusions: Iterable[str] = (),
        official_title: str | None = None,
        fact_id: str | None = None,
        warnings: list[str] | None = None,
    ) -> FactRecord:
        """Fetch, parse, and validate one fact record.

        Raises PropertyAbsentError when the subject lacks usable statements
        and EmptyCurrentSetError when nothing qualifies as a current value;
        a record is never emitted in either case.
        """
        if not is_pid(property_id):
            raise ValueError(f"invalid property id {property_id!r}")
        sink = warnings if warnings is not None else []
        doc = self.fetch_entity(subject_qid)
        if property_id not in doc.claims:
            raise PropertyAbsentError(f"{subject_qid} has no {property_id} statements")
        claims, parse_warnings = parse_temporal_claims(doc, property_id)
        sink.extend(str(w) for w in parse_warnings)
        if not claims:
            raise PropertyAbsentError(
                f"{subject_qid}: no usable {property_id} statements"
            )

        subject_ref, subject_warning = _ref_from_entity(subject_qid, doc.entity)
        if subject_warning:
            sink.append(subject_warning)

        value_qids = list(dict.fromkeys(c.value.qid for c in claims))
        refs, ref_errors = self.resolve_entity_refs(value_qids)
        for qid, reason in ref_errors.items():
            sink.append(f"{qid}: label unresolved ({reason}); using qid as label")
        resolved = [
            replace(c, value=refs.get(c.value.qid, c.value)) for c in claims
        ]

        record = FactRecord(
            fact_id=fact_id or f"{subject_qid}:{property_id}",
            subject=subject_ref,
            property_id=property_id,
            property_name=property_name,
            category=category,
            claims=tuple(resolved),
            exclusions=frozenset(exclusions),
            official_title=official_title,
        )
        current_values(record)  # raises EmptyCurrentSetError when nothing qualifies
        return record


def _parse_retry_after(headers: Mapping[str, str]) -> float:
    for key, value in headers.items():
        if key.lower() == "retry-after":
            try:
                return max(0.0, float(value))
            except ValueError:
                return 1.0
    return 1.0
