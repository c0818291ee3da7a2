"""Uniform model querying: a chat-completions HTTP adapter for live
endpoints and a deterministic replay adapter for offline reproduction.

Every live exchange is appended to a transcript log whose lines double as a
replay file, so any run can be re-scored later without the model. Replay
keys hash the model id together with the exact prompt bytes, because the
perturbation experiments depend on byte-level prompt identity.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Mapping, Protocol, Sequence

from .prompts import PerturbationAxis, PromptVariant

logger = logging.getLogger(__name__)


class TransportError(RuntimeError):
    """The endpoint could not be reached or returned an unusable response."""


class ReplayMissError(KeyError):
    """The replay file has no record for the requested key."""


class AnswerTransport(str, Enum):
    LIVE = "live"
    REPLAY = "replay"


@dataclass(frozen=True)
class ModelSpec:
    """How to reach one model and how to prompt it."""

    model_id: str
    endpoint: str
    needs_instruction_prefix: bool = False
    release_year: int = 2024
    max_output_tokens: int = 64
    temperature: float = 0.0
    request_headers: Mapping[str, str] = field(default_factory=dict)
    api_key_env: str | None = None

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError(f"{self.model_id}: temperature must be >= 0")
        if not 1990 <= self.release_year <= 2100:
            raise ValueError(f"{self.model_id}: implausible release_year")

    @property
    def replay_path(self) -> str | None:
        if self.endpoint.startswith("replay:"):
            return self.endpoint[len("replay:") :]
        return None


@dataclass(frozen=True)
class ModelAnswer:
    """One verbatim model response; no trimming happens at this layer."""

    fact_id: str
    axis: PerturbationAxis
    variant_index: int
    model_id: str
    raw_text: str
    latency: float = 0.0
    transport: AnswerTransport = AnswerTransport.REPLAY
    truncated: bool = False


@dataclass(frozen=True)
class QueryFailure:
    """An inline per-variant failure captured by a batch run."""

    fact_id: str
    axis: PerturbationAxis
    variant_index: int
    model_id: str
    error: str


def replay_key(model_id: str, prompt: str) -> str:
    digest = hashlib.sha256()
    digest.update(model_id.encode("utf-8"))
    digest.update(b"\x00")
    digest.update(prompt.encode("utf-8"))
    return digest.hexdigest()


class Gateway(Protocol):
    def query(self, spec: ModelSpec, variant: PromptVariant) -> ModelAnswer: ...


class ReplayGateway:
    """Serves answers from a line-delimited transcript file."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._answers: dict[str, str] = {}
        with self.path.open(encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                self._answers[record["key"]] = record["response"]

    def __len__(self) -> int:
        return len(self._answers)

    def query(self, spec: ModelSpec, variant: PromptVariant) -> ModelAnswer:
        key = replay_key(spec.model_id, variant.text)
        if key not in self._answers:
            raise ReplayMissError(f"replay file {self.path} has no key {key}")
        return ModelAnswer(
            fact_id=variant.fact_id,
            axis=variant.axis,
            variant_index=variant.variant_index,
            model_id=spec.model_id,
            raw_text=self._answers[key],
            latency=0.0,
            transport=AnswerTransport.REPLAY,
        )


class TranscriptWriter:
    """Append-only transcript whose lines are valid replay records."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def append(self, key: str, model_id: str, prompt: str, response: str) -> None:
        record = {
            "key": key,
            "model_id": model_id,
            "prompt": prompt,
            "response": response,
            "timestamp": datetime.now(timezone.utc).isoformat(),
        }
        line = json.dumps(record, sort_keys=True) + "\n"
        with self._lock:
            with self.path.open("a", encoding="utf-8") as handle:
                handle.write(line)


class HttpChatGateway:
    """POSTs chat-completion requests and logs every exchange.

    ``post_fn(url, payload, headers, timeout) -> (status, body_dict)`` is
    injectable so tests can exercise retry and transcript behavior offline.
    """

    def __init__(
        self,
        transcript: TranscriptWriter | None = None,
        timeout: float = 60.0,
        max_retries: int = 3,
        post_fn=None,
    ):
        self.transcript = transcript
        self.timeout = timeout
        self.max_retries = max_retries
        self._post_fn = post_fn or self._requests_post

    @staticmethod
    def _requests_post(url: str, payload: dict, headers: dict, timeout: float):
        import requests

        resp = requests.post(url, json=payload, headers=headers, timeout=timeout)
        try:
            body = resp.json()
        except ValueError as exc:
            raise TransportError(f"POST {url}: non-JSON response: {exc}") from exc
        return resp.status_code, body

    def query(self, spec: ModelSpec, variant: PromptVariant) -> ModelAnswer:
        payload = {
            "model": spec.model_id,
            "messages": [{"role": "user", "content": variant.text}],
            "temperature": spec.temperature,
            "max_tokens": spec.max_output_tokens,
        }
        headers = dict(spec.request_headers)
        if spec.api_key_env:
            token = os.environ.get(spec.api_key_env)
            if not token:
                raise TransportError(
                    f"{spec.model_id}: credential env var {spec.api_key_env} unset"
                )
            headers.setdefault("Authorization", f"Bearer {token}")

        started = time.monotonic()
        body = self._post_with_retries(spec.endpoint, payload, headers)
        latency = time.monotonic() - started

        try:
            choice = body["choices"][0]
            text = choice["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(
                f"{spec.model_id}: malformed completion response"
            ) from exc
        truncated = choice.get("finish_reason") == "length"
        if truncated:
            logger.warning("%s: answer truncated at max_tokens", spec.model_id)

        if self.transcript is not None:
            self.transcript.append(
                replay_key(spec.model_id, variant.text),
                spec.model_id,
                variant.text,
                text,
            )
        return ModelAnswer(
            fact_id=variant.fact_id,
            axis=variant.axis,
            variant_index=variant.variant_index,
            model_id=spec.model_id,
            raw_text=text,
            latency=latency,
            transport=AnswerTransport.LIVE,
            truncated=truncated,
        )

    def _post_with_retries(self, url: str, payload: dict, headers: dict) -> dict:
        last: Exception | None = None
        for attempt in range(self.max_retries + 1):
            try:
                status, body = self._post_fn(url, payload, headers, self.timeout)
            except TransportError:
                raise
            except Exception as exc:
                last = TransportError(f"POST {url}: {exc}")
                time.sleep(min(0.5 * 2**attempt, 8.0))
                continue
            if status == 200:
                return body
            if status == 429 or 500 <= status < 600:
                last = TransportError(f"POST {url}: status {status}")
                time.sleep(min(0.5 * 2**attempt, 8.0))
                continue
            raise TransportError(f"POST {url}: status {status}")
        assert last is not None
        raise last


def open_gateway(
    spec: ModelSpec,
    replay: str | Path | None = None,
    transcript: str | Path | None = None,
    post_fn=None,
) -> Gateway:
    """Replay gateway when a replay source is given (or the model spec's
    endpoint names one), otherwise a live HTTP gateway with an optional
    transcript log."""
    source = replay or spec.replay_path
    if source is not None:
        return ReplayGateway(source)
    writer = TranscriptWriter(transcript) if transcript else None
    return HttpChatGateway(transcript=writer, post_fn=post_fn)


def query_batch(
    gateway: Gateway,
    spec: ModelSpec,
    variants: Sequence[PromptVariant],
    parallelism: int = 1,
) -> list[ModelAnswer | QueryFailure]:
    """Query every variant, preserving input order.

    At most ``parallelism`` requests are in flight; a per-variant failure is
    captured inline as a QueryFailure instead of aborting the batch.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")

    def one(variant: PromptVariant) -> ModelAnswer | QueryFailure:
        try:
            return gateway.query(spec, variant)
        except Exception as exc:
            return QueryFailure(
                fact_id=variant.fact_id,
                axis=variant.axis,
                variant_index=variant.variant_index,
                model_id=spec.model_id,
                error=str(exc),
            )

    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(one, variants))


def batch_failures(
    results: Sequence[ModelAnswer | QueryFailure],
) -> list[QueryFailure]:
    return [r for r in results if isinstance(r, QueryFailure)]


def load_model_specs(path: str | Path) -> dict[str, ModelSpec]:
    """Model config file: a JSON array of ModelSpec rows keyed by model_id."""
    rows = json.loads(Path(path).read_text(encoding="utf-8"))
    specs: dict[str, ModelSpec] = {}
    for row in rows:
        spec = ModelSpec(
            model_id=row["model_id"],
            endpoint=row["endpoint"],
            needs_instruction_prefix=row.get("needs_instruction_prefix", False),
            release_year=row.get("release_year", 2024),
            max_output_tokens=row.get("max_output_tokens", 64),
            temperature=row.get("temperature", 0.0),
            request_headers=row.get("request_headers", {}),
            api_key_env=row.get("api_key_env"),
        )
        if spec.model_id in specs:
            raise ValueError(f"duplicate model_id {spec.model_id}")
        specs[spec.model_id] = spec
    return specs
