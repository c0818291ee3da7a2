"""Retrieval-augmented evaluation contexts.

Lexical BM25 over whitespace tokens stands in for embedding retrieval: it is
deterministic, dependency-free, and adequate for a small curated pool. The
retriever is an interface (see Retriever) so a dense backend can be plugged
in without touching the context-building code.
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

from .annotate import Document
from .facts import FactRecord

BM25_K1 = 1.2
BM25_B = 0.75
DEFAULT_WINDOW_TOKENS = 200
DEFAULT_OVERLAP_TOKENS = 50
DEFAULT_TOP_K = 3


class ParamError(ValueError):
    """Invalid chunking parameters."""


class EmptyIndexError(RuntimeError):
    """Retrieve called before any passage was indexed."""


class MissingGoldError(LookupError):
    """No gold document registered for the fact."""


class NoEligibleNoiseError(LookupError):
    """The pool has no document from a different category to sample."""


class ContextMode(str, Enum):
    RETRIEVED = "retrieved"
    GOLD = "gold"
    GOLD_PLUS_NOISE = "gold+noise"


@dataclass(frozen=True)
class Passage:
    passage_id: str
    source_doc_id: str
    text: str
    token_span: tuple[int, int]


@dataclass(frozen=True)
class ContextBundle:
    fact_id: str
    passages: tuple[Passage, ...]
    mode: ContextMode
    rng_seed: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "passages", tuple(self.passages))


def split_passages(
    doc: Document,
    window_tokens: int = DEFAULT_WINDOW_TOKENS,
    overlap_tokens: int = DEFAULT_OVERLAP_TOKENS,
) -> list[Passage]:
    """Covering windows over whitespace tokens with a fixed overlap.

    Window starts advance by ``window - overlap``; the final short window is
    kept so every token is covered.
    """
    if window_tokens <= 0 or overlap_tokens < 0 or overlap_tokens >= window_tokens:
        raise ParamError(
            f"need 0 <= overlap < window, got window={window_tokens} "
            f"overlap={overlap_tokens}"
        )
    tokens = doc.body.split()
    if not tokens:
        return []
    stride = window_tokens - overlap_tokens
    passages = []
    if len(tokens) <= window_tokens:
        starts = [0]
    else:
        starts = list(range(0, len(tokens), stride))
    for start in starts:
        end = min(start + window_tokens, len(tokens))
        passages.append(
            Passage(
                passage_id=f"{doc.doc_id}:{start:06d}-{end:06d}",
                source_doc_id=doc.doc_id,
                text=" ".join(tokens[start:end]),
                token_span=(start, end),
            )
        )
    return passages


def _tokenize(text: str) -> list[str]:
    return text.lower().split()


class Retriever(Protocol):
    def retrieve(self, query: str, k: int) -> list[Passage]: ...


class Bm25Index:
    """Okapi BM25 (k1=1.2, b=0.75) over lower-cased whitespace tokens.

    Scoring uses the non-negative idf variant ln(1 + (N - df + 0.5)/(df + 0.5)).
    Ties (including the all-zero case of a query with no vocabulary overlap)
    break deterministically by passage_id.
    """

    def __init__(self, k1: float = BM25_K1, b: float = BM25_B):
        self.k1 = k1
        self.b = b
        self._passages: list[Passage] = []
        self._term_freqs: list[dict[str, int]] = []
        self._doc_lens: list[int] = []
        self._df: dict[str, int] = {}

    def add(self, passages: Iterable[Passage]) -> None:
        for passage in passages:
            tokens = _tokenize(passage.text)
            freqs: dict[str, int] = {}
            for token in tokens:
                freqs[token] = freqs.get(token, 0) + 1
            self._passages.append(passage)
            self._term_freqs.append(freqs)
            self._doc_lens.append(len(tokens))
            for term in freqs:
                self._df[term] = self._df.get(term, 0) + 1

    def __len__(self) -> int:
        return len(self._passages)

    def _idf(self, term: str) -> float:
        df = self._df.get(term, 0)
        n = len(self._passages)
        return math.log(1.0 + (n - df + 0.5) / (df + 0.5))

    def score(self, query: str, index: int) -> float:
        freqs = self._term_freqs[index]
        doc_len = self._doc_lens[index]
        avg_len = sum(self._doc_lens) / len(self._doc_lens)
        total = 0.0
        for term in _tokenize(query):
            tf = freqs.get(term, 0)
            if tf == 0:
                continue
            norm = self.k1 * (1.0 - self.b + self.b * doc_len / avg_len)
            total += self._idf(term) * tf * (self.k1 + 1.0) / (tf + norm)
        return total

    def retrieve(self, query: str, k: int) -> list[Passage]:
        if not self._passages:
            raise EmptyIndexError("no passages indexed")
        if k < 1:
            raise ValueError("k must be >= 1")
        scored = [
            (self.score(query, i), passage.passage_id, passage)
            for i, passage in enumerate(self._passages)
        ]
        scored.sort(key=lambda item: (-item[0], item[1]))
        return [passage for _, _, passage in scored[:k]]


def build_index(
    pool: Iterable[Document],
    window_tokens: int = DEFAULT_WINDOW_TOKENS,
    overlap_tokens: int = DEFAULT_OVERLAP_TOKENS,
) -> Bm25Index:
    index = Bm25Index()
    for doc in pool:
        index.add(split_passages(doc, window_tokens, overlap_tokens))
    return index


def retrieved_context(
    fact_id: str, index: Bm25Index, query: str, k: int = DEFAULT_TOP_K
) -> ContextBundle:
    return ContextBundle(
        fact_id=fact_id,
        passages=tuple(index.retrieve(query, k)),
        mode=ContextMode.RETRIEVED,
    )


def _doc_by_id(pool: Sequence[Document], doc_id: str) -> Document:
    for doc in pool:
        if doc.doc_id == doc_id:
            return doc
    raise MissingGoldError(f"document {doc_id} not in pool")


def gold_context(
    fact_id: str,
    gold_map: Mapping[str, str],
    pool: Sequence[Document],
    window_tokens: int = DEFAULT_WINDOW_TOKENS,
    overlap_tokens: int = DEFAULT_OVERLAP_TOKENS,
) -> ContextBundle:
    """All passages of the registered gold document for the fact."""
    if fact_id not in gold_map:
        raise MissingGoldError(f"no gold document registered for {fact_id}")
    doc = _doc_by_id(pool, gold_map[fact_id])
    return ContextBundle(
        fact_id=fact_id,
        passages=tuple(split_passages(doc, window_tokens, overlap_tokens)),
        mode=ContextMode.GOLD,
    )


def noisy_context(
    record: FactRecord,
    gold_map: Mapping[str, str],
    pool: Sequence[Document],
    seed: int,
    window_tokens: int = DEFAULT_WINDOW_TOKENS,
    overlap_tokens: int = DEFAULT_OVERLAP_TOKENS,
    noise_first: bool = True,
) -> ContextBundle:
    """Gold passages plus one seeded uniform sample from a different category.

    By default noise passages come first so the gold evidence sits closest
    to the question; ``noise_first=False`` flips the order. The same seed
    always picks the same noise document.
    """
    if record.fact_id not in gold_map:
        raise MissingGoldError(f"no gold document registered for {record.fact_id}")
    gold_id = gold_map[record.fact_id]
    eligible = [
        doc
        for doc in pool
        if doc.doc_id != gold_id and doc.category != record.category.value
    ]
    if not eligible:
        raise NoEligibleNoiseError(
            f"{record.fact_id}: no pool document outside category "
            f"{record.category.value}"
        )
    noise_doc = eligible[random.Random(seed).randrange(len(eligible))]
    gold_doc = _doc_by_id(pool, gold_id)
    noise = tuple(split_passages(noise_doc, window_tokens, overlap_tokens))
    gold = tuple(split_passages(gold_doc, window_tokens, overlap_tokens))
    return ContextBundle(
        fact_id=record.fact_id,
        passages=noise + gold if noise_first else gold + noise,
        mode=ContextMode.GOLD_PLUS_NOISE,
        rng_seed=seed,
    )


def assemble_prompt(bundle: ContextBundle, question: str, template: str) -> str:
    """Fill a {context}/{question} template; passages join with blank lines."""
    if "{context}" not in template or "{question}" not in template:
        raise ValueError("template needs {context} and {question} placeholders")
    context = "\n\n".join(p.text for p in bundle.passages)
    return template.replace("{context}", context).replace("{question}", question)


def write_bundle_log(path: str | Path, bundles: Iterable[ContextBundle]) -> None:
    """Audit log: one JSON line per bundle with passage provenance."""
    with Path(path).open("w", encoding="utf-8") as handle:
        for bundle in bundles:
            row = {
                "fact_id": bundle.fact_id,
                "mode": bundle.mode.value,
                "rng_seed": bundle.rng_seed,
                "passages": [
                    {"passage_id": p.passage_id, "source_doc_id": p.source_doc_id}
                    for p in bundle.passages
                ],
            }
            handle.write(json.dumps(row, sort_keys=True) + "\n")


def load_gold_map(path: str | Path) -> dict[str, str]:
    """Gold map file: a JSON array of {fact_id, doc_id} rows or a plain map."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(raw, dict):
        return dict(raw)
    out: dict[str, str] = {}
    for row in raw:
        if row["fact_id"] in out:
            raise ValueError(f"duplicate gold mapping for {row['fact_id']}")
        out[row["fact_id"]] = row["doc_id"]
    return out
