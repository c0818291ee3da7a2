from __future__ import annotations

import math
import random

import pytest

from factkit.annotate import Document
from factkit.facts import TimePoint
from factkit.retrieval import (
    Bm25Index,
    ContextMode,
    EmptyIndexError,
    MissingGoldError,
    NoEligibleNoiseError,
    ParamError,
    assemble_prompt,
    build_index,
    gold_context,
    noisy_context,
    split_passages,
)

from conftest import AL_NASSR, claim, make_record


def doc(doc_id, body, category=None, title=""):
    return Document(doc_id=doc_id, title=title, body=body, category=category)


class TestSplitPassages:
    def test_stride_arithmetic(self):
        document = doc("d1", " ".join(f"w{i}" for i in range(500)))
        passages = split_passages(document, window_tokens=200, overlap_tokens=50)
        assert [p.token_span[0] for p in passages] == [0, 150, 300, 450]
        assert passages[0].token_span == (0, 200)
        assert passages[-1].token_span == (450, 500)

    def test_short_doc_single_passage(self):
        document = doc("d1", "only a few words here")
        passages = split_passages(document, window_tokens=200, overlap_tokens=50)
        assert len(passages) == 1
        assert passages[0].text == document.body

    def test_bad_params(self):
        document = doc("d1", "a b c")
        with pytest.raises(ParamError):
            split_passages(document, window_tokens=10, overlap_tokens=10)
        with pytest.raises(ParamError):
            split_passages(document, window_tokens=0, overlap_tokens=0)

    def test_every_token_covered(self):
        rng = random.Random(3)
        for _ in range(20):
            n = rng.randrange(1, 700)
            document = doc("d1", " ".join(f"w{i}" for i in range(n)))
            passages = split_passages(document, window_tokens=64, overlap_tokens=16)
            covered = set()
            for p in passages:
                covered.update(range(*p.token_span))
            assert covered == set(range(n))

    def test_consecutive_overlap_is_exact(self):
        document = doc("d1", " ".join(f"w{i}" for i in range(500)))
        passages = split_passages(document, window_tokens=200, overlap_tokens=50)
        for left, right in zip(passages, passages[1:]):
            if left.token_span[1] == 200 * 0 + left.token_span[0] + 200:
                overlap = left.token_span[1] - right.token_span[0]
                assert overlap == 50


def reference_bm25_ranking(passages, query, k1=1.2, b=0.75):
    """Independent, readable BM25 used as the test oracle."""
    docs = [p.text.lower().split() for p in passages]
    n = len(docs)
    avg_len = sum(len(d) for d in docs) / n
    df = {}
    for tokens in docs:
        for term in set(tokens):
            df[term] = df.get(term, 0) + 1
    scores = []
    for p, tokens in zip(passages, docs):
        score = 0.0
        for term in query.lower().split():
            tf = tokens.count(term)
            if not tf:
                continue
            idf = math.log(1 + (n - df[term] + 0.5) / (df[term] + 0.5))
            score += idf * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len(tokens) / avg_len))
        scores.append((score, p.passage_id))
    scores.sort(key=lambda item: (-item[0], item[1]))
    return [pid for _, pid in scores]


class TestBm25:
    def toy_pool(self):
        return [
            doc("gold", "Cristiano Ronaldo plays for Al-Nassr in Riyadh"),
            doc("other", "Lionel Messi captains Inter Miami in Florida"),
            doc("noise", "The weather in Lisbon stays mild through autumn"),
        ]

    def test_answer_passage_ranks_first_in_toy_pool(self):
        index = build_index(self.toy_pool(), window_tokens=32, overlap_tokens=8)
        top = index.retrieve("Which club does Cristiano Ronaldo play for?", k=3)
        assert top[0].source_doc_id == "gold"

    def test_zero_overlap_query_returns_k_in_id_order(self):
        index = build_index(self.toy_pool(), window_tokens=32, overlap_tokens=8)
        top = index.retrieve("zzz qqq xxx", k=3)
        ids = [p.passage_id for p in top]
        assert ids == sorted(ids)
        assert len(top) == 3

    def test_same_query_twice_identical(self):
        index = build_index(self.toy_pool(), window_tokens=32, overlap_tokens=8)
        first = [p.passage_id for p in index.retrieve("Al-Nassr Riyadh", k=2)]
        second = [p.passage_id for p in index.retrieve("Al-Nassr Riyadh", k=2)]
        assert first == second

    def test_empty_index_raises(self):
        with pytest.raises(EmptyIndexError):
            Bm25Index().retrieve("anything", k=1)

    def test_matches_reference_on_100_passages(self):
        rng = random.Random(11)
        vocab = [f"term{i}" for i in range(60)]
        pool = []
        for i in range(100):
            words = [rng.choice(vocab) for _ in range(rng.randrange(5, 40))]
            pool.append(doc(f"doc{i:03d}", " ".join(words)))
        index = build_index(pool, window_tokens=64, overlap_tokens=0)
        passages = [p for d in pool for p in split_passages(d, 64, 0)]
        for query_len in (1, 2, 4):
            query = " ".join(rng.choice(vocab) for _ in range(query_len))
            ours = [p.passage_id for p in index.retrieve(query, k=100)]
            reference = reference_bm25_ranking(passages, query)
            assert ours == reference


FAKE_RECORD = make_record(claims=[claim(AL_NASSR, start=TimePoint(2023))])


class TestGoldContext:
    def pool(self):
        return [
            doc("wiki-ronaldo", "Ronaldo signed with Al-Nassr. " * 30, category="athlete"),
            doc("wiki-austria", "The president of Austria resides in Vienna. " * 30, category="country"),
            doc("wiki-france", "The president of France resides in Paris. " * 30, category="country"),
        ]

    def test_gold_bundle_contains_only_gold_passages(self):
        bundle = gold_context(
            "Q11571:P54", {"Q11571:P54": "wiki-ronaldo"}, self.pool(),
            window_tokens=50, overlap_tokens=10,
        )
        assert bundle.mode is ContextMode.GOLD
        assert bundle.passages
        assert all(p.source_doc_id == "wiki-ronaldo" for p in bundle.passages)

    def test_missing_gold(self):
        with pytest.raises(MissingGoldError):
            gold_context("unknown", {}, self.pool())

    def test_noise_precedes_gold_and_differs_in_category(self):
        bundle = noisy_context(
            FAKE_RECORD,
            {"Q11571:P54": "wiki-ronaldo"},
            self.pool(),
            seed=5,
            window_tokens=50,
            overlap_tokens=10,
        )
        assert bundle.mode is ContextMode.GOLD_PLUS_NOISE
        noise_docs = {p.source_doc_id for p in bundle.passages if p.source_doc_id != "wiki-ronaldo"}
        assert len(noise_docs) == 1
        noise_id = noise_docs.pop()
        assert noise_id in {"wiki-austria", "wiki-france"}
        # noise first, gold second
        sources = [p.source_doc_id for p in bundle.passages]
        switch = sources.index("wiki-ronaldo")
        assert all(s == noise_id for s in sources[:switch])
        assert all(s == "wiki-ronaldo" for s in sources[switch:])

    def test_same_seed_same_bundle(self):
        kwargs = dict(
            gold_map={"Q11571:P54": "wiki-ronaldo"},
            pool=self.pool(),
            window_tokens=50,
            overlap_tokens=10,
        )
        a = noisy_context(FAKE_RECORD, seed=123, **kwargs)
        b = noisy_context(FAKE_RECORD, seed=123, **kwargs)
        assert a == b

    def test_noise_placement_flag_flips_order(self):
        kwargs = dict(
            gold_map={"Q11571:P54": "wiki-ronaldo"},
            pool=self.pool(),
            window_tokens=50,
            overlap_tokens=10,
        )
        default = noisy_context(FAKE_RECORD, seed=9, **kwargs)
        flipped = noisy_context(FAKE_RECORD, seed=9, noise_first=False, **kwargs)
        assert default.passages[0].source_doc_id != "wiki-ronaldo"
        assert flipped.passages[0].source_doc_id == "wiki-ronaldo"
        assert sorted(p.passage_id for p in default.passages) == sorted(
            p.passage_id for p in flipped.passages
        )

    def test_no_eligible_noise(self):
        pool = [
            doc("wiki-ronaldo", "Ronaldo text", category="athlete"),
            doc("wiki-messi", "Messi text", category="athlete"),
        ]
        with pytest.raises(NoEligibleNoiseError):
            noisy_context(
                FAKE_RECORD, {"Q11571:P54": "wiki-ronaldo"}, pool, seed=1
            )


class TestAssemblePrompt:
    TEMPLATE = "Context:\n{context}\n\nQuestion: {question}\nAnswer:"

    def test_fill(self):
        bundle = gold_context(
            "Q11571:P54",
            {"Q11571:P54": "wiki-ronaldo"},
            [doc("wiki-ronaldo", "alpha beta. " * 40)],
            window_tokens=30,
            overlap_tokens=5,
        )
        prompt = assemble_prompt(bundle, "Which club?", self.TEMPLATE)
        assert "Which club?" in prompt
        assert prompt.index("Context:") < prompt.index("Question:")

    def test_placeholder_mismatch(self):
        bundle = gold_context(
            "f", {"f": "d"}, [doc("d", "x")], window_tokens=5, overlap_tokens=0
        )
        with pytest.raises(ValueError):
            assemble_prompt(bundle, "q", "no placeholders")

    def test_length_arithmetic(self):
        bundle = gold_context(
            "f",
            {"f": "d"},
            [doc("d", " ".join(f"w{i}" for i in range(20)))],
            window_tokens=8,
            overlap_tokens=2,
        )
        question = "what is it?"
        prompt = assemble_prompt(bundle, question, "{context}|{question}")
        parts_len = sum(len(p.text) for p in bundle.passages)
        separators = 2 * (len(bundle.passages) - 1)  # blank line between passages
        assert len(prompt) == parts_len + separators + 1 + len(question)
