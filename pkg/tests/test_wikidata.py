from __future__ import annotations

import json
import shutil
from datetime import date
from pathlib import Path

import pytest

from factkit.facts import Category, EmptyCurrentSetError, TimePoint, current_values, historical_values
from factkit.wikidata import (
    FetchPolicy,
    HttpError,
    NotFoundError,
    PropertyAbsentError,
    RawEntityDocument,
    TransportResponse,
    WikidataClient,
    parse_temporal_claims,
    parse_wikidata_time,
)

FIXTURES = Path(__file__).parent / "fixtures" / "wikidata"
PINNED = date(2026, 1, 15)


class FakeTransport:
    """Serves canned bodies by URL substring and counts every request."""

    def __init__(self, routes):
        self.routes = routes  # list of (substring, status, body-bytes-or-dict)
        self.requests: list[str] = []

    def get(self, url, *, timeout):
        self.requests.append(url)
        for fragment, status, body in self.routes:
            if fragment in url:
                data = body if isinstance(body, bytes) else json.dumps(body).encode()
                return TransportResponse(status=status, body=data)
        return TransportResponse(status=404, body=b"{}")


def load_fixture_doc(qid="Q11571") -> RawEntityDocument:
    raw = json.loads((FIXTURES / f"{qid}.{PINNED.isoformat()}.json").read_text())
    return RawEntityDocument(qid=qid, raw=raw)


def make_client(tmp_path, transport=None, offline=False, policy=None):
    return WikidataClient(
        cache_dir=tmp_path / "cache",
        policy=policy or FetchPolicy(min_request_interval=0.0),
        transport=transport,
        offline=offline,
        today=lambda: PINNED,
    )


def offline_client_on_fixtures(tmp_path):
    cache = tmp_path / "cache"
    shutil.copytree(FIXTURES, cache)
    return WikidataClient(
        cache_dir=cache, offline=True, today=lambda: date(2026, 8, 9)
    )


class TestTimeParsing:
    def test_day_precision(self):
        point, warning = parse_wikidata_time(
            {"time": "+2023-01-01T00:00:00Z", "precision": 11}
        )
        assert point == TimePoint(2023, 1, 1)
        assert warning is None

    def test_year_precision_zero_month(self):
        point, warning = parse_wikidata_time(
            {"time": "+2003-00-00T00:00:00Z", "precision": 9}
        )
        assert point == TimePoint(2003)
        assert warning is None

    def test_decade_precision_rounds_to_year(self):
        point, warning = parse_wikidata_time(
            {"time": "+1990-00-00T00:00:00Z", "precision": 8}
        )
        assert point == TimePoint(1990)
        assert "rounded to year" in warning

    def test_garbage_time_string(self):
        point, warning = parse_wikidata_time({"time": "someday", "precision": 11})
        assert point is None
        assert warning


class TestParseTemporalClaims:
    def test_fixture_parses_to_expected_claims(self):
        doc = load_fixture_doc()
        claims, warnings = parse_temporal_claims(doc, "P54")
        assert len(claims) == 5
        by_qid = {c.value.qid: c for c in claims}
        al_nassr = by_qid["Q60992"]
        assert al_nassr.start == TimePoint(2023, 1, 1)
        assert al_nassr.end is None
        assert by_qid["Q18656"].end == TimePoint(2022, 11, 22)
        assert by_qid["Q438897"].start == TimePoint(2003)
        # the somevalue statement is skipped with a warning, not fatal
        assert any("no value" in w.reason for w in warnings)

    def test_statement_without_qualifiers(self):
        doc = load_fixture_doc()
        statement = doc.claims["P54"][0]
        bare = {
            "entities": {
                "Q11571": {
                    "id": "Q11571",
                    "claims": {
                        "P54": [{**statement, "qualifiers": {}}],
                    },
                }
            }
        }
        claims, warnings = parse_temporal_claims(
            RawEntityDocument("Q11571", bare), "P54"
        )
        assert len(claims) == 1
        assert claims[0].start is None and claims[0].end is None
        assert not warnings

    def test_end_before_start_excluded_with_warning(self):
        doc_raw = {
            "entities": {
                "Q1": {
                    "id": "Q1",
                    "claims": {
                        "P54": [
                            {
                                "mainsnak": {
                                    "snaktype": "value",
                                    "datavalue": {
                                        "type": "wikibase-entityid",
                                        "value": {"id": "Q2"},
                                    },
                                },
                                "rank": "normal",
                                "qualifiers": {
                                    "P580": [
                                        {
                                            "datavalue": {
                                                "type": "time",
                                                "value": {
                                                    "time": "+2023-01-01T00:00:00Z",
                                                    "precision": 11,
                                                },
                                            }
                                        }
                                    ],
                                    "P582": [
                                        {
                                            "datavalue": {
                                                "type": "time",
                                                "value": {
                                                    "time": "+2020-01-01T00:00:00Z",
                                                    "precision": 11,
                                                },
                                            }
                                        }
                                    ],
                                },
                            }
                        ]
                    },
                }
            }
        }
        claims, warnings = parse_temporal_claims(RawEntityDocument("Q1", doc_raw), "P54")
        assert claims == []
        assert any("start after end" in w.reason for w in warnings)

    def test_non_item_value_skipped(self):
        doc_raw = {
            "entities": {
                "Q1": {
                    "id": "Q1",
                    "claims": {
                        "P54": [
                            {
                                "mainsnak": {
                                    "snaktype": "value",
                                    "datavalue": {"type": "string", "value": "oops"},
                                },
                                "rank": "normal",
                            }
                        ]
                    },
                }
            }
        }
        claims, warnings = parse_temporal_claims(RawEntityDocument("Q1", doc_raw), "P54")
        assert claims == []
        assert any("non-item" in w.reason for w in warnings)

    def test_parsing_is_deterministic(self):
        doc = load_fixture_doc()
        first = parse_temporal_claims(doc, "P54")
        second = parse_temporal_claims(doc, "P54")
        assert first == second


class TestFetchEntity:
    def test_invalid_qid_rejected_before_any_request(self, tmp_path):
        transport = FakeTransport([])
        client = make_client(tmp_path, transport)
        with pytest.raises(ValueError):
            client.fetch_entity("11571")
        assert transport.requests == []

    def test_fetch_writes_cache_and_replays_offline(self, tmp_path):
        body = (FIXTURES / f"Q11571.{PINNED.isoformat()}.json").read_bytes()
        transport = FakeTransport([("Special:EntityData/Q11571", 200, body)])
        client = make_client(tmp_path, transport)
        doc = client.fetch_entity("Q11571")
        assert len(transport.requests) == 1

        cached_file = tmp_path / "cache" / f"Q11571.{PINNED.isoformat()}.json"
        assert cached_file.exists()
        assert json.loads(cached_file.read_bytes()) == doc.raw

        offline = make_client(tmp_path, transport=None, offline=True)
        replayed = offline.fetch_entity("Q11571")
        assert replayed.raw == doc.raw

    def test_same_day_cache_hit_avoids_network(self, tmp_path):
        body = (FIXTURES / f"Q11571.{PINNED.isoformat()}.json").read_bytes()
        transport = FakeTransport([("Special:EntityData/Q11571", 200, body)])
        client = make_client(tmp_path, transport)
        client.fetch_entity("Q11571")
        client.fetch_entity("Q11571")
        assert len(transport.requests) == 1

    def test_offline_miss_raises(self, tmp_path):
        client = make_client(tmp_path, offline=True)
        with pytest.raises(HttpError, match="not in cache"):
            client.fetch_entity("Q11571")

    def test_404_raises_not_found(self, tmp_path):
        transport = FakeTransport([("Special:EntityData", 404, b"{}")])
        client = make_client(tmp_path, transport)
        with pytest.raises(NotFoundError):
            client.fetch_entity("Q99999999")

    def test_retry_on_500_then_success(self, tmp_path, monkeypatch):
        monkeypatch.setattr("factkit.wikidata._time.sleep", lambda s: None)
        body = (FIXTURES / f"Q11571.{PINNED.isoformat()}.json").read_bytes()
        calls = {"n": 0}

        class FlakyTransport:
            def get(self, url, *, timeout):
                calls["n"] += 1
                if calls["n"] == 1:
                    return TransportResponse(status=500, body=b"")
                return TransportResponse(status=200, body=body)

        client = make_client(tmp_path, FlakyTransport())
        doc = client.fetch_entity("Q11571")
        assert calls["n"] == 2
        assert doc.qid == "Q11571"


class TestResolveEntityRefs:
    def test_batching_uses_one_request_per_50(self, tmp_path):
        qids = [f"Q{i}" for i in range(1, 61)]

        def batch_body(url):
            ids = url.split("ids=")[1].split("&")[0].split("%7C")
            return {
                "entities": {
                    qid: {"id": qid, "labels": {"en": {"language": "en", "value": f"L{qid}"}}}
                    for qid in ids
                }
            }

        class BatchTransport:
            def __init__(self):
                self.requests = []

            def get(self, url, *, timeout):
                self.requests.append(url)
                return TransportResponse(
                    status=200, body=json.dumps(batch_body(url)).encode()
                )

        transport = BatchTransport()
        client = make_client(tmp_path, transport)
        refs, errors = client.resolve_entity_refs(qids)
        assert len(transport.requests) == 2
        assert not errors
        assert refs["Q7"].label == "LQ7"

    def test_empty_input(self, tmp_path):
        client = make_client(tmp_path)
        assert client.resolve_entity_refs([]) == ({}, {})

    def test_missing_qid_reported_per_item(self, tmp_path):
        body = {
            "entities": {
                "Q1": {"id": "Q1", "labels": {"en": {"language": "en", "value": "One"}}},
                "Q2": {"id": "Q2", "missing": ""},
            }
        }
        transport = FakeTransport([("wbgetentities", 200, body)])
        client = make_client(tmp_path, transport)
        refs, errors = client.resolve_entity_refs(["Q1", "Q2"])
        assert refs["Q1"].label == "One"
        assert errors == {"Q2": "not found"}

    def test_label_fallback_to_mul_then_qid(self, tmp_path):
        body = {
            "entities": {
                "Q1": {"id": "Q1", "labels": {"mul": {"language": "mul", "value": "Mul"}}},
                "Q2": {"id": "Q2", "labels": {}},
            }
        }
        transport = FakeTransport([("wbgetentities", 200, body)])
        client = make_client(tmp_path, transport)
        refs, _ = client.resolve_entity_refs(["Q1", "Q2"])
        assert refs["Q1"].label == "Mul"
        assert refs["Q2"].label == "Q2"

    def test_aliases_deduped_and_label_dropped(self, tmp_path):
        body = {
            "entities": {
                "Q1": {
                    "id": "Q1",
                    "labels": {"en": {"language": "en", "value": "Alpha"}},
                    "aliases": {
                        "en": [
                            {"language": "en", "value": "Alpha"},
                            {"language": "en", "value": "A"},
                            {"language": "en", "value": "A"},
                        ]
                    },
                }
            }
        }
        transport = FakeTransport([("wbgetentities", 200, body)])
        client = make_client(tmp_path, transport)
        refs, _ = client.resolve_entity_refs(["Q1"])
        assert refs["Q1"].aliases == ("A",)


class TestBuildFactRecord:
    def test_offline_fixture_builds_expected_record(self, tmp_path):
        client = offline_client_on_fixtures(tmp_path)
        record = client.build_fact_record(
            subject_qid="Q11571",
            property_id="P54",
            property_name="member of sports team",
            category=Category.ATHLETE,
            exclusions={"Q438897"},
        )
        assert record.subject.label == "Cristiano Ronaldo"
        assert "CR7" in record.subject.aliases
        assert [v.label for v in current_values(record)] == ["Al-Nassr FC"]
        history = [v.label for v in historical_values(record)]
        assert history[:2] == ["Manchester United F.C.", "Juventus FC"]

    def test_property_absent(self, tmp_path):
        client = offline_client_on_fixtures(tmp_path)
        with pytest.raises(PropertyAbsentError):
            client.build_fact_record(
                subject_qid="Q11571",
                property_id="P6",
                property_name="head of government",
                category=Category.COUNTRY,
            )

    def test_empty_current_set_rejected(self, tmp_path):
        raw = json.loads((FIXTURES / f"Q11571.{PINNED.isoformat()}.json").read_text())
        statements = raw["entities"]["Q11571"]["claims"]["P54"]
        # keep only the ended claims
        raw["entities"]["Q11571"]["claims"]["P54"] = statements[1:4]
        transport = FakeTransport(
            [
                ("Special:EntityData/Q11571", 200, raw),
                ("wbgetentities", 200, {"entities": {}}),
            ]
        )
        client = make_client(tmp_path, transport)
        with pytest.raises(EmptyCurrentSetError):
            client.build_fact_record(
                subject_qid="Q11571",
                property_id="P54",
                property_name="member of sports team",
                category=Category.ATHLETE,
            )

    def test_cache_replay_equivalence(self, tmp_path):
        """A record built live equals the record rebuilt from cache alone."""
        subject_body = (FIXTURES / f"Q11571.{PINNED.isoformat()}.json").read_bytes()

        def batch_body(url):
            ids = url.split("ids=")[1].split("&")[0].split("%7C")
            entities = {}
            for qid in ids:
                fragment = json.loads(
                    (FIXTURES / f"{qid}.labels.{PINNED.isoformat()}.json").read_text()
                )
                entities[qid] = fragment["entities"][qid]
            return {"entities": entities}

        class Transport:
            def get(self, url, *, timeout):
                if "Special:EntityData/Q11571" in url:
                    return TransportResponse(status=200, body=subject_body)
                return TransportResponse(
                    status=200, body=json.dumps(batch_body(url)).encode()
                )

        kwargs = dict(
            subject_qid="Q11571",
            property_id="P54",
            property_name="member of sports team",
            category=Category.ATHLETE,
            exclusions={"Q438897"},
        )
        live_client = make_client(tmp_path, Transport())
        live_record = live_client.build_fact_record(**kwargs)

        offline_client = make_client(tmp_path, transport=None, offline=True)
        cached_record = offline_client.build_fact_record(**kwargs)
        assert cached_record == live_record
