#!/usr/bin/env python3
"""Regenerate the committed test fixtures.

Two fixture families:

  tests/fixtures/wikidata/   pinned wire-format entity documents and label
                             fragments, named like cache files so offline
                             clients can read them directly
  tests/fixtures/e2e/        a 10-fact snapshot, prompt/model config, a
                             replay transcript, and hand-written expected
                             verdicts for the end-to-end replay run

The per-fact answers and expected aggregates below are a hand-checked table:
the aggregate column is decided by eye from the answers, never computed with
the library's classifier. Prompt texts and replay keys are derived with the
library's rendering so the transcript lines up byte-for-byte.
"""
from __future__ import annotations

import json
import sys
from datetime import datetime, timezone
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from factkit.facts import (  # noqa: E402
    BenchmarkSnapshot,
    Category,
    EntityRef,
    FactRecord,
    TemporalClaim,
    TimePoint,
    save_snapshot,
)
from factkit.gateway import replay_key  # noqa: E402
from factkit.prompts import INSTRUCTION_PREFIX  # noqa: E402

FIXTURES = REPO / "tests" / "fixtures"
PINNED_DATE = "2026-01-15"

# ---------------------------------------------------------------------------
# wire-format entity fixtures
# ---------------------------------------------------------------------------

CLUBS = {
    "Q60992": ("Al-Nassr FC", ["Al-Nassr", "Al Nassr"]),
    "Q18656": ("Manchester United F.C.", ["Manchester United", "Man Utd"]),
    "Q1422": ("Juventus FC", ["Juventus", "Juve"]),
    "Q8682": ("Real Madrid CF", ["Real Madrid"]),
    "Q438897": ("Portugal national football team", ["Portugal"]),
}


def _time_value(time: str, precision: int) -> dict:
    return {
        "value": {
            "time": time,
            "timezone": 0,
            "before": 0,
            "after": 0,
            "precision": precision,
            "calendarmodel": "http://www.wikidata.org/entity/Q1985727",
        },
        "type": "time",
    }


def _statement(value_qid: str, start=None, end=None, rank="normal") -> dict:
    qualifiers = {}
    if start is not None:
        qualifiers["P580"] = [
            {
                "snaktype": "value",
                "property": "P580",
                "datavalue": _time_value(*start),
                "datatype": "time",
            }
        ]
    if end is not None:
        qualifiers["P582"] = [
            {
                "snaktype": "value",
                "property": "P582",
                "datavalue": _time_value(*end),
                "datatype": "time",
            }
        ]
    statement = {
        "mainsnak": {
            "snaktype": "value",
            "property": "P54",
            "datavalue": {
                "value": {
                    "entity-type": "item",
                    "numeric-id": int(value_qid[1:]),
                    "id": value_qid,
                },
                "type": "wikibase-entityid",
            },
            "datatype": "wikibase-item",
        },
        "type": "statement",
        "rank": rank,
    }
    if qualifiers:
        statement["qualifiers"] = qualifiers
    return statement


def build_wikidata_fixtures() -> None:
    out = FIXTURES / "wikidata"
    out.mkdir(parents=True, exist_ok=True)

    statements = [
        _statement("Q60992", start=("+2023-01-01T00:00:00Z", 11)),
        _statement(
            "Q18656",
            start=("+2021-08-31T00:00:00Z", 11),
            end=("+2022-11-22T00:00:00Z", 11),
        ),
        _statement(
            "Q1422",
            start=("+2018-07-10T00:00:00Z", 11),
            end=("+2021-08-31T00:00:00Z", 11),
        ),
        _statement(
            "Q8682",
            start=("+2009-07-01T00:00:00Z", 11),
            end=("+2018-07-10T00:00:00Z", 11),
        ),
        _statement("Q438897", start=("+2003-00-00T00:00:00Z", 9)),
        # an unknown-value statement, as returned for redacted memberships
        {
            "mainsnak": {"snaktype": "somevalue", "property": "P54", "datatype": "wikibase-item"},
            "type": "statement",
            "rank": "normal",
        },
    ]
    subject_doc = {
        "entities": {
            "Q11571": {
                "type": "item",
                "id": "Q11571",
                "labels": {"en": {"language": "en", "value": "Cristiano Ronaldo"}},
                "aliases": {
                    "en": [
                        {"language": "en", "value": "CR7"},
                        {"language": "en", "value": "Ronaldo"},
                        {"language": "en", "value": "Cristiano"},
                        {"language": "en", "value": "Cris R."},
                    ]
                },
                "claims": {"P54": statements},
            }
        }
    }
    (out / f"Q11571.{PINNED_DATE}.json").write_text(
        json.dumps(subject_doc, indent=1), encoding="utf-8"
    )

    for qid, (label, aliases) in CLUBS.items():
        fragment = {
            "entities": {
                qid: {
                    "type": "item",
                    "id": qid,
                    "labels": {"en": {"language": "en", "value": label}},
                    "aliases": {
                        "en": [{"language": "en", "value": a} for a in aliases]
                    },
                }
            }
        }
        (out / f"{qid}.labels.{PINNED_DATE}.json").write_text(
            json.dumps(fragment, indent=1), encoding="utf-8"
        )
    print(f"wrote wire fixtures -> {out}")


# ---------------------------------------------------------------------------
# end-to-end replay fixture: 10 facts, hand-checked verdict table
# ---------------------------------------------------------------------------

MODEL_ID = "replay-model"

TEMPLATES = [
    {
        "template_id": "athlete-club-1",
        "category": "athlete",
        "property": "P54",
        "variant_index": 1,
        "text": "Which club does {subject} play for?",
    },
    {
        "template_id": "athlete-club-2",
        "category": "athlete",
        "property": "P54",
        "variant_index": 2,
        "text": "What is the current team of {subject}?",
    },
    {
        "template_id": "athlete-club-3",
        "category": "athlete",
        "property": "P54",
        "variant_index": 3,
        "text": "Which sports team is {subject} a member of?",
    },
]

# (fact-number, subject label, subject aliases, current club (label, aliases),
#  historical club (label, aliases))
SUBJECTS = [
    (1, "Alice Laurent", ["A. Laurent"], ("Lyon Falcons", []), ("Metz Rovers", [])),
    (2, "Bruno Castel", ["B. Castel"], ("Porto Lions", []), ("Braga Wolves", [])),
    (3, "Carla Osei", ["C. Osei"], ("Accra Queens", []), ("Kumasi Stars", [])),
    (4, "Deniz Arslan", ["D. Arslan"], ("Istanbul Comets", ["Comets SK"]), ("Ankara Eagles", [])),
    (5, "Erik Lindqvist", ["E. Lindqvist"], ("Malmo Vikings", ["MV Vikings"]), ("Stockholm Foxes", [])),
    (6, "Fatima Zahra", ["F. Zahra"], ("Casablanca Gazelles", []), ("Rabat Pearls", [])),
    (7, "Goran Ilic", ["G. Ilic"], ("Belgrade Hawks", []), ("Novi Sad Bulls", [])),
    (8, "Hana Suzuki", ["H. Suzuki"], ("Osaka Blossoms", []), ("Kyoto Cranes", [])),
    (9, "Ivan Petrov", ["I. Petrov"], ("Sofia Lions", []), ("Plovdiv United", ["Plovdiv Utd"])),
    (10, "Julia Weber", ["J. Weber"], ("Zurich Alpines", []), ("Bern Bears", [])),
]

# Hand-checked verdict table for the property-axis run. Answers were chosen
# first, then the aggregate judged by hand: Correct when some answer names
# the current club, else Outdated when some answer names the old club, else
# Irrelevant. 6 Correct / 3 Outdated / 1 Irrelevant = 60% / 30% / 10%.
PROPERTY_ANSWERS = {
    "f01": (["Lyon Falcons", "The answer is: Lyon Falcons.", "Lyon Falcons"], "correct"),
    "f02": (["Braga Wolves", "Unknown Club", "Porto Lions"], "correct"),
    "f03": (["Accra Queens", "Kumasi Stars", "FC Nowhere"], "correct"),
    "f04": (["not sure", "Comets SK", "no idea"], "correct"),
    "f05": (["He now plays for Malmo Vikings.", "Malmö Vikings", "Stockholm Foxes"], "correct"),
    "f06": (["The answer is: Casablanca Gazelles.", "Casablanca Gazelles", "Rabat Pearls"], "correct"),
    "f07": (["Novi Sad Bulls", "Novi Sad Bulls", "Novi Sad Bulls"], "outdated"),
    "f08": (["Tokyo Giants", "Kyoto Cranes", "someone else"], "outdated"),
    "f09": (["He played for Plovdiv Utd", "Plovdiv United", "Varna City"], "outdated"),
    "f10": (["FC Barcelona", "", "I don't know"], "irrelevant"),
}

# Hand-checked agreement table for the subject-axis run (base template 1).
# A fact agrees when all three answers resolve to the same club, or when none
# resolves and the strings are identical. 6/10 agree.
SUBJECT_ANSWERS = {
    "f01": (["Lyon Falcons", "Lyon Falcons", "Lyon Falcons"], True),
    "f02": (["Porto Lions", "Porto Lions", "Porto Lions"], True),
    "f03": (["Accra Queens", "Kumasi Stars", "Accra Queens"], False),
    "f04": (["not sure", "not sure", "not sure"], True),
    "f05": (["Malmo Vikings", "Malmö Vikings", "MV Vikings"], True),
    "f06": (["Casablanca Gazelles", "no clue", "Casablanca Gazelles"], False),
    "f07": (["Novi Sad Bulls", "Belgrade Hawks", "Novi Sad Bulls"], False),
    "f08": (["maybe Tokyo", "hard to say", "unclear"], False),
    "f09": (["Plovdiv United", "Plovdiv Utd", "He played for Plovdiv United"], True),
    "f10": (["FC Barcelona", "FC Barcelona", "FC Barcelona"], True),
}


def _fact_id(number: int) -> str:
    return f"f{number:02d}"


def build_e2e_fixtures() -> None:
    out = FIXTURES / "e2e"
    out.mkdir(parents=True, exist_ok=True)

    records = []
    perturbations = []
    for number, name, subject_aliases, current, historical in SUBJECTS:
        subject = EntityRef(f"Q{9100 + number}", name, tuple(subject_aliases))
        current_ref = EntityRef(f"Q{9200 + number}", current[0], tuple(current[1]))
        hist_ref = EntityRef(f"Q{9300 + number}", historical[0], tuple(historical[1]))
        records.append(
            FactRecord(
                fact_id=_fact_id(number),
                subject=subject,
                property_id="P54",
                property_name="member of sports team",
                category=Category.ATHLETE,
                claims=(
                    TemporalClaim("P54", current_ref, start=TimePoint(2022, 7, 1)),
                    TemporalClaim(
                        "P54",
                        hist_ref,
                        start=TimePoint(2016, 7, 1),
                        end=TimePoint(2022, 6, 30),
                    ),
                ),
            )
        )
        last = name.split()[-1]
        perturbations.append(
            {"subject_qid": subject.qid, "surfaces": [name, f"{name[0]}. {last}", last]}
        )

    snapshot = BenchmarkSnapshot(
        snapshot_id="snap-e2e-fixture",
        fetched_at=datetime(2026, 1, 15, 12, 0, 0, tzinfo=timezone.utc),
        records=tuple(records),
        provenance="hand-built fixture",
    )
    save_snapshot(snapshot, out / "snapshot.json")

    (out / "templates.json").write_text(
        json.dumps(TEMPLATES, indent=2) + "\n", encoding="utf-8"
    )
    (out / "perturbations.json").write_text(
        json.dumps(perturbations, indent=2) + "\n", encoding="utf-8"
    )
    (out / "models.json").write_text(
        json.dumps(
            [
                {
                    "model_id": MODEL_ID,
                    "endpoint": "replay:tests/fixtures/e2e/replay.jsonl",
                    "needs_instruction_prefix": True,
                    "release_year": 2024,
                }
            ],
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )

    # replay transcript: property-axis prompts (all three templates) plus
    # subject-axis prompts (template 1 with each curated surface)
    lines = []

    def add_line(prompt_text: str, response: str) -> None:
        lines.append(
            {
                "key": replay_key(MODEL_ID, prompt_text),
                "model_id": MODEL_ID,
                "prompt": prompt_text,
                "response": response,
                "timestamp": "2026-01-15T12:00:00+00:00",
            }
        )

    for number, name, _aliases, _current, _historical in SUBJECTS:
        fact_id = _fact_id(number)
        answers, _expected = PROPERTY_ANSWERS[fact_id]
        for template, answer in zip(TEMPLATES, answers):
            prompt_text = INSTRUCTION_PREFIX + template["text"].replace("{subject}", name)
            add_line(prompt_text, answer)

        subject_answers, _agrees = SUBJECT_ANSWERS[fact_id]
        last = name.split()[-1]
        surfaces = [name, f"{name[0]}. {last}", last]
        for surface, answer in zip(surfaces, subject_answers):
            prompt_text = INSTRUCTION_PREFIX + TEMPLATES[0]["text"].replace(
                "{subject}", surface
            )
            add_line(prompt_text, answer)

    with (out / "replay.jsonl").open("w", encoding="utf-8") as handle:
        for line in lines:
            handle.write(json.dumps(line, sort_keys=True) + "\n")

    expected_aggregates = {
        _fact_id(n): PROPERTY_ANSWERS[_fact_id(n)][1] for n, *_ in SUBJECTS
    }
    (out / "expected_aggregates.json").write_text(
        json.dumps(expected_aggregates, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    expected_breakdown = {
        "n_facts": 10,
        "counts": {"correct": 6, "outdated": 3, "irrelevant": 1},
        "display_pct": {"correct": 60, "outdated": 30, "irrelevant": 10},
    }
    (out / "expected_breakdown.json").write_text(
        json.dumps(expected_breakdown, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    expected_agreement = {
        "n_agree": 6,
        "n_facts": 10,
        "per_fact": {
            _fact_id(n): SUBJECT_ANSWERS[_fact_id(n)][1] for n, *_ in SUBJECTS
        },
    }
    (out / "expected_agreement.json").write_text(
        json.dumps(expected_agreement, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    print(f"wrote e2e fixtures -> {out}")


if __name__ == "__main__":
    build_wikidata_fixtures()
    build_e2e_fixtures()
