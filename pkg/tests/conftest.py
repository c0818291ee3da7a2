from __future__ import annotations

from datetime import datetime, timezone

import pytest

from factkit.facts import (
    BenchmarkSnapshot,
    Category,
    EntityRef,
    FactRecord,
    Rank,
    TemporalClaim,
    TimePoint,
)

AL_NASSR = EntityRef("Q60992", "Al-Nassr FC", ("Al-Nassr", "Al Nassr"))
MAN_UTD = EntityRef("Q18656", "Manchester United F.C.", ("Manchester United", "Man Utd"))
JUVENTUS = EntityRef("Q1422", "Juventus FC", ("Juventus", "Juve"))
REAL_MADRID = EntityRef("Q8682", "Real Madrid CF", ("Real Madrid",))
PORTUGAL_NT = EntityRef("Q438897", "Portugal national football team", ("Portugal",))
RONALDO = EntityRef(
    "Q11571", "Cristiano Ronaldo", ("CR7", "Ronaldo", "Cristiano", "Cris R.")
)


def claim(value, start=None, end=None, rank=Rank.NORMAL, property_id="P54"):
    return TemporalClaim(
        property_id=property_id, value=value, start=start, end=end, rank=rank
    )


def make_record(
    fact_id="Q11571:P54",
    subject=RONALDO,
    claims=None,
    category=Category.ATHLETE,
    property_id="P54",
    property_name="member of sports team",
    exclusions=frozenset(),
    official_title=None,
):
    return FactRecord(
        fact_id=fact_id,
        subject=subject,
        property_id=property_id,
        property_name=property_name,
        category=category,
        claims=tuple(claims or ()),
        exclusions=exclusions,
        official_title=official_title,
    )


@pytest.fixture
def ronaldo_record():
    """Club-membership record: one open current club, two ended clubs, and an
    open national-team claim held out by the exclusion filter."""
    return make_record(
        claims=[
            claim(AL_NASSR, start=TimePoint(2023, 1, 1)),
            claim(MAN_UTD, start=TimePoint(2021, 8, 31), end=TimePoint(2022, 11, 22)),
            claim(JUVENTUS, start=TimePoint(2018, 7, 10), end=TimePoint(2021, 8, 31)),
            claim(PORTUGAL_NT, start=TimePoint(2003)),
        ],
        exclusions=frozenset({PORTUGAL_NT.qid}),
    )


def make_snapshot(records, snapshot_id="snap-test"):
    return BenchmarkSnapshot(
        snapshot_id=snapshot_id,
        fetched_at=datetime(2026, 8, 9, 12, 0, 0, tzinfo=timezone.utc),
        records=tuple(records),
        provenance="test fixture",
    )


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion."""
    rows = []
    for outcome in ("passed", "failed"):
        for report in terminalreporter.stats.get(outcome, []):
            if report.when == "call" and "test_acceptance.py" in report.nodeid:
                rows.append((report.nodeid.split("::")[-1], outcome.upper()))
    if rows:
        terminalreporter.write_sep("-", "acceptance criteria")
        for name, outcome in sorted(rows):
            terminalreporter.write_line(f"{outcome:>6}  {name}")
