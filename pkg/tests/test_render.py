import pytest

from ctrlrec.records import (
    FAILURE,
    PROSPECTIVE,
    RETROSPECTIVE,
    SUCCESS,
    ExplanationRecord,
    parse_report_line,
    to_report_line,
)
from ctrlrec.render import render_explanation


def test_retrospective_template():
    record = ExplanationRecord(
        kind=RETROSPECTIVE, status=SUCCESS, revoked=((2, 17),), iterations=1
    )
    text = render_explanation(record, {17: "Heat"})
    assert text == (
        "We recommend this item because you interacted with Heat. "
        "Revoke these behaviors to stop its recommendation."
    )


def test_retrospective_verb_configurable():
    record = ExplanationRecord(
        kind=RETROSPECTIVE, status=SUCCESS, revoked=((0, 1), (3, 4)), iterations=2
    )
    text = render_explanation(record, {1: "Heat", 4: "Ronin"}, verb="watched")
    assert "you watched Heat, Ronin." in text


def test_prospective_template():
    record = ExplanationRecord(
        kind=PROSPECTIVE, status=SUCCESS, added_items=frozenset({5})
    )
    text = render_explanation(record, {5: "Ronin"})
    assert text == (
        "With the current interaction, Ronin will be added to future "
        "recommendations. Revoke this behavior to prevent their recommendation."
    )


def test_prospective_empty_fallback():
    record = ExplanationRecord(kind=PROSPECTIVE, status=SUCCESS)
    assert "no change to future recommendations" in render_explanation(record, {})


def test_retrospective_failure_fallback():
    record = ExplanationRecord(kind=RETROSPECTIVE, status=FAILURE)
    text = render_explanation(record, {})
    assert "Revoke these behaviors" not in text
    assert "No sufficient" in text


def test_report_line_round_trip():
    record = ExplanationRecord(
        kind=RETROSPECTIVE,
        status=SUCCESS,
        revoked=((0, 12), (4, 7)),
        iterations=2,
        user_id=3,
        target_item=55,
        method="search",
    )
    line = to_report_line(record)
    assert line == "3\t55\tsearch\tsuccess\t12,7\t2"
    parsed = parse_report_line(line)
    assert parsed["revoked_items"] == [12, 7]
    assert parsed["iterations"] == 2
    assert parsed["method"] == "search"


def test_report_line_failure_has_empty_revocations():
    record = ExplanationRecord(
        kind=RETROSPECTIVE, status=FAILURE, revoked=(), iterations=5,
        user_id=1, target_item=2, method="relax",
    )
    assert to_report_line(record) == "1\t2\trelax\tfailure\t\t5"
