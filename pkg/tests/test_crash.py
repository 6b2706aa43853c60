from __future__ import annotations

from dataclasses import replace

import pytest

from conftest import CORPUS, load_case
from etsx.crash import (
    CrashReportError, ETSRelatedType, MatchError, assign_roles, best_match_ets, classify_ets,
    parse_crash_report, version_key,
)
from etsx.ets import EtsStore, extract_ets

JAVA_STYLE = """java.lang.IllegalStateException: attempt to re-open an already-closed object: SQLiteProgram: x
    at android.database.sqlite.SQLiteClosable.acquireReference(SQLiteClosable.java:55)
    at android.database.sqlite.SQLiteStatement.simpleQueryForLong(SQLiteStatement.java:106)
    at cgeo.geocaching.DataStore$PreparedStmt.simpleQueryForLong(DataStore.java:3001)
    at cgeo.geocaching.DataStore.getAllCachesCount(DataStore.java:2001)
    at cgeo.geocaching.MainActivity$CountBubbleUpdateThread.run(MainActivity.java:10)
"""


def motivating_program():
    return load_case(CORPUS / "motivating").program


def test_keyed_and_java_layouts_agree():
    keyed = (CORPUS / "motivating" / "crash.txt").read_text()
    a = parse_crash_report(keyed)
    b = parse_crash_report(JAVA_STYLE)
    assert a.type == b.type == "java.lang.IllegalStateException"
    assert a.stack == b.stack
    assert b.message.startswith("attempt to re-open")


def test_text_round_trip():
    r = parse_crash_report(JAVA_STYLE)
    assert parse_crash_report(r.text()) == r


def test_empty_message_is_flagged():
    r = parse_crash_report((CORPUS / "value" / "crash.txt").read_text())
    assert r.message == "" and r.message_missing


@pytest.mark.parametrize("text", [
    "",
    "Type: x.Y\nStack:\n",
    "Msg: hi\nStack:\n  a.B.c\n",
    "Type: x.Y\nStack:\n  not a frame!\n",
    "no colon header here\n  at a.B.c\n",
])
def test_malformed_reports_raise(text):
    with pytest.raises(CrashReportError):
        parse_crash_report(text)


def test_roles_on_motivating_stack():
    p = motivating_program()
    roles = assign_roles(parse_crash_report(JAVA_STYLE), p)
    assert roles.signaler.endswith("SQLiteClosable.acquireReference")
    assert roles.crash_api.endswith("SQLiteStatement.simpleQueryForLong")
    assert roles.crash_method == "cgeo.geocaching.DataStore$PreparedStmt.simpleQueryForLong"
    assert roles.entry == "cgeo.geocaching.MainActivity$CountBubbleUpdateThread.run"
    assert roles.boundary == 1 and roles.warnings == ()


def test_roles_reject_app_only_stack():
    p = motivating_program()
    r = parse_crash_report("Type: x.Y\nStack:\n  cgeo.geocaching.DataStore.closeDb\n")
    with pytest.raises(CrashReportError):
        assign_roles(r, p)


def test_unknown_frames_use_package_inference():
    p = motivating_program()
    r = parse_crash_report(JAVA_STYLE + "    at cgeo.geocaching.Unknown.go(U.java:1)\n")
    roles = assign_roles(r, p)
    assert roles.entry == "cgeo.geocaching.Unknown.go"


def test_version_key_orders_numerically():
    assert sorted(["10.0", "9.1", "9.10", "9.2"], key=version_key) == ["9.1", "9.2", "9.10", "10.0"]


def test_match_motivating():
    case = load_case(CORPUS / "motivating")
    assert case.match.related_type == ETSRelatedType.ONLY_KEY_API
    assert not case.match.low_confidence


def test_match_empty_message_is_low_confidence():
    case = load_case(CORPUS / "value")
    assert case.match.low_confidence
    assert "type-only match (empty message)" in case.match.notes


def test_match_failures_carry_diagnostics():
    case = load_case(CORPUS / "motivating")
    wrong_msg = replace(case.report, message="something else")
    with pytest.raises(MatchError) as ei:
        best_match_ets(wrong_msg, case.store)
    assert ei.value.diagnostics == {"signaler": 1, "type": 1, "message": 0}
    wrong_type = replace(case.report, type="java.lang.NullPointerException")
    with pytest.raises(MatchError):
        best_match_ets(wrong_type, case.store)
    with pytest.raises(MatchError):
        best_match_ets(case.report, EtsStore())


def test_match_by_version():
    case = load_case(CORPUS / "motivating")
    old = replace(case.program, version="9.0")
    stores = [extract_ets(old), case.store]
    assert best_match_ets(case.report, stores, "9.0").ets.version == "9.0"
    assert best_match_ets(case.report, stores, "10.0").ets.version == "10.0"
    # no version: largest group wins, lowest version breaks the tie
    assert best_match_ets(case.report, stores).ets.version == "9.0"
    with pytest.raises(MatchError):
        best_match_ets(case.report, stores, "11.0")


def test_group_vote_prefers_larger_related_type():
    case = load_case(CORPUS / "motivating")
    base = case.ets
    api_only = [replace(base, sink=replace(base.sink, stmt=100 + i)) for i in range(2)]
    bare = replace(base, key_apis=(), sink=replace(base.sink, stmt=1))
    assert classify_ets(bare) == ETSRelatedType.NO_EXTERNAL_VAR
    m = best_match_ets(case.report, [bare] + api_only)
    assert m.related_type == ETSRelatedType.ONLY_KEY_API and m.candidates == 3
    assert m.ets.sink.stmt == 100
    assert any(n.startswith("types:") for n in m.notes)
