from __future__ import annotations

import json
import random

import httpx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import CORPUS, EP, load_case
from etsx.cis import EP2, KeyInfo, ChainLink, build_all
from etsx.explain import (
    BackendError, ConstraintParseError, FailingBackend, FrameworkConstraint, MockBackend, RemoteBackend,
    ReplayBackend, TemplateError, extract_constraint, generate_report, parse_constraint, render_candidate_prompt,
    representative, request_key, static_context, validate_with_retry, verify,
)
from etsx.explain.constraints import Check, VerifierOutcome

CRASH_API = "demo.fw.F2.crashAPI"
CLEAR = "cgeo.geocaching.DataStore$PreparedStmt.clearPreparedStmts"


def ep2():
    case = load_case(EP / "ep2_value")
    cises, _ = build_all(case.ranking, case.report, case.ets, case.program)
    ki = {c.candidate: c for c in cises}["demo.app.A2.caller"].key_info
    return case, static_context(case.ets, case.program, ki)


def outcome(text, anchor=CRASH_API):
    case, ctx = ep2()
    c = FrameworkConstraint(anchor, parse_constraint(text, anchor).clauses)
    out = verify(c, case.program, ctx)
    return out.format.ok, out.source.ok, out.static.ok


def test_correct_constraint_passes_all_three():
    assert outcome("⟨Parameter 0: int crashParameter⟩ ≠ -1") == (True, True, True)


def test_counterexample_wrong_format():
    # a bare name instead of a typed reference
    assert outcome("⟨crashParameter⟩ != -1")[0] is False


def test_counterexample_wrong_type():
    assert outcome("⟨Parameter 0: String crashParameter⟩ ≠ -1") == (True, False, True)


def test_counterexample_wrong_name():
    f, s, _ = outcome("⟨Parameter 0: int crashParam⟩ ≠ -1")
    assert (f, s) == (True, False)


def test_counterexample_off_chain_parameter():
    # otherParameter exists in the source but never reaches the check
    assert outcome("⟨Parameter 1: long otherParameter⟩ > 0") == (True, True, False)


def test_field_constraint_on_motivating(motivating):
    ctx = static_context(motivating.ets, motivating.program)
    anchor = "android.database.sqlite.SQLiteStatement.simpleQueryForLong"
    good = parse_constraint("⟨Field SQLiteClosable: int mRefCount⟩ > 0", anchor)
    assert verify(good, motivating.program, ctx).valid
    undeclared = parse_constraint("⟨Field SQLiteClosable: int mReferenceCount⟩ > 0", anchor)
    assert not verify(undeclared, motivating.program, ctx).source.ok


@pytest.mark.parametrize("text, n", [
    ("⟨Parameter 0: int a⟩ > 0 && ⟨Parameter 1: int b⟩ <= 3", 2),
    ("⟨Parameter 0: int a⟩ > 0 ∧ ⟨Parameter 1: int b⟩ ≥ 3", 2),
    ("because reasons: ⟨Field C: int f⟩ != 0; ⟨Field C: int g⟩ = 1", 2),
    ("⟨Parameter 0: int a⟩ > 0\n⟨Parameter 1: int b⟩ < 1", 2),
])
def test_parse_clauses(text, n):
    c = parse_constraint(text, "x.Y.z")
    assert len(c.clauses) == n
    assert all(cl.rel in ("==", "≠", "<", "≤", ">", "≥") for cl in c.clauses)


def test_parse_without_clause_fails():
    with pytest.raises(ConstraintParseError):
        parse_constraint("the count must be positive", "x.Y.z")


# -- fault injection, one verifier at a time ------------------------------------------

def _ok():
    return Check(True)


def _bad():
    return Check(False, "injected")


@pytest.mark.parametrize("which", ["format", "source", "static"])
def test_each_verifier_alone_blocks_acceptance(which):
    c = parse_constraint("⟨Parameter 0: int a⟩ > 0", "x.Y.z")
    checks = {k: (_bad() if k == which else _ok()) for k in ("format", "source", "static")}
    v = validate_with_retry(lambda t: c, lambda _: VerifierOutcome(**checks), 3)
    assert v.status == ("representative" if which == "static" else "none")
    assert len(v.attempts) == 3


def test_retry_stops_at_first_valid():
    good = parse_constraint("⟨Parameter 0: int a⟩ > 0", "x.Y.z")
    results = [VerifierOutcome(_ok(), _bad(), _ok()), VerifierOutcome(_ok(), _ok(), _ok())]
    v = validate_with_retry(lambda t: good, lambda _: results.pop(0), 3)
    assert v.status == "valid" and len(v.attempts) == 2


def test_backend_error_stops_retry():
    def pipeline(turn):
        raise BackendError("down")
    v = validate_with_retry(pipeline, lambda c: None, 3)
    assert v.status == "none" and len(v.attempts) == 1


def test_unparseable_attempts_are_retried():
    good = parse_constraint("⟨Parameter 0: int a⟩ > 0", "x.Y.z")

    def pipeline(turn):
        if turn < 3:
            raise ConstraintParseError("garbage")
        return good
    v = validate_with_retry(pipeline, lambda c: VerifierOutcome(_ok(), _ok(), _ok()), 3)
    assert v.status == "valid" and [a.error is not None for a in v.attempts] == [True, True, False]


def test_static_failures_fall_back_to_upper_bound():
    cs = [parse_constraint(t, "x.Y.z") for t in (
        "⟨Parameter 0: int a⟩ > 0",
        "⟨Parameter 0: int a⟩ > 0 && ⟨Parameter 1: int b⟩ > 0",
        "⟨Parameter 1: int b⟩ > 0",
    )]
    v = validate_with_retry(lambda t: cs[t - 1], lambda c: VerifierOutcome(_ok(), _ok(), _bad()), 3)
    assert v.status == "representative" and v.constraint is cs[1]


def test_static_failures_without_upper_bound_give_none():
    cs = [parse_constraint(t, "x.Y.z") for t in ("⟨Parameter 0: int a⟩ > 0", "⟨Parameter 1: int b⟩ > 0")]
    v = validate_with_retry(lambda t: cs[t - 1], lambda c: VerifierOutcome(_ok(), _ok(), _bad()), 2)
    assert v.status == "none"


def oracle_representative(family):
    for t, s in enumerate(family):
        if all(o <= s for o in family):
            return t
    return None


def test_representative_lattice_random_families():
    rng = random.Random(2024)
    universe = "abcdef"
    for _ in range(1000):
        family = [frozenset(x for x in universe if rng.random() < 0.4) for _ in range(rng.randint(1, 4))]
        if rng.random() < 0.3:  # plant an upper bound
            family.insert(rng.randrange(len(family) + 1), frozenset().union(*family))
        t = representative(family)
        assert t == oracle_representative(family)
        if t is not None:
            assert all(s <= family[t] for s in family)


@given(st.lists(st.frozensets(st.sampled_from("pqrs")), min_size=1, max_size=5))
def test_representative_iff_upper_bound(family):
    t = representative(family)
    bounds = [i for i, s in enumerate(family) if all(o <= s for o in family)]
    assert t == (bounds[0] if bounds else None)


# -- backends ----------------------------------------------------------------------

def test_mock_prefers_attempt_specific_reply():
    m = MockBackend({"ec": "plain", "ec#2": "second"})
    assert m.complete("s", "u", "ec", 1) == "plain"
    assert m.complete("s", "u", "ec", 2) == "second"
    with pytest.raises(BackendError):
        m.complete("s", "u", "missing")
    assert m.calls == [("ec", 1), ("ec", 2), ("missing", 1)]


def test_replay_records_and_replays(tmp_path):
    cassette = tmp_path / "c.json"
    rec = ReplayBackend(cassette, inner=MockBackend({"t": "answer"}))
    assert rec.complete("sys", "user", "t") == "answer"
    rec.save()
    play = ReplayBackend(cassette)
    assert play.complete("sys", "user") == "answer"
    assert request_key("sys", "user") in json.loads(cassette.read_text())
    with pytest.raises(BackendError):
        play.complete("sys", "other prompt")
    with pytest.raises(BackendError):
        play.complete("sys", "user", attempt=2)


def test_remote_posts_chat_request():
    seen = {}

    def handler(request: httpx.Request):
        seen["body"] = json.loads(request.content)
        seen["auth"] = request.headers.get("authorization")
        return httpx.Response(200, json={"choices": [{"message": {"content": "hello"}}]})

    b = RemoteBackend("http://llm.test/v1/chat", "m1", "k", transport=httpx.MockTransport(handler))
    assert b.complete("sys", "usr") == "hello"
    assert seen["body"]["temperature"] == 0 and seen["body"]["model"] == "m1"
    assert [m["role"] for m in seen["body"]["messages"]] == ["system", "user"]
    assert seen["auth"] == "Bearer k"


@pytest.mark.parametrize("response", [
    httpx.Response(500, text="boom"),
    httpx.Response(200, json={"unexpected": True}),
])
def test_remote_errors_become_backend_errors(response):
    b = RemoteBackend("http://llm.test/v1/chat", "m1", transport=httpx.MockTransport(lambda r: response))
    with pytest.raises(BackendError):
        b.complete("s", "u")


def test_remote_needs_configuration(monkeypatch):
    monkeypatch.delenv("ETSX_LLM_ENDPOINT", raising=False)
    monkeypatch.delenv("ETSX_LLM_MODEL", raising=False)
    with pytest.raises(BackendError):
        RemoteBackend()


# -- templates and pipeline --------------------------------------------------------

def test_template_refuses_missing_elements():
    ki = KeyInfo(EP2, {"Signaler": "a.B.s", "CrashAPI": "a.B.c", "KeyVariable": ["v"]}, "S3")
    with pytest.raises(TemplateError):
        render_candidate_prompt(ki)
    ki.elements["CallChain_Crash"] = [ChainLink("a.C.m", "x"), ChainLink("a.B.c", "v")]
    assert "a.C.m [x] → a.B.c [v]" in render_candidate_prompt(ki)


def test_pipeline_propagates_to_crash_api():
    case = load_case(EP / "ep2_value")
    mock = MockBackend.from_file(case.path / "mock.json")
    res = extract_constraint(case.ets, case.report, case.program, mock)
    assert res.extracted.anchor == "demo.fw.F2.signaler"
    assert res.final.anchor == CRASH_API and res.final.provenance == "final"
    assert str(res.final) == "⟨Parameter 0: int crashParameter⟩ ≠ -1"


def motivating_report(backend, **kw):
    case = load_case(CORPUS / "motivating")
    cises, _ = build_all(case.ranking, case.report, case.ets, case.program)
    return generate_report(case.report, case.ets, case.ranking, cises, backend, case.program, **kw)


def test_motivating_report_leads_with_the_closing_method():
    rep = motivating_report(MockBackend.from_file(CORPUS / "motivating" / "mock.json"))
    assert rep.sections[0].sig == CLEAR and rep.sections[0].origin == "backend"
    assert rep.header["constraint"]["text"] == "⟨Field SQLiteClosable: int mRefCount⟩ > 0"
    assert "releaseReference" in rep.header["constraint"]["effect"]
    assert rep.provenance["constraint"]["status"] == "valid"
    text = rep.to_text()
    assert "Candidate method 1: " + CLEAR in text


def test_naive_report_uses_templates_only():
    rep = motivating_report(MockBackend(), naive=True)
    assert all(s.origin == "template" for s in rep.sections)
    assert rep.provenance["backend"] == "none" and rep.header["constraint"] is None
    assert any(n.startswith("naive mode") for n in rep.provenance["notes"])


def test_failing_backend_degrades_to_templates():
    rep = motivating_report(FailingBackend())
    assert all(s.origin == "template" for s in rep.sections)
    assert "global" in rep.provenance["degraded"]
    assert rep.provenance["constraint"]["status"] == "none"


def test_report_without_candidates():
    case = load_case(CORPUS / "motivating")
    rep = generate_report(case.report, case.ets, None, [], MockBackend(), case.program)
    assert rep.sections == []
    assert "no candidate methods to explain" in rep.provenance["notes"]
    assert "no candidate method was found" in rep.global_text
