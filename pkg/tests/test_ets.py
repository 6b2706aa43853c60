from __future__ import annotations

import random
import string

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import CORPUS, EP, FIXTURES, load_case
from etsx.crash import ETSRelatedType, classify_ets
from etsx.ets import (
    BASIC, NOT_RETURN, SYMBOLIC, TRY_CATCH, ExtractConfig, MessagePattern, dumps_store, extract_ets,
    loads_store, StoreError,
)
from etsx.ir import load_program, parse_program
from oracles import oracle_origins, random_program

LISTINGS = "demo.framework.Listings"

REFCOUNT = """mir/1
class p.fw.Closable framework
  field int mRefCount
  method public void acquireReference(int count)
    0: field-load base = p.fw.Closable.mRefCount -> 1
    1: assign r = base - count -> 2
    2: if r <= 0 -> 3, 5
    3: assign e = new java.lang.IllegalStateException("already closed") -> 4
    4: throw e
    5: return
  end
  method public void f(int count)
    0: call p.fw.Closable.acquireReference(count) -> 1
    1: return
  end
  method public void release()
    0: field-load t = p.fw.Closable.mRefCount -> 1
    1: assign t2 = t - 1 -> 2
    2: field-store p.fw.Closable.mRefCount = t2 -> 3
    3: return
  end
end
"""

HANDLER = """mir/1
class p.fw.Log framework
  method public void log_throwable(java.lang.Throwable t)
    0: return
  end
  method public void check(int n)
    0: if n < 0 -> 1, 3
    1: assign e = new java.lang.IllegalArgumentException("negative") -> 2
    2: call p.fw.Log.log_throwable(e) -> 3
    3: return
  end
end
"""


def listing_summaries():
    store = extract_ets(load_program(FIXTURES / "listings.mir"))
    return {e.signaler: e for e in store}


def conds(e):
    return sorted((str(k), k.tag) for k in e.key_conds)


# [PAPER] each annotation below is the one written beside the listing source
@pytest.mark.parametrize("name, expected, kcvs", [
    ("Example1", [("a == 0", BASIC)], ("a",)),
    ("Example2", [("a < 0", BASIC), ("b < 0", BASIC), ("type != null", BASIC)], ("a", "b", "type")),
    ("Example3", [("a > 0", BASIC), ("b > 0", BASIC)], ("a", "b")),
    ("Example4", [("type != null", NOT_RETURN)], ("type",)),
    ("Example5", [("b > 0", TRY_CATCH)], ("b",)),
])
def test_listing_key_conditions(name, expected, kcvs):
    e = listing_summaries()[f"{LISTINGS}.{name}"]
    assert conds(e) == expected
    assert sorted(e.kcv_names) == sorted(kcvs)
    assert e.type == "demo.framework.MyException"


def test_listing_five_rethrow_message_has_symbolic_tail():
    e = listing_summaries()[f"{LISTINGS}.Example5"]
    assert e.message.alternatives == (("invalid type: ", SYMBOLIC),)
    assert e.message.matches("invalid type: foo")


def test_switch_case_becomes_equality():
    e = listing_summaries()["demo.framework.SwitchListing.Example1"]
    assert conds(e) == [('type == "x"', BASIC)]


def test_called_thrower_gets_its_own_summary():
    e = listing_summaries()[f"{LISTINGS}.throwExpCall"]
    assert conds(e) == [("p > 0", BASIC)]
    assert e.type == "java.lang.IllegalArgumentException"


def test_handler_call_is_a_sink():
    (e,) = extract_ets(parse_program(HANDLER))
    assert e.sink.kind == "handler" and "handler" in e.flags
    assert conds(e) == [("n < 0", BASIC)]
    assert e.message.matches("negative")


def test_refcount_variant_key_vars_and_api():
    (e,) = extract_ets(parse_program(REFCOUNT))
    # [DERIVED] r = base - count; base is the field, count is parameter 0, f forwards its own parameter 0
    assert {x.key for x in e.external_vars} == {"p.fw.Closable.mRefCount", "p.fw.Closable.acquireReference@0"}
    assert {(k.mtd, k.loc) for k in e.key_vars} == {("p.fw.Closable.acquireReference", 0), ("p.fw.Closable.f", 0)}
    assert [(a.mtd, a.dpt) for a in e.key_apis] == [("p.fw.Closable.release", 1)]
    assert classify_ets(e) == ETSRelatedType.KEY_VAR_AND_KEY_API


def test_motivating_summary():
    case = load_case(CORPUS / "motivating")
    assert len(case.store) == 1
    e = case.ets
    apis = {(a.mtd.rsplit(".", 1)[1], a.dpt) for a in e.key_apis}
    assert apis == {("releaseReference", 1), ("close", 2)}  # [PAPER]
    assert e.key_vars == ()
    assert classify_ets(e) == ETSRelatedType.ONLY_KEY_API
    assert conds(e) == [("mRefCount <= 0", BASIC)]


def test_threshold_caps_key_conditions():
    p = load_program(FIXTURES / "listings.mir")
    sig = f"{LISTINGS}.Example2"
    capped = {e.signaler: e for e in extract_ets(p, ExtractConfig(threshold=1))}[sig]
    free = {e.signaler: e for e in extract_ets(p, ExtractConfig(threshold=None))}[sig]
    assert len(capped.key_conds) <= 1 < len(free.key_conds)


def test_store_round_trip_is_byte_stable():
    store = extract_ets(load_program(FIXTURES / "listings.mir"))
    text = dumps_store(store)
    again = loads_store(text)
    assert dumps_store(again) == text
    assert [e.id for e in again] == [e.id for e in store]


def test_store_rejects_foreign_files():
    with pytest.raises(StoreError):
        loads_store('{"format": "other"}\n')
    with pytest.raises(StoreError):
        loads_store("")


def test_parallel_extraction_matches_serial():
    p = load_program(FIXTURES / "listings.mir")
    assert dumps_store(extract_ets(p, ExtractConfig(workers=4))) == dumps_store(extract_ets(p))


def instantiate(pattern: MessagePattern, rng: random.Random) -> str:
    alt = rng.choice(pattern.alternatives)
    alphabet = string.ascii_letters + string.digits + " .:()[]*+?$^\\|{}\n"
    return "".join(seg if seg is not SYMBOLIC else "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 12)))
                   for seg in alt)


def fixture_summaries():
    out = list(extract_ets(load_program(FIXTURES / "listings.mir")))
    for root in (CORPUS, EP):
        for d in sorted(root.iterdir()):
            out += list(load_case(d).store)
    return out


def test_symbolic_messages_accept_random_instantiations():
    rng = random.Random(7)
    symbolic = [e for e in fixture_summaries() if any(SYMBOLIC in a for a in e.message.alternatives)]
    assert symbolic
    for e in symbolic:
        for _ in range(50):
            msg = instantiate(e.message, rng)
            assert e.message.matches(msg), (e.signaler, msg)


def test_table_message_matches_motivating_pattern():
    case = load_case(CORPUS / "motivating")
    msg = ("attempt to re-open an already-closed object: SQLiteProgram: "
           "SELECT count(_id) FROM cg_caches WHERE reason >= 1")
    assert case.ets.message.matches(msg)
    assert not case.ets.message.matches("attempt to open")


@given(st.lists(st.one_of(st.text(max_size=6), st.none()), min_size=1, max_size=5), st.randoms())
def test_pattern_matches_its_instantiations(segments, rng):
    pat = MessagePattern((tuple(segments),))
    assert pat.matches(instantiate(pat, rng))


def external_set(e):
    return {(x.kind, x.owner, x.loc, x.field_name, x.kcv) for x in e.external_vars}


def oracle_external_set(program, e):
    m = program.method(e.signaler)
    out = set()
    for ref in e.key_cond_vars:
        for o in oracle_origins(program, m, ref.name, ref.at):
            if o[0] == "param":
                out.add(("param", m.sig, o[1], None, ref.name))
            else:
                out.add(("field", o[1], None, o[2], ref.name))
    return out


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=0, max_value=100_000))
def test_external_vars_match_path_oracle(seed):
    p = parse_program(random_program(seed))
    for e in extract_ets(p):
        assert external_set(e) == oracle_external_set(p, e), (seed, e.signaler)
