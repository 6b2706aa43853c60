"""The ten acceptance criteria, one test each; every test prints a PASS/FAIL line."""

from __future__ import annotations

import json
import random
import time

import pytest

from conftest import CORPUS, EP, FIXTURES, Case
from etsx.cis import EP1, EP2, EP3, EP4, REQUIRED, build_all
from etsx.cli import main as cli
from etsx.crash import ETSRelatedType, classify_ets
from etsx.ets import BASIC, NOT_RETURN, SYMBOLIC, TRY_CATCH, extract_ets
from etsx.evaluate import bundled_corpus, mrr, rank_sum, run_corpus, with_ablation
from etsx.explain import FrameworkConstraint, parse_constraint, representative, static_context, verify
from etsx.ir import load_program, parse_program
from test_ets import instantiate, oracle_external_set, external_set
from oracles import random_program

CLEAR = "cgeo.geocaching.DataStore$PreparedStmt.clearPreparedStmts"


@pytest.fixture
def report_line(capsys):
    def emit(n: int, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\n[criterion {n:2d}] {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return emit


def test_c01_motivating_end_to_end(report_line):
    t0 = time.perf_counter()
    case = Case(CORPUS / "motivating")
    elapsed = time.perf_counter() - t0
    apis = {(a.mtd.rsplit(".", 1)[1], a.dpt) for a in case.ets.key_apis}
    top3 = case.ranking.sigs()[:3]
    through_close = any("android.database.sqlite.SQLiteClosable.close" in e.chain
                        for e in case.ranking.get(CLEAR).evidence) if CLEAR in top3 else False
    ok = (len(case.store) == 1 and apis == {("releaseReference", 1), ("close", 2)}
          and case.ets.key_vars == () and classify_ets(case.ets) == ETSRelatedType.ONLY_KEY_API
          and CLEAR in top3 and through_close and elapsed < 1.0)
    report_line(1, ok, f"keyAPIs={sorted(apis)} rank={case.ranking.sigs().index(CLEAR) + 1} time={elapsed:.3f}s")


LISTING_EXPECT = {
    "Example1": [("a == 0", BASIC)],
    "Example2": [("a < 0", BASIC), ("b < 0", BASIC), ("type != null", BASIC)],
    "Example3": [("a > 0", BASIC), ("b > 0", BASIC)],
    "Example4": [("type != null", NOT_RETURN)],
    "Example5": [("b > 0", TRY_CATCH)],
}
LISTING_KCV = {"Example1": {"a"}, "Example2": {"a", "b", "type"}, "Example3": {"a", "b"},
               "Example4": {"type"}, "Example5": {"b"}}


def test_c02_listings(report_line):
    got = {e.signaler.rsplit(".", 1)[1]: e for e in extract_ets(load_program(FIXTURES / "listings.mir"))
           if e.signaler.startswith("demo.framework.Listings.Example")}
    bad = [n for n, exp in LISTING_EXPECT.items()
           if n not in got or sorted((str(k), k.tag) for k in got[n].key_conds) != exp
           or set(got[n].kcv_names) != LISTING_KCV[n]]
    report_line(2, not bad, f"{len(LISTING_EXPECT) - len(bad)}/5 listings exact" + (f", wrong: {bad}" if bad else ""))


EP_EXPECT = [("ep1_inherit", EP1), ("ep2_value", EP2), ("ep3_field", EP3), ("ep3_object", EP3), ("ep4_keyapi", EP4)]


def test_c03_ep_fixtures(report_line):
    bad = []
    for name, ep in EP_EXPECT:
        case = Case(EP / name)
        truth = json.loads((case.path / "truth.json").read_text())["truth"]
        cises, _ = build_all(case.ranking, case.report, case.ets, case.program, top_k=None)
        c = {x.candidate: x for x in cises}.get(truth)
        if c is None or c.ep != ep or any(c.key_info.elements.get(k) in (None, "") for k in REQUIRED[ep]):
            bad.append(name)
    report_line(3, not bad, f"{len(EP_EXPECT) - len(bad)}/{len(EP_EXPECT)} fixtures classified with all key elements")


def test_c04_message_regex(report_line):
    rng = random.Random(4)
    summaries = list(extract_ets(load_program(FIXTURES / "listings.mir")))
    for root in (CORPUS, EP):
        for d in sorted(root.iterdir()):
            summaries += list(extract_ets(load_program(d / "program.mir")))
    symbolic = [e for e in summaries if any(SYMBOLIC in a for a in e.message.alternatives)]
    failures = sum(1 for e in symbolic for _ in range(50) if not e.message.matches(instantiate(e.message, rng)))
    mot = Case(CORPUS / "motivating").ets
    table_msg = ("attempt to re-open an already-closed object: SQLiteProgram: "
                 "SELECT count(_id) FROM cg_caches WHERE reason >= 1")
    ok = bool(symbolic) and failures == 0 and mot.message.matches(table_msg)
    report_line(4, ok, f"{len(symbolic)} symbolic patterns x 50 instantiations, {failures} failures")


def test_c05_verifier_battery(report_line):
    case = Case(EP / "ep2_value")
    cises, _ = build_all(case.ranking, case.report, case.ets, case.program)
    ki = {c.candidate: c for c in cises}["demo.app.A2.caller"].key_info
    ctx = static_context(case.ets, case.program, ki)
    anchor = "demo.fw.F2.crashAPI"

    def run(text):
        c = FrameworkConstraint(anchor, parse_constraint(text, anchor).clauses)
        o = verify(c, case.program, ctx)
        return o.format.ok, o.source.ok, o.static.ok

    fmt = run("⟨crashParameter⟩ != -1")
    name_type = run("⟨Parameter 0: String crashParameter⟩ ≠ -1")
    off_chain = run("⟨Parameter 1: long otherParameter⟩ > 0")
    ok = fmt[0] is False and name_type == (True, False, True) and off_chain == (True, True, False)
    report_line(5, ok, f"format={fmt} name/type={name_type} off-chain={off_chain}")


def test_c06_representative_lattice(report_line):
    rng = random.Random(6)
    violations = 0
    for _ in range(1000):
        fam = [frozenset(x for x in "abcdefg" if rng.random() < 0.35) for _ in range(rng.randint(1, 5))]
        if rng.random() < 0.4:
            fam.insert(rng.randrange(len(fam) + 1), frozenset().union(*fam))
        t = representative(fam)
        bounds = [i for i, s in enumerate(fam) if all(o <= s for o in fam)]
        if t != (bounds[0] if bounds else None):
            violations += 1
    report_line(6, violations == 0, f"1000 families, {violations} violations")


def test_c07_metrics_oracle(report_line):
    m = mrr([1, 2, 4, None])
    sums = [rank_sum([(None, n)]) for n in (19, 20, 21)]
    ok = abs(m - 0.4375) <= 1e-12 and sums == [20, 21, 22]
    report_line(7, ok, f"mrr={m} rank_sum(19,20,21)={sums}")


def test_c08_ablation_directions(report_line):
    base = run_corpus(bundled_corpus())
    b1 = run_corpus(bundled_corpus(), with_ablation(base.config, "b1"))
    b3 = run_corpus(bundled_corpus(), with_ablation(base.config, "b3"))
    b5 = run_corpus(bundled_corpus(), with_ablation(base.config, "b5"))
    b5_truth = {c.name: c for c in b5.cases}["motivating"]
    ok = (b1.summary.candi_avg > base.summary.candi_avg and b5_truth.rank is None
          and b3.summary.mrr < base.summary.mrr)
    report_line(8, ok, f"CandiAvg {base.summary.candi_avg:.2f}->{b1.summary.candi_avg:.2f} (b1), "
                       f"keyAPI truth under b5: {b5_truth.rank}, MRR {base.summary.mrr:.4f}->{b3.summary.mrr:.4f} (b3)")


def test_c09_determinism(report_line, tmp_path):
    outs = []
    for i, workers in enumerate((1, 1, 4)):
        out = tmp_path / f"run{i}.json"
        assert cli(["eval", "--corpus", str(CORPUS), "--explain", "--workers", str(workers), "--out", str(out)]) == 0
        outs.append(out.read_bytes() + out.with_suffix(".txt").read_bytes())
    ok = outs[0] == outs[1] == outs[2]
    report_line(9, ok, "serial, serial and 4-worker eval outputs " + ("identical" if ok else "differ"))


def test_c10_brute_force_external_vars(report_line):
    t0 = time.perf_counter()
    mismatches = total = 0
    for seed in range(200):
        p = parse_program(random_program(seed))
        assert len(p.classes) <= 3
        for e in extract_ets(p):
            total += 1
            if external_set(e) != oracle_external_set(p, e):
                mismatches += 1
    elapsed = time.perf_counter() - t0
    report_line(10, mismatches == 0 and elapsed < 60,
                f"200 seeds, {total} summaries, {mismatches} mismatches, {elapsed:.2f}s")
