"""Command line: etsx {extract,match,locate,cis,explain,eval}."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .cis import build_all
from .crash import CrashReportError, MatchError, best_match_ets, parse_crash_report
from .ets.extract import extract_ets
from .ets.model import ExtractConfig
from .ets.store import StoreError, dumps_store, ets_from_json, ets_to_json, load_store, load_stores, save_store
from .evaluate import CorpusError, EvalConfig, run_corpus
from .explain.backends import BackendError, MockBackend, RemoteBackend, ReplayBackend
from .explain.report import generate_report
from .ir.model import IRError
from .ir.text import load_program
from .localize import ABLATIONS, CandidateRanking, LocateConfig, locate


def _write(path: str | None, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def _read_stores(path: str):
    p = Path(path)
    stores = load_stores(p) if p.is_dir() else [load_store(p)]
    if not stores:
        raise StoreError(f"no *.jsonl stores in {p}")
    return stores


def _ablations(values) -> frozenset:
    out = set()
    for v in values or ():
        out.update(x.strip() for x in v.split(",") if x.strip())
    bad = out - set(ABLATIONS)
    if bad:
        raise SystemExit(f"etsx: unknown ablation {', '.join(sorted(bad))}")
    return frozenset(out)


def cmd_extract(a) -> int:
    program = load_program(a.framework)
    threshold = None if a.threshold == "none" else int(a.threshold)
    store = extract_ets(program, ExtractConfig(threshold=threshold, workers=a.workers))
    if a.out in (None, "-"):
        sys.stdout.write(dumps_store(store))
    else:
        save_store(store, a.out)
    for w in store.warnings:
        logging.warning(w)
    print(f"{len(store.entries)} summaries", file=sys.stderr)
    return 0


def cmd_match(a) -> int:
    program = load_program(a.program) if a.program else None
    report = parse_crash_report(Path(a.report).read_text(encoding="utf-8"), program)
    m = best_match_ets(report, _read_stores(a.stores), a.version)
    _write(a.out, _dump({"related_type": str(m.related_type), "low_confidence": m.low_confidence,
                         "candidates": m.candidates, "notes": list(m.notes), "ets": ets_to_json(m.ets)}))
    return 0


def cmd_locate(a) -> int:
    program = load_program(a.program)
    text = Path(a.report).read_text(encoding="utf-8")
    report = parse_crash_report(text, program)
    m = best_match_ets(report, _read_stores(a.ets_store), a.version)
    ranking = locate(program, report, m.ets, LocateConfig(ablate=_ablations(a.ablate)))
    out = ranking.to_json()
    out["report"] = report.text()
    out["ets"] = ets_to_json(m.ets)
    _write(a.out, _dump(out))
    return 0


def _load_ranking(path: str, program):
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    if "report" not in d or "ets" not in d:
        raise SystemExit("etsx: ranking JSON lacks the report/ets written by `etsx locate`")
    return CandidateRanking.from_json(d), parse_crash_report(d["report"], program), ets_from_json(d["ets"])


def cmd_cis(a) -> int:
    program = load_program(a.program)
    ranking, report, ets = _load_ranking(a.ranking, program)
    cises, errors = build_all(ranking, report, ets, program, a.top_k or None, a.workers)
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, c in enumerate(cises, 1):
        (out / f"{i:02d}.json").write_text(_dump(c.to_json()), encoding="utf-8")
    for e in errors:
        logging.warning(e)
    print(f"{len(cises)} summaries written to {out}", file=sys.stderr)
    return 0


def cmd_explain(a) -> int:
    program = load_program(a.program)
    ranking, report, ets = _load_ranking(a.ranking, program)
    cises, _ = build_all(ranking, report, ets, program, a.top_k or None)
    backend = None
    if not a.naive:
        if a.backend == "mock":
            backend = MockBackend.from_file(a.replies) if a.replies else MockBackend()
        elif a.backend == "replay":
            if not a.cassette:
                raise SystemExit("etsx: --backend replay needs --cassette")
            backend = ReplayBackend(a.cassette)
        else:
            backend = RemoteBackend()
    rep = generate_report(report, ets, ranking, cises, backend, program, naive=a.naive, max_turns=a.max_turns,
                          top_k=a.top_k or None)
    if a.out:
        _write(a.out + ".json", _dump(rep.to_json()))
        _write(a.out + ".txt", rep.to_text())
    else:
        sys.stdout.write(rep.to_text())
    return 0


def cmd_eval(a) -> int:
    cfg = EvalConfig(ablate=_ablations(a.ablate), explain=a.explain or a.backend is not None,
                     backend=a.backend or "mock", workers=a.workers, top_k=a.top_k)
    result = run_corpus(a.corpus, cfg)
    if a.out:
        _write(a.out, result.dumps())
        _write(str(Path(a.out).with_suffix(".txt")), result.table())
    else:
        sys.stdout.write(result.table())
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="etsx", description="Exception summaries, crash localization and explanation.")
    p.add_argument("--version", action="version", version=f"etsx {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("extract", help="summarize every framework exception")
    s.add_argument("--framework", required=True, help="mini-IR program")
    s.add_argument("--out", help="store file (.jsonl); stdout if omitted")
    s.add_argument("--threshold", default="3", help="keyCond cap, or 'none'")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(fn=cmd_extract)

    s = sub.add_parser("match", help="pick the summary that explains a crash")
    s.add_argument("--report", required=True)
    s.add_argument("--stores", required=True, help="store file or directory of *.jsonl stores")
    s.add_argument("--version")
    s.add_argument("--program", help="validate stack roles against this program")
    s.add_argument("--out")
    s.set_defaults(fn=cmd_match)

    s = sub.add_parser("locate", help="rank buggy-method candidates")
    s.add_argument("--program", required=True)
    s.add_argument("--report", required=True)
    s.add_argument("--ets-store", required=True)
    s.add_argument("--version")
    s.add_argument("--ablate", action="append", help=f"one or more of {','.join(ABLATIONS)}")
    s.add_argument("--out")
    s.set_defaults(fn=cmd_locate)

    s = sub.add_parser("cis", help="build candidate information summaries")
    s.add_argument("--ranking", required=True, help="JSON written by `etsx locate`")
    s.add_argument("--program", required=True)
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--top-k", type=int, default=5, help="0 for all candidates")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(fn=cmd_cis)

    s = sub.add_parser("explain", help="write the explanation report")
    s.add_argument("--ranking", required=True)
    s.add_argument("--program", required=True)
    s.add_argument("--backend", choices=("mock", "replay", "remote"), default="mock")
    s.add_argument("--replies", help="mock replies JSON")
    s.add_argument("--cassette", help="replay cassette JSON")
    s.add_argument("--naive", action="store_true", help="template text only, no backend")
    s.add_argument("--max-turns", type=int, default=3)
    s.add_argument("--top-k", type=int, default=5)
    s.add_argument("--out", help="output path without extension (.json and .txt are written)")
    s.set_defaults(fn=cmd_explain)

    s = sub.add_parser("eval", help="run a labeled corpus and report metrics")
    s.add_argument("--corpus", required=True)
    s.add_argument("--ablate", action="append")
    s.add_argument("--backend", choices=("mock", "replay", "remote"), help="also build explanations")
    s.add_argument("--explain", action="store_true", help="build explanations (mock backend by default)")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--top-k", type=int, default=5)
    s.add_argument("--out", help="JSON report; an aligned text table goes next to it")
    s.set_defaults(fn=cmd_eval)
    return p


def main(argv=None) -> int:
    a = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="etsx: %(message)s")
    try:
        return a.fn(a)
    except (IRError, CrashReportError, StoreError, CorpusError, BackendError) as e:
        print(f"etsx: {e}", file=sys.stderr)
        return 2
    except MatchError as e:
        print(f"etsx: {e} {json.dumps(e.diagnostics, sort_keys=True)}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
