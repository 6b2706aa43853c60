"""Corpus runner and ranking metrics.

A corpus is a directory with one sub-directory per case::

    case/program.mir        app + framework
    case/crash.txt          the crash report
    case/truth.json         {"truth": "<method sig>", "category": "A" | "B" | "C"}
    case/program-*.mir      optional older framework versions (b7 keeps the lowest)
    case/mock.json          optional scripted replies for the mock backend
    case/cassette.json      optional recorded replies for the replay backend
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from .cis import build_all
from .crash import CrashReportError, MatchError, best_match_ets, parse_crash_report, version_key
from .ets.extract import extract_ets
from .ets.model import EtsStore, ExtractConfig
from .explain.backends import Backend, BackendError, MockBackend, RemoteBackend, ReplayBackend
from .explain.report import generate_report
from .ir.model import APPLICATION, IRError
from .ir.text import load_program
from .localize import ABLATIONS, CandidateRanking, LocateConfig, locate

log = logging.getLogger(__name__)

MISS_FLOOR = 20


# -- metrics --------------------------------------------------------------------------

def rank_of(ranking: Sequence[str] | CandidateRanking, truth: str) -> int | None:
    sigs = ranking.sigs() if isinstance(ranking, CandidateRanking) else list(ranking)
    return sigs.index(truth) + 1 if truth in sigs else None


def rank_sum(results: Iterable[tuple[int | None, int]], floor: int = MISS_FLOOR) -> int:
    """Sum of ranks; a miss counts max(candidates + 1, floor). Items are (rank, candidates)."""
    return sum(r if r is not None else max(n + 1, floor) for r, n in results)


def mrr(ranks: Sequence[int | None]) -> float:
    if not ranks:
        raise ValueError("MRR of an empty corpus")
    return sum(1.0 / r for r in ranks if r is not None) / len(ranks)


def recall_at(ranks: Sequence[int | None], n: int) -> int:
    return sum(1 for r in ranks if r is not None and r <= n)


def candi_avg(sizes: Sequence[int]) -> float:
    return sum(sizes) / len(sizes) if sizes else 0.0


@dataclass
class MetricsSummary:
    cases: int
    r1: int
    r5: int
    r10: int
    mrr: float
    rank_sum: int
    candi_avg: float
    per_category: dict = field(default_factory=dict)

    def ratio(self, n: int) -> float:
        return {1: self.r1, 5: self.r5, 10: self.r10}[n] / self.cases if self.cases else 0.0

    def to_json(self) -> dict:
        return {"cases": self.cases, "R@1": self.r1, "R@5": self.r5, "R@10": self.r10,
                "R@1%": round(100 * self.ratio(1), 2), "R@5%": round(100 * self.ratio(5), 2),
                "R@10%": round(100 * self.ratio(10), 2), "MRR": round(self.mrr, 6),
                "RankSum": self.rank_sum, "CandiAvg": round(self.candi_avg, 4),
                "per_category": {k: v.to_json() for k, v in sorted(self.per_category.items())}}


def summarize(results: list["CaseResult"], by_category: bool = True) -> MetricsSummary:
    ranks = [r.rank for r in results]
    sizes = [r.n_candidates for r in results]
    s = MetricsSummary(len(results), recall_at(ranks, 1), recall_at(ranks, 5), recall_at(ranks, 10),
                       mrr(ranks) if ranks else 0.0, rank_sum(zip(ranks, sizes)), candi_avg(sizes))
    if by_category:
        for cat in sorted({r.category for r in results}):
            s.per_category[cat] = summarize([r for r in results if r.category == cat], False)
    return s


# -- corpus ------------------------------------------------------------------------------

@dataclass(frozen=True)
class LabeledCase:
    name: str
    path: Path
    truth: str
    category: str

    @property
    def program_path(self) -> Path:
        return self.path / "program.mir"

    @property
    def crash_path(self) -> Path:
        return self.path / "crash.txt"


class CorpusError(ValueError):
    pass


def load_corpus(directory) -> list[LabeledCase]:
    root = Path(directory)
    if not root.is_dir():
        raise CorpusError(f"{root} is not a directory")
    cases = []
    for d in sorted(p for p in root.iterdir() if p.is_dir()):
        missing = [f for f in ("program.mir", "crash.txt", "truth.json") if not (d / f).exists()]
        if missing:
            raise CorpusError(f"case {d.name}: missing {', '.join(missing)}")
        t = json.loads((d / "truth.json").read_text(encoding="utf-8"))
        if t.get("category") not in ("A", "B", "C"):
            raise CorpusError(f"case {d.name}: category must be A, B or C")
        cases.append(LabeledCase(d.name, d, t["truth"], t["category"]))
    if not cases:
        raise CorpusError(f"no cases under {root}")
    return cases


@dataclass(frozen=True)
class EvalConfig:
    ablate: frozenset = frozenset()
    explain: bool = False
    backend: str = "mock"
    workers: int = 1
    top_k: int = 5

    def __post_init__(self):
        bad = set(self.ablate) - set(ABLATIONS)
        if bad:
            raise ValueError(f"unknown ablation(s): {', '.join(sorted(bad))}")


@dataclass
class CaseResult:
    name: str
    category: str
    truth: str
    rank: int | None
    n_candidates: int
    candidates: list[str] = field(default_factory=list)
    related_type: str | None = None
    error: str | None = None
    explanation: dict | None = None

    def to_json(self) -> dict:
        d = {"name": self.name, "category": self.category, "truth": self.truth, "rank": self.rank,
             "candidates": self.candidates, "related_type": self.related_type, "error": self.error}
        if self.explanation is not None:
            d["explanation"] = self.explanation
        return d


def _stores(case: LabeledCase, program, extract_cfg: ExtractConfig, lowest_only: bool) -> list[EtsStore]:
    stores = [extract_ets(program, extract_cfg)]
    for extra in sorted(case.path.glob("program-*.mir")):
        stores.append(extract_ets(load_program(extra), extract_cfg))
    if lowest_only:
        stores = [min(stores, key=lambda s: version_key(s.framework_version))]
    return stores


def _backend(case: LabeledCase, kind: str) -> Backend:
    if kind == "mock":
        mock = case.path / "mock.json"
        return MockBackend.from_file(mock) if mock.exists() else MockBackend()
    if kind == "replay":
        return ReplayBackend(case.path / "cassette.json")
    if kind == "remote":
        return RemoteBackend()
    raise ValueError(f"unknown backend {kind!r}")


def run_case(case: LabeledCase, config: EvalConfig) -> CaseResult:
    res = CaseResult(case.name, case.category, case.truth, None, 0)
    try:
        program = load_program(case.program_path)
        if program.partition_of(case.truth) != APPLICATION:
            raise CorpusError(f"truth {case.truth} is not an application method")
        report = parse_crash_report(case.crash_path.read_text(encoding="utf-8"), program)
        threshold = None if "b2" in config.ablate else ExtractConfig.threshold
        stores = _stores(case, program, ExtractConfig(threshold=threshold), "b7" in config.ablate)
        match = best_match_ets(report, stores)
        ranking = locate(program, report, match.ets, LocateConfig(ablate=frozenset(config.ablate)))
    except (IRError, CrashReportError, MatchError, CorpusError, OSError, ValueError) as e:
        res.error = f"{type(e).__name__}: {e}"
        log.warning("case %s failed: %s", case.name, res.error)
        return res
    res.candidates = ranking.sigs()
    res.n_candidates = len(ranking)
    res.rank = rank_of(ranking, case.truth)
    res.related_type = str(ranking.related_type)
    if config.explain:
        try:
            cises, errors = build_all(ranking, report, match.ets, program, config.top_k)
            rep = generate_report(report, match.ets, ranking, cises, _backend(case, config.backend), program,
                                  top_k=config.top_k)
            res.explanation = rep.to_json()
            if errors:
                res.explanation["cis_errors"] = errors
        except (BackendError, ValueError) as e:
            res.explanation = {"error": f"{type(e).__name__}: {e}"}
    return res


@dataclass
class EvalResult:
    config: EvalConfig
    summary: MetricsSummary
    cases: list[CaseResult]

    def to_json(self) -> dict:
        return {"config": {"ablate": sorted(self.config.ablate), "explain": self.config.explain,
                           "backend": self.config.backend, "top_k": self.config.top_k},
                "metrics": self.summary.to_json(),
                "cases": [c.to_json() for c in self.cases],
                "failures": [c.name for c in self.cases if c.error]}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    def table(self) -> str:
        rows = [("case", "cat", "type", "rank", "cands")]
        for c in self.cases:
            rows.append((c.name, c.category, c.related_type or "-", str(c.rank) if c.rank else "miss",
                         str(c.n_candidates)))
        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
        lines = ["  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() for r in rows]
        s = self.summary
        lines += ["", f"R@1 {s.r1}/{s.cases}  R@5 {s.r5}/{s.cases}  R@10 {s.r10}/{s.cases}  "
                      f"MRR {s.mrr:.4f}  RankSum {s.rank_sum}  CandiAvg {s.candi_avg:.2f}"]
        return "\n".join(lines) + "\n"


def run_corpus(directory, config: EvalConfig | None = None) -> EvalResult:
    config = config or EvalConfig()
    cases = load_corpus(directory)
    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as ex:
            results = list(ex.map(lambda c: run_case(c, config), cases))
    else:
        results = [run_case(c, config) for c in cases]
    return EvalResult(config, summarize(results), results)


def bundled_corpus() -> Path:
    return Path(__file__).parent / "fixtures" / "corpus"


def with_ablation(config: EvalConfig, *flags: str) -> EvalConfig:
    return replace(config, ablate=frozenset(config.ablate) | set(flags))
