"""Candidate information summaries: code context, explanation pattern, key elements.

Explanation patterns:

    EP1  the candidate's class inherits a method that throws unconditionally
    EP2  a wrong value travels from the candidate into a keyVar
    EP3  the candidate modifies a field or object the keyVar depends on
    EP4  the candidate invokes a keyAPI that changes a keyField
"""

from __future__ import annotations

import hashlib
import logging
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .crash import CrashReport, StackRoles, assign_roles
from .ets.model import ETS
from .ir.callgraph import CallGraph, build_cg
from .ir.model import APPLICATION, Program, Var
from .localize import S1, S2, S3, S4, STACK, Candidate, CandidateRanking, Evidence

log = logging.getLogger(__name__)

EP1, EP2, EP3, EP4 = "EP1", "EP2", "EP3", "EP4"

REQUIRED = {
    EP1: ("Signaler", "InheritancePath"),
    EP2: ("Signaler", "CrashAPI", "KeyVariable", "CallChain_Crash"),
    EP3: ("Signaler", "CrashAPI", "KeyVariable", "Modified", "EntryAPI", "CallChain_Crash"),
    EP4: ("KeyField", "KeyAPI", "CrashAPI", "CallChain_KeyAPI"),
}


class CISError(ValueError):
    pass


@dataclass(frozen=True)
class ChainLink:
    method: str
    var: str | None = None

    def __str__(self) -> str:
        return f"{self.method} [{self.var}]" if self.var else self.method


@dataclass
class KeyInfo:
    ep: str
    elements: dict
    basis: str  # strategy the pattern was derived from
    evidence: Evidence | None = None
    warnings: list[str] = field(default_factory=list)
    candidate: str = ""

    def chain(self) -> list[ChainLink]:
        return self.elements.get("CallChain_Crash") or self.elements.get("CallChain_KeyAPI") or []

    def named_sigs(self) -> list[str]:
        out = [l.method for l in self.chain()]
        for k in ("Signaler", "CrashAPI", "KeyAPI", "EntryAPI"):
            if self.elements.get(k):
                out.append(self.elements[k])
        return list(dict.fromkeys(out))

    def to_json(self) -> dict:
        el = {}
        for k, v in self.elements.items():
            if isinstance(v, list) and v and isinstance(v[0], ChainLink):
                el[k] = [{"method": l.method, "var": l.var} for l in v]
            elif isinstance(v, tuple):
                el[k] = list(v)
            else:
                el[k] = v
        return {"ep": self.ep, "candidate": self.candidate, "basis": self.basis, "elements": el, "warnings": list(self.warnings)}


@dataclass
class CIS:
    candidate: str
    crash_id: str
    code: dict  # {"app": {sig: src}, "framework": {sig: src}, "unavailable": [sig]}
    key_info: KeyInfo
    score: float = 0.0
    stack_index: int | None = None
    constraint: object | None = None  # FrameworkConstraint, attached by the explain step

    @property
    def ep(self) -> str:
        return self.key_info.ep

    def snippet(self, sig: str) -> str | None:
        return self.code["app"].get(sig) or self.code["framework"].get(sig)

    def to_json(self) -> dict:
        return {
            "id": {"candidate": self.candidate, "crash": self.crash_id},
            "code": {"app": dict(sorted(self.code["app"].items())),
                     "framework": dict(sorted(self.code["framework"].items())),
                     "unavailable": sorted(self.code["unavailable"])},
            "keyInfo": self.key_info.to_json(),
            "constraint": self.constraint.to_json() if self.constraint is not None else None,
        }


def crash_id(report: CrashReport) -> str:
    return hashlib.sha256(report.text().encode()).hexdigest()[:12]


# -- code context -----------------------------------------------------------------

def collect_code_context(candidate: str, report: CrashReport, ets: ETS, program: Program,
                         key_info: KeyInfo | None = None) -> dict:
    sigs = list(report.stack)
    sigs.append(ets.signaler)
    sigs += [a.mtd for a in ets.key_apis]
    sigs += [k.mtd for k in ets.key_vars]
    sigs.append(candidate)
    if key_info is not None:
        sigs += key_info.named_sigs()
    code = {"app": {}, "framework": {}, "unavailable": []}
    for sig in dict.fromkeys(sigs):
        m = program.method(sig)
        src = m.source if m is not None else None
        if not src:
            code["unavailable"].append(sig)
            continue
        part = "app" if program.partition_of(sig) == APPLICATION else "framework"
        code[part][sig] = src
    return code


# -- EP classification ---------------------------------------------------------------

def _ep_of(ev: Evidence) -> str | None:
    if ev.strategy == S1:
        return EP1
    if ev.strategy == S4:
        return EP4
    if ev.strategy in (S2, S3):
        return EP3 if ev.kind in ("field", "object") else EP2
    return None


def _best_evidence(c: Candidate) -> Evidence | None:
    evs = [e for e in c.evidence if _ep_of(e) is not None]
    if not evs:
        return None
    return min(evs, key=lambda e: (-(e.score if e.score is not None else 0.0), len(e.chain),
                                   _rank_ep(_ep_of(e))))


def _rank_ep(ep: str) -> int:
    return (EP3, EP2, EP4, EP1).index(ep)


def classify_ep(candidate: Candidate, ets: ETS | None = None, report: CrashReport | None = None,
                warnings: list | None = None) -> str:
    """One EP tag per candidate; stack-default and expansion candidates fall back to EP2."""
    best = _best_evidence(candidate)
    if best is None:
        return EP2
    eps = {_ep_of(e) for e in candidate.evidence} - {None}
    if len(eps) > 1 and warnings is not None:
        warnings.append(f"{candidate.sig}: evidence supports {sorted(eps)}; using {_ep_of(best)}")
    return _ep_of(best)


# -- key elements ---------------------------------------------------------------------

def _stack_edges(report: CrashReport) -> set[tuple[str, str]]:
    st = report.stack
    return {(st[i + 1], st[i]) for i in range(len(st) - 1)}


def check_chain(chain: list[str], cg: CallGraph, report: CrashReport) -> None:
    """Every adjacent pair must be a call edge, in either direction (returns flow upward)."""
    extra = _stack_edges(report)
    for a, b in zip(chain, chain[1:]):
        if cg.has_edge(a, b) or cg.has_edge(b, a) or (a, b) in extra or (b, a) in extra:
            continue
        raise CISError(f"broken call chain at {a} -> {b}")


def _framework_tail(report: CrashReport, roles: StackRoles) -> list[str]:
    """crashAPI down to the signaler, in call order."""
    return list(reversed(report.stack[: roles.boundary + 1]))


def _param_names(program: Program, sig: str, locs) -> list[str]:
    m = program.method(sig)
    if m is None:
        return []
    return [m.params[i].name for i in sorted(set(locs)) if i < len(m.params)]


def _crash_api_locs(ets: ETS, program: Program, roles: StackRoles) -> list[int]:
    locs = [k.loc for k in ets.key_vars if k.mtd == roles.crash_api]
    if locs:
        return sorted(set(locs))
    m = program.method(roles.crash_api)
    return list(range(len(m.params))) if m is not None else []


def _site_actuals(program: Program, roles: StackRoles, locs) -> list[str]:
    m = program.method(roles.crash_method)
    out = []
    if m is None:
        return out
    for s in m.body:
        if s.kind == "call" and s.callee_name == roles.crash_api.rsplit(".", 1)[1]:
            for i in locs:
                if i < len(s.args):
                    out.append(s.args[i].name if isinstance(s.args[i], Var) else str(s.args[i]))
    return list(dict.fromkeys(out))


def _annotate(chain: list[str], ev: Evidence | None, ets: ETS, program: Program,
              roles: StackRoles, locs: list[int]) -> list[ChainLink]:
    known = dict(ev.vars) if ev is not None else {}
    out = []
    for sig in chain:
        var = known.get(sig)
        if var is None:
            if sig == roles.crash_method:
                var = ", ".join(_site_actuals(program, roles, locs)) or None
            elif sig == roles.crash_api:
                var = ", ".join(_param_names(program, sig, locs)) or None
            else:
                kv = [k.loc for k in ets.key_vars if k.mtd == sig]
                names = _param_names(program, sig, kv)
                if not names and sig == ets.signaler:
                    names = list(ets.kcv_names)
                var = ", ".join(names) or None
        out.append(ChainLink(sig, var))
    return out


def _directed_path(g: CallGraph, src: str, dst: str) -> list[str] | None:
    prev = {src: None}
    q = deque([src])
    while q:
        cur = q.popleft()
        if cur == dst:
            path = []
            while cur is not None:
                path.append(cur)
                cur = prev[cur]
            return path[::-1]
        for n in sorted(g.callees(cur)):
            if n not in prev:
                prev[n] = cur
                q.append(n)
    return None


def _fallback_chain(candidate: str, report: CrashReport, roles: StackRoles, cg: CallGraph) -> list[str]:
    st = report.stack
    if candidate in st:
        i = st.index(candidate)
        return list(reversed(st[: i + 1]))
    g = cg.with_edges(_stack_edges(report))
    path = _directed_path(g, candidate, roles.crash_method)
    if path is None:
        raise CISError(f"no call path from {candidate} to {roles.crash_method}")
    return path + _framework_tail(report, roles)


def extract_key_elements(candidate: Candidate, ep: str, ets: ETS, cg: CallGraph, report: CrashReport,
                         program: Program, roles: StackRoles | None = None) -> KeyInfo:
    roles = roles or assign_roles(report, program)
    ev = _best_evidence(candidate)
    if ev is not None and _ep_of(ev) != ep:
        ev = next((e for e in candidate.evidence if _ep_of(e) == ep), None)
    basis = ev.strategy if ev is not None else (candidate.strategies[0] if candidate.strategies else STACK)
    warnings: list[str] = []

    if ep == EP1:
        if ev is None or not ev.target:
            raise CISError(f"{candidate.sig}: EP1 needs inheritance evidence")
        el = {"Signaler": ets.signaler, "InheritancePath": ev.target.split(" -> ")}
        return KeyInfo(ep, el, basis, ev, warnings, candidate.sig)

    if ep == EP4:
        chain = list(ev.chain)
        check_chain(chain, cg, report)
        fields = sorted({a.key_field for a in ets.key_apis if a.mtd == ev.api})
        el = {"KeyField": ", ".join(fields), "KeyAPI": ev.api, "CrashAPI": roles.crash_api,
              "CallChain_KeyAPI": [ChainLink(s) for s in chain]}
        return KeyInfo(ep, el, basis, ev, warnings, candidate.sig)

    locs = _crash_api_locs(ets, program, roles)
    tail = _framework_tail(report, roles)
    if ev is None:
        chain = _fallback_chain(candidate.sig, report, roles, cg)
    elif ep == EP3:
        chain = list(ev.chain[1:]) + tail  # starts at the entry API that reads the value
    else:
        chain = list(ev.chain) + tail
    check_chain(chain, cg, report)
    links = _annotate(chain, ev, ets, program, roles, locs)
    el = {"Signaler": ets.signaler, "CrashAPI": roles.crash_api,
          "KeyVariable": _param_names(program, roles.crash_api, locs), "CallChain_Crash": links}
    if ep == EP3:
        kinds = {e.kind for e in candidate.evidence if _ep_of(e) == EP3}
        if len(kinds) > 1:
            warnings.append(f"{candidate.sig}: both field and object modification; using {ev.kind}")
        el["Modified"] = {"kind": ev.kind, "target": ev.target}
        el["EntryAPI"] = chain[0]
    return KeyInfo(ep, el, basis, ev, warnings, candidate.sig)


def check_key_info(ki: KeyInfo) -> None:
    missing = [k for k in REQUIRED[ki.ep] if k not in ki.elements or ki.elements[k] in (None, "")]
    if missing:
        raise CISError(f"{ki.ep} key elements missing: {', '.join(missing)}")


# -- ordering --------------------------------------------------------------------------

def _order_key(c: CIS, stack: tuple[str, ...]):
    ki = c.key_info
    on_stack = c.candidate in stack
    idx = stack.index(c.candidate) if on_stack else None
    if ki.basis in (STACK, "b1"):
        return (3, 0 if on_stack else 1, idx if on_stack else _attach(ki, stack), c.candidate)
    if ki.ep == EP1:
        return (0, len(ki.elements["InheritancePath"]), 0, c.candidate)
    if ki.ep == EP4:
        ev = ki.evidence
        return (2, len(ev.chain) + (ev.dpt or 0), 0, c.candidate)
    if on_stack:
        return (1, 0, idx, c.candidate)
    return (1, 1, _attach(ki, stack), len(ki.chain()), c.candidate)


def _attach(ki: KeyInfo, stack: tuple[str, ...]) -> int:
    """Stack position of the latest-explained stack method the candidate connects to."""
    idx = [stack.index(l.method) for l in ki.chain() if l.method in stack]
    return max(idx) if idx else len(stack)


def explanation_order(cises: list[CIS], report: CrashReport) -> list[CIS]:
    """EP1 by inheritance closeness, then keyVar-related candidates bottom-up from the crash
    (stack first, off-stack after), then keyAPI callers, then stack-default fallbacks."""
    return sorted(cises, key=lambda c: _order_key(c, report.stack))


# -- building ---------------------------------------------------------------------------

def build_cis(candidate: Candidate, report: CrashReport, ets: ETS, program: Program,
              cg: CallGraph | None = None, roles: StackRoles | None = None) -> CIS:
    cg = cg or build_cg(program)
    roles = roles or assign_roles(report, program)
    warnings: list[str] = []
    ep = classify_ep(candidate, ets, report, warnings)
    ki = extract_key_elements(candidate, ep, ets, cg, report, program, roles)
    ki.warnings[:0] = warnings
    check_key_info(ki)
    code = collect_code_context(candidate.sig, report, ets, program, ki)
    idx = report.stack.index(candidate.sig) if candidate.sig in report.stack else None
    return CIS(candidate.sig, crash_id(report), code, ki, candidate.score, idx)


def build_all(ranking: CandidateRanking, report: CrashReport, ets: ETS, program: Program,
              top_k: int | None = 5, workers: int = 1) -> tuple[list[CIS], list[str]]:
    """CIS for the top-k candidates in explanation order, plus per-candidate errors."""
    cg = build_cg(program)
    roles = assign_roles(report, program)
    cands = ranking.candidates[:top_k] if top_k else ranking.candidates

    def one(c):
        try:
            return build_cis(c, report, ets, program, cg, roles), None
        except CISError as e:
            log.warning("CIS for %s failed: %s", c.sig, e)
            return None, f"{c.sig}: {e}"

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(one, cands))
    else:
        results = [one(c) for c in cands]
    built = [r for r, _ in results if r is not None]
    errors = [e for _, e in results if e is not None]
    return explanation_order(built, report), errors
