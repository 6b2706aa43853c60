"""Buggy-method candidates for a crash, ranked.

Each ETS-related type selects strategies:

    NoKeyCondVar     S1  subclasses that inherit the signaler unchanged
    NoExternalVar    S2  data tracing from every crashAPI argument
    OnlyKeyVar       S3  data tracing from the keyVar positions only
    OnlyKeyAPI       S4  application callers of keyAPIs
    KeyVarAndKeyAPI  S3 + S4

Application frames of the stack are always added with a fixed, lower score.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace

from .crash import CrashReport, ETSRelatedType, StackRoles, assign_roles, classify_ets
from .ets.model import ETS
from .ets.sinks import local_types
from .ir.callgraph import CallGraph, build_cg, call_depth, depths_from, dispatch_targets
from .ir.cfg import build_cfg
from .ir.defuse import DefUseIndex, UnknownVariable, is_param_def, param_loc
from .ir.model import APPLICATION, PRIMITIVES, MethodDef, Program, Var, expr_vars, package_prefix

S1, S2, S3, S4, STACK = "S1", "S2", "S3", "S4", "stack-default"
ABLATIONS = ("b1", "b2", "b3", "b4", "b5", "b6", "b7")

STRATEGIES = {
    ETSRelatedType.NO_KEY_COND_VAR: (S1,),
    ETSRelatedType.NO_EXTERNAL_VAR: (S2,),
    ETSRelatedType.ONLY_KEY_VAR: (S3,),
    ETSRelatedType.ONLY_KEY_API: (S4,),
    ETSRelatedType.KEY_VAR_AND_KEY_API: (S3, S4),
}


@dataclass(frozen=True)
class LocateConfig:
    init: float = 100.0
    penalty: float = 3.0
    stack_default_drop: float = 50.0
    prefix_len: int = 2
    caller_cap: int | None = 10
    trace_depth: int = 5
    ablate: frozenset = frozenset()

    @property
    def stack_default_score(self) -> float:
        return self.init - self.stack_default_drop


@dataclass(frozen=True)
class Evidence:
    strategy: str
    kind: str  # param | return | field | object | crash-site | keyapi | inherit | stack | cg
    chain: tuple[str, ...]  # candidate first
    vars: tuple[tuple[str, str], ...] = ()  # (method, variable) along the chain
    api: str | None = None
    dpt: int | None = None
    target: str | None = None  # modified field key or object variable
    hops: int | None = None  # b1 only: call-graph depth from the stack
    score: float | None = None  # filled in by locate

    def to_json(self) -> dict:
        d = {"strategy": self.strategy, "kind": self.kind, "chain": list(self.chain)}
        if self.vars:
            d["vars"] = [list(v) for v in self.vars]
        if self.api is not None:
            d["api"], d["dpt"] = self.api, self.dpt
        if self.target is not None:
            d["target"] = self.target
        if self.hops is not None:
            d["hops"] = self.hops
        if self.score is not None:
            d["score"] = self.score
        return d

    @classmethod
    def from_json(cls, d: dict) -> "Evidence":
        return cls(d["strategy"], d["kind"], tuple(d["chain"]), tuple(tuple(v) for v in d.get("vars", ())),
                   d.get("api"), d.get("dpt"), d.get("target"), d.get("hops"), d.get("score"))


@dataclass(frozen=True)
class Candidate:
    sig: str
    score: float
    strategies: tuple[str, ...]
    distance: int | None
    evidence: tuple[Evidence, ...] = ()
    flags: tuple[str, ...] = ()

    def sort_key(self):
        return (-self.score, self.distance if self.distance is not None else math.inf, self.sig)

    def to_json(self) -> dict:
        return {"sig": self.sig, "score": self.score, "strategies": list(self.strategies),
                "distance": self.distance, "evidence": [e.to_json() for e in self.evidence],
                "flags": list(self.flags)}

    @classmethod
    def from_json(cls, d: dict) -> "Candidate":
        return cls(d["sig"], d["score"], tuple(d["strategies"]), d.get("distance"),
                   tuple(Evidence.from_json(e) for e in d.get("evidence", ())), tuple(d.get("flags", ())))


@dataclass
class CandidateRanking:
    candidates: list[Candidate]
    related_type: ETSRelatedType | None = None
    roles: StackRoles | None = None
    warnings: list[str] = field(default_factory=list)

    def sigs(self) -> list[str]:
        return [c.sig for c in self.candidates]

    def get(self, sig: str) -> Candidate | None:
        return next((c for c in self.candidates if c.sig == sig), None)

    def __len__(self):
        return len(self.candidates)

    def to_json(self) -> dict:
        return {"related_type": str(self.related_type) if self.related_type else None,
                "candidates": [c.to_json() for c in self.candidates],
                "warnings": list(self.warnings)}

    @classmethod
    def from_json(cls, d: dict) -> "CandidateRanking":
        rt = d.get("related_type")
        return cls([Candidate.from_json(c) for c in d["candidates"]],
                   ETSRelatedType(rt) if rt else None, None, list(d.get("warnings", ())))


@dataclass
class _Ctx:
    program: Program
    report: CrashReport
    roles: StackRoles
    cg: CallGraph
    index: DefUseIndex
    config: LocateConfig
    warnings: list[str]

    @property
    def cap(self) -> int | None:
        return None if "b6" in self.config.ablate else self.config.caller_cap

    def app_body(self, sig: str) -> MethodDef | None:
        m = self.program.method(sig)
        if m is None or m.is_external or not m.body or self.program.partition.get(m.owner) != APPLICATION:
            return None
        return m

    def app_callers(self, sig: str) -> list[str] | None:
        """Application callers of `sig`, or None when the caller cap is exceeded."""
        callers = [c for c in self.cg.callers(sig) if self.app_body(c) is not None]
        if self.cap is not None and len(callers) > self.cap:
            self.warnings.append(f"caller tracing stopped at {sig} ({len(callers)} callers)")
            return None
        return callers


# -- S1 -------------------------------------------------------------------------

def inheritance_path(program: Program, sub: str, sup: str) -> list[str] | None:
    chain = [sub, *program.superclasses(sub)]
    if sup not in chain:
        return None
    return chain[: chain.index(sup) + 1]


def strategy_s1(ctx: _Ctx, ets: ETS) -> list[Evidence]:
    program = ctx.program
    sig_owner, name = ets.signaler.rsplit(".", 1)
    out = []
    for sub in program.all_subclasses(sig_owner):
        cd = program.cls(sub)
        if cd is None or cd.partition != APPLICATION:
            continue
        resolved = program.lookup_method(sub, name)
        if resolved is None or resolved.sig != ets.signaler:
            continue  # overridden somewhere on the way down
        path = tuple(inheritance_path(program, sub, sig_owner))
        target = _class_representative(ctx, cd)
        out.append(Evidence(S1, "inherit", (target,), target=" -> ".join(path)))
    return out


def _class_representative(ctx: _Ctx, cd) -> str:
    """Closest stack method of the class, else its constructor, else its first method."""
    for f in ctx.report.stack:
        if f.rsplit(".", 1)[0] == cd.name:
            return f
    ctor = cd.method("<init>")
    if ctor is not None:
        return ctor.sig
    if cd.methods:
        return sorted(m.sig for m in cd.methods)[0]
    return f"{cd.name}.<init>"


# -- S2 / S3 ----------------------------------------------------------------------

def crash_sites(ctx: _Ctx) -> list[int]:
    m = ctx.app_body(ctx.roles.crash_method)
    if m is None:
        return []
    api = ctx.roles.crash_api
    out = []
    for s in m.body:
        if s.kind != "call":
            continue
        if s.callee == api or api in dispatch_targets(ctx.program, s.callee_owner, s.callee_name):
            out.append(s.id)
    if not out:
        ctx.warnings.append(f"no call to {api} found in {m.sig}")
    return out


def _is_object(method: MethodDef, var: str) -> bool:
    types = local_types(method).get(var)
    return bool(types) and not (types & PRIMITIVES)


def data_trace(ctx: _Ctx, strategy: str, seeds: list[tuple[str, int]]) -> list[Evidence]:
    """Backward tracing from variables used at crash sites in crashMethod."""
    cm = ctx.roles.crash_method
    found: list[Evidence] = []
    seen = set()
    work = deque((cm, v, at, 0, (cm,), ((cm, v),)) for v, at in seeds)
    while work:
        sig, var, at, hops, chain, vars_ = work.popleft()
        if (sig, var, at) in seen:
            continue
        seen.add((sig, var, at))
        m = ctx.program.method(sig)
        du = ctx.index.of(m)
        if _is_object(m, var):
            found += _object_mutators(ctx, strategy, m, var, at, chain, vars_)
        try:
            defs = du.defs_at(var, at)
        except UnknownVariable:
            continue
        for d in defs:
            if is_param_def(d):
                if hops >= ctx.config.trace_depth:
                    continue
                loc = param_loc(d)
                # the formal parameter names this method's link in the chain
                here = ((sig, m.params[loc].name),) + vars_[1:] if loc < len(m.params) else vars_
                for caller in ctx.app_callers(sig) or ():
                    cm_ = ctx.program.method(caller)
                    for e in ctx.cg.in_edges(sig):
                        if e.caller != caller:
                            continue
                        args = cm_.body[e.site].args
                        if loc >= len(args):
                            continue
                        a = args[loc]
                        label = a.name if isinstance(a, Var) else str(a)
                        found.append(Evidence(strategy, "param", (caller,) + chain,
                                              ((caller, label),) + here))
                        if isinstance(a, Var):
                            work.append((caller, a.name, e.site, hops + 1, (caller,) + chain,
                                         ((caller, a.name),) + here))
                continue
            s = m.body[d]
            if s.kind == "field-load":
                key = ctx.program.field_key(s.field)
                for st in _app_field_storers(ctx, key):
                    found.append(Evidence(strategy, "field", (st,) + chain, vars_, target=key))
            elif s.kind == "assign":
                for u in expr_vars(s.expr):
                    work.append((sig, u, d, hops, chain, vars_))
            elif s.kind == "call":
                for t in dispatch_targets(ctx.program, s.callee_owner, s.callee_name):
                    if ctx.app_body(t) is not None:
                        found.append(Evidence(strategy, "return", (t,) + chain, vars_))
                for a in s.args:
                    if isinstance(a, Var):
                        work.append((sig, a.name, d, hops, chain, vars_))
    return found


def _object_mutators(ctx, strategy, m: MethodDef, var: str, at: int, chain, vars_) -> list[Evidence]:
    """Earlier application calls in `m` that receive the object held by `var`."""
    out = []
    cfg = build_cfg(m)
    for s in m.body:
        if s.kind != "call" or s.id == at or at not in cfg.reachable_from(s.id):
            continue
        if not any(isinstance(a, Var) and a.name == var for a in s.args):
            continue
        for t in dispatch_targets(ctx.program, s.callee_owner, s.callee_name):
            if ctx.app_body(t) is not None:
                out.append(Evidence(strategy, "object", (t,) + chain, vars_, target=var))
    return out


def _app_field_storers(ctx: _Ctx, key: str) -> list[str]:
    out = []
    for c in ctx.program.classes:
        if c.partition != APPLICATION:
            continue
        for m in c.methods:
            if any(s.kind == "field-store" and ctx.program.field_key(s.field) == key for s in m.body):
                out.append(m.sig)
    return sorted(out)


def strategy_s2(ctx: _Ctx) -> list[Evidence]:
    m = ctx.app_body(ctx.roles.crash_method)
    seeds = []
    for sid in crash_sites(ctx):
        seeds += [(a.name, sid) for a in m.body[sid].args if isinstance(a, Var)]
    return [Evidence(S2, "crash-site", (ctx.roles.crash_method,))] + data_trace(ctx, S2, seeds)


def strategy_s3(ctx: _Ctx, ets: ETS) -> list[Evidence]:
    locs = sorted({kv.loc for kv in ets.key_vars if kv.mtd == ctx.roles.crash_api})
    if not locs:
        ctx.warnings.append("crashAPI carries no keyVar; tracing every argument")
        return [replace(e, strategy=S3) for e in strategy_s2(ctx)]
    m = ctx.app_body(ctx.roles.crash_method)
    seeds = []
    for sid in crash_sites(ctx):
        args = m.body[sid].args
        for loc in locs:
            if loc >= len(args):
                ctx.warnings.append(f"keyVar position {loc} exceeds crashAPI arity; skipped")
            elif isinstance(args[loc], Var):
                seeds.append((args[loc].name, sid))
    return [Evidence(S3, "crash-site", (ctx.roles.crash_method,))] + data_trace(ctx, S3, seeds)


# -- S4 -------------------------------------------------------------------------------

def strategy_s4(ctx: _Ctx, ets: ETS) -> list[Evidence]:
    out = []
    for api in sorted(ets.key_apis, key=lambda a: (a.dpt, a.mtd)):
        invokers = sorted({e.caller for e in ctx.cg.in_edges(api.mtd) if ctx.app_body(e.caller)})
        for fk in invokers:
            out.append(Evidence(S4, "keyapi", (fk, api.mtd), api=api.mtd, dpt=api.dpt))
            seen = {fk}
            q = deque([(fk, (fk, api.mtd))])
            while q:
                cur, chain = q.popleft()
                for caller in ctx.app_callers(cur) or ():
                    if caller in seen:
                        continue
                    seen.add(caller)
                    ch = (caller,) + chain
                    out.append(Evidence(S4, "keyapi", ch, api=api.mtd, dpt=api.dpt))
                    q.append((caller, ch))
    return out


# -- b1: pure call-graph expansion ---------------------------------------------------

def cg_expansion(ctx: _Ctx, depth: int = 5) -> list[tuple[str, int]]:
    app = [f for f in ctx.report.stack if ctx.app_body(f)]
    if not app:
        return []
    g = _stack_graph(ctx)
    dist = {a: 0 for a in app}
    q = deque(sorted(app))
    while q:
        cur = q.popleft()
        if dist[cur] >= depth:
            continue
        for nxt in sorted(g.neighbours(cur)):
            if nxt not in dist and ctx.app_body(nxt) is not None:
                dist[nxt] = dist[cur] + 1
                q.append(nxt)
    return sorted(dist.items())


# -- scoring --------------------------------------------------------------------------

def _stack_graph(ctx: _Ctx) -> CallGraph:
    st = ctx.report.stack
    return ctx.cg.with_edges((st[i + 1], st[i]) for i in range(len(st) - 1))


class _Distances:
    """dis(f) = min over stack methods fj of callDepth(f, fj) + callDepth(fj, crashMethod)."""

    def __init__(self, ctx: _Ctx):
        self.g = _stack_graph(ctx)
        self.stack = list(dict.fromkeys(ctx.report.stack))
        cm = ctx.roles.crash_method
        self.to_cm = {fj: call_depth(self.g, [fj], cm) for fj in self.stack}

    def __call__(self, sig: str) -> int | None:
        d = depths_from(self.g, [sig])
        best = None
        for fj in self.stack:
            if fj in d and self.to_cm[fj] is not None:
                v = d[fj] + self.to_cm[fj]
                best = v if best is None else min(best, v)
        return best


def score_evidence(ev: Evidence, dis: _Distances, ctx: _Ctx) -> tuple[float, int | None, list[str]]:
    """(score before penalties, distance, flags) for one piece of evidence."""
    init = ctx.config.init
    flags = []
    if ev.strategy == S4:
        hops = len(ev.chain) - 2  # callDepth(f_t, f_k); 0 for the invoker itself
        return init - hops - ev.dpt, hops + ev.dpt, flags
    if ev.strategy == S1:
        d = dis(ev.chain[0])
        if d is None:
            d = len(ev.target.split(" -> ")) - 1
        return init - d, d, flags
    if ev.strategy == "b1":
        return init - ev.hops, ev.hops, flags
    d = dis(ev.chain[0])
    if d is None:
        flags.append("unreachable")
        return 0.0, None, flags
    return init - d, d, flags


def score_candidate(candidate: Candidate, ctx: _Ctx) -> float:
    """Recompute a candidate's score from its evidence (penalties included)."""
    if not candidate.evidence:
        return ctx.config.stack_default_score
    dis = _Distances(ctx)
    best = max(score_evidence(e, dis, ctx)[0] for e in candidate.evidence)
    return best - _penalty(candidate.sig, ctx)


def _app_prefixes(ctx: _Ctx) -> tuple[str, ...]:
    if ctx.program.app_packages:
        return ctx.program.app_packages
    return tuple(sorted({f.rsplit(".", 1)[0].rsplit(".", 1)[0] for f in ctx.roles.app_frames(ctx.report.stack)}))


def _penalty(sig: str, ctx: _Ctx) -> float:
    owner = sig.rsplit(".", 1)[0]
    if any(owner == p or owner.startswith(p + ".") for p in _app_prefixes(ctx)):
        return 0.0
    return ctx.config.penalty


def filter_candidates(cands: dict[str, Candidate], ctx: _Ctx) -> dict[str, Candidate]:
    """Drop candidates whose package prefix matches no stack method; add stack frames."""
    n = ctx.config.prefix_len
    prefixes = {package_prefix(f.rsplit(".", 1)[0], n) for f in ctx.report.stack}
    out = {}
    for sig, c in cands.items():
        if package_prefix(sig.rsplit(".", 1)[0], n) not in prefixes:
            ctx.warnings.append(f"dropped {sig}: package prefix differs from the stack")
            continue
        pen = _penalty(sig, ctx)
        if pen:
            c = replace(c, score=c.score - pen, flags=c.flags + ("penalized",))
        out[sig] = c
    st = ctx.report.stack
    cm_idx = st.index(ctx.roles.crash_method)
    for i, f in enumerate(st):
        if ctx.roles.partitions[i] != APPLICATION:
            continue
        if f in out:
            c = out[f]
            if STACK not in c.strategies:
                out[f] = replace(c, strategies=c.strategies + (STACK,))
            continue
        out[f] = Candidate(f, ctx.config.stack_default_score, (STACK,), abs(i - cm_idx))
    return out


# -- entry point ------------------------------------------------------------------------

def locate(program: Program, report: CrashReport, ets: ETS, config: LocateConfig | None = None,
           cg: CallGraph | None = None, index: DefUseIndex | None = None) -> CandidateRanking:
    config = config or LocateConfig()
    roles = assign_roles(report, program)
    ctx = _Ctx(program, report, roles, cg or build_cg(program), index or DefUseIndex(program),
               config, list(roles.warnings))
    if "b4" in config.ablate:
        ets = replace(ets, key_vars=())
    if "b5" in config.ablate:
        ets = replace(ets, key_apis=())
    rtype = classify_ets(ets)

    evidence: list[Evidence] = []
    if "b1" in config.ablate:
        evidence = [Evidence("b1", "cg", (sig,), hops=d) for sig, d in cg_expansion(ctx)]
    else:
        strategies = (S2,) if "b3" in config.ablate else STRATEGIES[rtype]
        for s in strategies:
            if s == S1:
                evidence += strategy_s1(ctx, ets)
            elif s == S2:
                evidence += strategy_s2(ctx)
            elif s == S3:
                evidence += strategy_s3(ctx, ets)
            else:
                evidence += strategy_s4(ctx, ets)

    dis = _Distances(ctx)
    merged: dict[str, Candidate] = {}
    for ev in evidence:
        sig = ev.chain[0]
        if ctx.program.method(sig) is None and ev.strategy != S1:
            continue
        score, dist, flags = score_evidence(ev, dis, ctx)
        ev = replace(ev, score=score)
        old = merged.get(sig)
        if old is None:
            merged[sig] = Candidate(sig, score, (ev.strategy,), dist, (ev,), tuple(flags))
            continue
        strategies = old.strategies + ((ev.strategy,) if ev.strategy not in old.strategies else ())
        evs = old.evidence + ((ev,) if ev not in old.evidence else ())
        if score > old.score or score == old.score and _lt(dist, old.distance):
            merged[sig] = Candidate(sig, score, strategies, dist, evs, tuple(flags))
        else:
            merged[sig] = replace(old, strategies=strategies, evidence=evs)

    final = filter_candidates(merged, ctx)
    ranked = sorted(final.values(), key=Candidate.sort_key)
    ranked = [replace(c, evidence=tuple(sorted(c.evidence, key=_ev_key))) for c in ranked]
    return CandidateRanking(ranked, rtype, roles, list(dict.fromkeys(ctx.warnings)))


def _lt(a: int | None, b: int | None) -> bool:
    return (a if a is not None else math.inf) < (b if b is not None else math.inf)


def _ev_key(e: Evidence):
    return (e.strategy, len(e.chain), e.kind, e.chain, e.vars, e.api or "", e.target or "")
