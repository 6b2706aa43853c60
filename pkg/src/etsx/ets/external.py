"""ExternalVars, keyVars and keyAPIs.

A worklist walks use-def chains backward from each keyCondVar until it hits
a parameter or a field load. Final fields and lock fields are not treated as
external; their in-method stores are followed instead.
"""

from __future__ import annotations

from collections import deque

from ..ir.callgraph import CallGraph
from ..ir.defuse import DefUseIndex, UnknownVariable, field_var, is_param_def, param_loc
from ..ir.model import FRAMEWORK, MethodDef, Program, Var, expr_vars
from .model import ExternalVar, KeyAPI, KeyVar, VarRef


def trace_origins(program: Program, index: DefUseIndex, method: MethodDef, var: str,
                  at: int) -> list[tuple]:
    """Parameter and field origins of `var` as read at statement `at`.

    Returns ("param", loc) and ("field", declaring_class, name) tuples in
    discovery order.
    """
    du = index.of(method)
    out: list[tuple] = []
    seen = set()
    work = deque([(var, at)])
    while work:
        v, here = work.popleft()
        if (v, here) in seen:
            continue
        seen.add((v, here))
        try:
            defs = du.defs_at(v, here)
        except UnknownVariable:
            continue
        for d in defs:
            if is_param_def(d):
                o = ("param", param_loc(d))
                if o not in out:
                    out.append(o)
                continue
            s = method.body[d]
            if s.kind == "field-load":
                hit = program.lookup_field(s.field.owner, s.field.name)
                decl, fdef = (hit if hit else (s.field.owner, None))
                if fdef is not None and (fdef.is_final or fdef.is_lock):
                    for st in du.defs_at(field_var(f"{decl}.{s.field.name}"), d):
                        if st >= 0 and isinstance(method.body[st].value, Var):
                            work.append((method.body[st].value.name, st))
                    continue
                o = ("field", decl, s.field.name)
                if o not in out:
                    out.append(o)
            elif s.kind == "assign":
                for u in expr_vars(s.expr):
                    work.append((u, d))
            elif s.kind == "call":
                for a in s.args:
                    if isinstance(a, Var):
                        work.append((a.name, d))
    return out


def collect_external_vars(program: Program, index: DefUseIndex, method: MethodDef,
                          kcvs: tuple[VarRef, ...]) -> list[ExternalVar]:
    out: list[ExternalVar] = []
    for ref in kcvs:
        for o in trace_origins(program, index, method, ref.name, ref.at):
            if o[0] == "param":
                ev = ExternalVar("param", method.sig, o[1], None, ref.name)
            else:
                ev = ExternalVar("field", o[1], None, o[2], ref.name)
            if ev not in out:
                out.append(ev)
    return out


def _framework_body(program: Program, sig: str) -> MethodDef | None:
    m = program.method(sig)
    if m is None or m.is_external or not m.body or program.partition.get(m.owner) != FRAMEWORK:
        return None
    return m


def trace_key_vars(program: Program, index: DefUseIndex, cg: CallGraph,
                   externals: list[ExternalVar], depth: int = 5) -> list[KeyVar]:
    """keyVars for the signaler and for public framework callers passing the value on."""
    out: list[KeyVar] = []

    def add(kv: KeyVar):
        if kv not in out:
            out.append(kv)

    for ev in externals:
        if ev.kind != "param":
            continue
        sig = ev.owner
        m = program.method(sig)
        if m is not None and m.is_public:
            add(KeyVar(sig, ev.loc, ev.kcv))
        seen = {(sig, ev.loc)}
        frontier = deque([(sig, ev.loc, 0)])
        while frontier:
            cur, loc, dep = frontier.popleft()
            if dep >= depth:
                continue
            for e in cg.in_edges(cur):
                caller = _framework_body(program, e.caller)
                if caller is None:
                    continue
                s = caller.body[e.site]
                if loc >= len(s.args) or not isinstance(s.args[loc], Var):
                    continue
                for o in trace_origins(program, index, caller, s.args[loc].name, e.site):
                    if o[0] != "param" or (caller.sig, o[1]) in seen:
                        continue
                    seen.add((caller.sig, o[1]))
                    if caller.is_public:
                        add(KeyVar(caller.sig, o[1], ev.kcv))
                    frontier.append((caller.sig, o[1], dep + 1))
    return out


def field_storers(program: Program, key: str, exclude: str | None = None) -> list[str]:
    """Framework methods (not constructors) that store `key` directly."""
    out = []
    for c in program.classes:
        if c.partition != FRAMEWORK:
            continue
        for m in c.methods:
            if m.sig == exclude or m.is_constructor:
                continue
            if any(s.kind == "field-store" and program.field_key(s.field) == key for s in m.body):
                out.append(m.sig)
    return sorted(out)


def collect_key_apis(program: Program, cg: CallGraph, externals: list[ExternalVar],
                     signaler: str) -> list[KeyAPI]:
    """Public framework methods reaching a store of a keyField.

    dpt is 1 for the storing method itself and grows by one per caller hop;
    a multi-source BFS over framework callers keeps the minimum.
    """
    out: list[KeyAPI] = []
    for ev in externals:
        if ev.kind != "field":
            continue
        key = f"{ev.owner}.{ev.field_name}"
        storers = field_storers(program, key, exclude=signaler)
        dist = {s: 0 for s in storers}
        origin = {s: s for s in storers}
        q = deque(storers)
        while q:
            cur = q.popleft()
            for caller in cg.callers(cur):
                if caller not in dist and _framework_body(program, caller) is not None:
                    dist[caller] = dist[cur] + 1
                    origin[caller] = origin[cur]
                    q.append(caller)
        for sig in sorted(dist, key=lambda s: (dist[s], s)):
            m = program.method(sig)
            if sig == signaler or not m.is_public or m.is_constructor:
                continue
            api = KeyAPI(sig, key, ev.kcv, dist[sig] + 1, origin[sig])
            if api not in out:
                out.append(api)
    out.sort(key=lambda a: (a.key_field, a.kcv, a.dpt, a.mtd))
    return out
