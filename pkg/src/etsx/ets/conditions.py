"""KeyCond / keyCondVar collection for one sink.

Three passes run in order: basic checks found on CFG predecessors of the
sink, not-return guards (only when no basic check exists), and the
try-catch step when the sink sits in a catch handler.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..ir.cfg import CFG, build_cfg
from ..ir.model import Cmp, Const, MethodDef, Program, Var, cond_leaves, negate
from ..ir.types import is_subtype
from .model import BASIC, NOT_RETURN, TRY_CATCH, KeyCond, VarRef
from .sinks import find_sink_points, local_types


@dataclass
class CondState:
    """Mutable accumulator threaded through the passes."""

    threshold: int | None = 3
    conds: list[KeyCond] = field(default_factory=list)
    vars: list[VarRef] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)
    guards: list[int] = field(default_factory=list)  # guard-return ifs seen by the basic pass

    @property
    def full(self) -> bool:
        return self.threshold is not None and len(self.conds) >= self.threshold

    def add(self, cond: Cmp, tag: str, at: int) -> bool:
        if self.full:
            return False
        kc = KeyCond(cond, tag, at)
        if kc not in self.conds:
            self.conds.append(kc)
            for v in kc.vars:
                self.add_var(v, at)
        return True

    def add_var(self, name: str, at: int) -> None:
        ref = VarRef(name, at)
        if ref not in self.vars:
            self.vars.append(ref)

    def flag(self, f: str) -> None:
        if f not in self.flags:
            self.flags.append(f)


class _Reach:
    def __init__(self, cfg: CFG):
        self.cfg = cfg
        self._cache: dict[int, set[int]] = {}

    def __call__(self, sid: int) -> set[int]:
        if sid not in self._cache:
            self._cache[sid] = self.cfg.reachable_from(sid)
        return self._cache[sid]

    def hits_return(self, sid: int) -> bool:
        return any(self.cfg.stmt(x).kind == "return" for x in self(sid))


def key_conds_and_vars(state: CondState, cfg: CFG, target: int, tag: str = BASIC) -> CondState:
    """Collect checks on CFG predecessors of `target`, nearest first.

    An `if` counts when its true branch can reach the target (the target is
    guarded by the condition); if only the false branch reaches it and the
    true branch can return, the `if` is a guard-return and is left for the
    not-return pass. Compound conditions contribute every comparison.
    """
    reach = _Reach(cfg)
    for p in cfg.backward_bfs(target):
        if state.full:
            break
        s = cfg.stmt(p)
        if s.kind == "if":
            t_hit, f_hit = target in reach(s.succ[0]), target in reach(s.succ[1])
            if t_hit:
                for leaf in cond_leaves(s.cond):
                    state.add(leaf, tag, p)
            elif f_hit:
                if reach.hits_return(s.succ[0]):
                    state.guards.append(p)
                else:
                    for leaf in cond_leaves(negate(s.cond)):
                        state.add(leaf, tag, p)
        elif s.kind == "switch" and isinstance(s.value, Var):
            hits = [target in reach(x) for x in s.succ]
            case_hits = [c for c, h in zip(s.cases, hits) if h]
            if case_hits:
                for c in case_hits:
                    state.add(Cmp(s.value, "==", c), tag, p)
            elif hits[-1]:
                for c in s.cases:
                    state.add(Cmp(s.value, "!=", c), tag, p)
    return state


def not_return_conds(state: CondState, cfg: CFG, sink: int) -> CondState:
    """Guards of returns that precede the sink, oriented toward the return."""
    if state.conds:
        return state
    for p in state.guards:
        for leaf in cond_leaves(cfg.stmt(p).cond):
            state.add(leaf, NOT_RETURN, p)
    return state


# -- try-catch ----------------------------------------------------------------

def enclosing_catches(cfg: CFG, sink: int) -> list[tuple[int, int]]:
    """(try-enter, catch) pairs whose handler region contains `sink`, innermost first."""
    out = []
    for p in cfg.backward_bfs(sink):
        s = cfg.stmt(p)
        if s.kind != "catch":
            continue
        for t in cfg.preds(p):
            te = cfg.stmt(t)
            if te.kind == "try-enter" and te.succ[1] == p and not _reaches_avoiding(cfg, te.succ[0], sink, p):
                out.append((t, p))
                break
    return out


def _reaches_avoiding(cfg: CFG, src: int, dst: int, avoid: int) -> bool:
    if src == avoid:
        return False
    seen, todo = {src}, [src]
    while todo:
        cur = todo.pop()
        if cur == dst:
            return True
        for nxt in cfg.succ[cur]:
            if nxt != avoid and nxt not in seen:
                seen.add(nxt)
                todo.append(nxt)
    return False


def try_catch_conds(state: CondState, method: MethodDef, cfg: CFG, sink: int,
                    program: Program) -> CondState:
    catches = enclosing_catches(cfg, sink)
    if not catches:
        return state
    if len(catches) > 1:
        state.flag("nested-catch")
    t, c = catches[0]
    first, last = cfg.stmt(t).block
    caught = cfg.stmt(c).exc_type
    matched = False
    for sid in range(first, last + 1):
        s = cfg.stmt(sid)
        if s.kind != "call":
            continue
        callee = program.lookup_method(s.callee_owner, s.callee_name)
        if callee is None or not any(is_subtype(program, x, caught) for x in callee.throws):
            continue
        matched = True
        for a in s.args:
            if isinstance(a, Var):
                state.add_var(a.name, sid)
        for leaf in _lifted_conds(callee, s.args, caught, program):
            state.add(leaf, TRY_CATCH, sid)
    if not matched:
        state.flag("coarse")
        for sid in range(first, last + 1):
            for v in cfg.stmt(sid).uses():
                state.add_var(v, sid)
    return state


def _lifted_conds(callee: MethodDef, actuals, caught: str, program: Program) -> list[Cmp]:
    """Callee throw conditions over its parameters, rewritten to the actuals."""
    if callee.is_external or not callee.body:
        return []
    ccfg = build_cfg(callee)
    binding = {p.name: actuals[i] for i, p in enumerate(callee.params) if i < len(actuals)}
    types = local_types(callee)
    out: list[Cmp] = []
    for sk in find_sink_points(callee, program, ()):
        thrown = types.get(sk.var, set())
        if thrown and not any(is_subtype(program, x, caught) for x in thrown):
            continue
        st = key_conds_and_vars(CondState(threshold=None), ccfg, sk.stmt)
        for kc in st.conds:
            lifted = _substitute(kc.cond, binding)
            if lifted is not None and lifted not in out:
                out.append(lifted)
    return out


def _substitute(c: Cmp, binding: dict) -> Cmp | None:
    left = binding.get(c.left.name)
    if not isinstance(left, Var):
        return None
    right = c.right
    if isinstance(right, Var):
        right = binding.get(right.name)
        if right is None:
            return None
    return Cmp(left, c.op, right if isinstance(right, (Var, Const)) else c.right)
