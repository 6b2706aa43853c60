"""Sink points and exception-message patterns."""

from __future__ import annotations

from itertools import product

from ..ir.defuse import DefUseIndex, is_param_def
from ..ir.model import BinOp, Const, MethodDef, New, Program, Stmt, Var
from ..ir.types import canonical_type, is_throwable
from .model import SYMBOLIC, MessagePattern, Sink

MAX_ALTERNATIVES = 16
MAX_CALL_DEPTH = 3

# string helpers whose result we can model
_CONCAT = ("concat",)
_PASS_THROUGH = ("valueOf", "toString", "trim")


def local_types(method: MethodDef) -> dict[str, set[str]]:
    """Best-effort declared/constructed types of each local."""
    out: dict[str, set[str]] = {}
    for p in method.params:
        out.setdefault(p.name, set()).add(p.type)
    for s in method.body:
        if s.kind == "catch" and s.target:
            out.setdefault(s.target, set()).add(s.exc_type)
        elif s.kind == "assign" and isinstance(s.expr, New):
            out.setdefault(s.target, set()).add(s.expr.type)
    return out


def find_sink_points(method: MethodDef, program: Program | None = None,
                     handlers: tuple[str, ...] = ("log_throwable",)) -> list[Sink]:
    """Every `throw`, plus calls handing a throwable to a registered handler."""
    sinks = []
    types = local_types(method)
    for s in method.body:
        if s.kind == "throw":
            sinks.append(Sink(method.sig, s.id, s.value.name if isinstance(s.value, Var) else None))
        elif s.kind == "call" and s.callee_name in handlers:
            for a in s.args:
                if isinstance(a, Var) and any(is_throwable(program, t) for t in types.get(a.name, ())):
                    sinks.append(Sink(method.sig, s.id, a.name, kind="handler"))
                    break
    return sinks


# -- message patterns ---------------------------------------------------------

def _lit(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


class _Tracer:
    def __init__(self, program: Program, index: DefUseIndex):
        self.program = program
        self.index = index
        self.imprecise = False

    def string(self, method: MethodDef, atom, at: int, depth: int, seen: frozenset):
        """Alternatives (tuples of segments) for the string value of `atom`."""
        if isinstance(atom, Const):
            return [(_lit(atom.value),)]
        name = atom.name
        if name == "this":
            return [(SYMBOLIC,)]
        key = (method.sig, name, at)
        if key in seen:
            return [(SYMBOLIC,)]
        seen = seen | {key}
        alts: list[tuple] = []
        for d in self.index.of(method).defs_at(name, at):
            alts.extend(self._def_string(method, d, depth, seen))
        if not alts:
            return [(SYMBOLIC,)]
        return _cap(alts)

    def _def_string(self, method, d, depth, seen):
        if is_param_def(d):
            return [(SYMBOLIC,)]
        s: Stmt = method.body[d]
        if s.kind == "assign":
            e = s.expr
            if isinstance(e, (Var, Const)):
                return self.string(method, e, d, depth, seen)
            if isinstance(e, BinOp) and e.op == "+":
                return _concat(self.string(method, e.left, d, depth, seen),
                               self.string(method, e.right, d, depth, seen))
            return [(SYMBOLIC,)]
        if s.kind == "call":
            if s.callee_name in _CONCAT and len(s.args) == 2:
                return _concat(self.string(method, s.args[0], d, depth, seen),
                               self.string(method, s.args[1], d, depth, seen))
            if s.callee_name in _PASS_THROUGH and len(s.args) == 1:
                return self.string(method, s.args[0], d, depth, seen)
        return [(SYMBOLIC,)]

    def exception(self, method: MethodDef, var: str, at: int, depth: int, seen: frozenset):
        """(type, alternatives) pairs for the exception object held by `var`."""
        key = (method.sig, var, at)
        if key in seen:
            return []
        seen = seen | {key}
        out = []
        for d in self.index.of(method).defs_at(var, at):
            if is_param_def(d):
                ptype = method.params[-1 - d].type
                self.imprecise = True
                out.append((canonical_type(ptype), None))
                continue
            s = method.body[d]
            if s.kind == "assign" and isinstance(s.expr, New):
                args = s.expr.args
                msg = self.string(method, args[0], d, depth, frozenset()) if args else [("",)]
                out.append((canonical_type(s.expr.type), msg))
            elif s.kind == "assign" and isinstance(s.expr, Var):
                out.extend(self.exception(method, s.expr.name, d, depth, seen))
            elif s.kind == "catch":
                self.imprecise = True
                out.append((canonical_type(s.exc_type), None))
            elif s.kind == "call" and depth < MAX_CALL_DEPTH:
                callee = self.program.lookup_method(s.callee_owner, s.callee_name)
                if callee is None or callee.is_external or not callee.body:
                    self.imprecise = True
                    out.append((canonical_type(callee.returns) if callee else "", None))
                    continue
                for r in callee.body:
                    if r.kind == "return" and isinstance(r.value, Var):
                        out.extend(self.exception(callee, r.value.name, r.id, depth + 1, seen))
            else:
                self.imprecise = True
                out.append(("", None))
        return out


def _concat(left, right):
    return _cap([a + b for a, b in product(left, right)])


def _cap(alts):
    alts = list(dict.fromkeys(alts))
    if len(alts) > MAX_ALTERNATIVES:
        return [(SYMBOLIC,)]
    return alts


def sink_exception(sink: Sink, program: Program, index: DefUseIndex) -> tuple[str, MessagePattern]:
    """Exception type and message pattern of the object thrown at `sink`."""
    method = program.method(sink.method)
    if sink.var is None:
        return "", MessagePattern.anything()
    tr = _Tracer(program, index)
    found = tr.exception(method, sink.var, sink.stmt, 0, frozenset())
    types = sorted({t for t, _ in found if t})
    etype = types[0] if len(types) == 1 else ("|".join(types) if types else "")
    if not found or any(msg is None for _, msg in found):
        return etype, MessagePattern.anything()
    alts = tuple(sorted({a for _, msg in found for a in msg}, key=_alt_key))
    return etype, MessagePattern(alts, imprecise=tr.imprecise)


def _alt_key(a):
    return tuple("\0" if s is SYMBOLIC else s for s in a)


def message_regex(sink: Sink, program: Program, index: DefUseIndex) -> MessagePattern:
    return sink_exception(sink, program, index)[1]
