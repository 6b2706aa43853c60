"""Reaching definitions and use-def chains.

Parameters get synthetic definitions with negative ids (`param_def`). Field
stores define a pseudo-variable named `@<DeclaringClass>.<field>` so stores
reaching a field load can be queried like any other variable.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

from .cfg import CFG, build_cfg
from .model import IRError, MethodDef, Program, Stmt


class UnknownVariable(IRError):
    pass


def param_def(loc: int) -> int:
    return -1 - loc


def is_param_def(d: int) -> bool:
    return d < 0


def param_loc(d: int) -> int:
    return -1 - d


def field_var(key: str) -> str:
    return "@" + key


def _defined_vars(program: Program | None, s: Stmt) -> tuple[str, ...]:
    if s.kind == "field-store":
        key = program.field_key(s.field) if program else str(s.field)
        return (field_var(key),)
    return s.defs()


@dataclass(frozen=True)
class MethodDefUse:
    method: MethodDef
    cfg: CFG
    # reaching[stmt][var] -> def ids reaching the *entry* of stmt
    reaching: dict[int, dict[str, frozenset[int]]]

    @cached_property
    def variables(self) -> frozenset[str]:
        names = {p.name for p in self.method.params}
        for facts in self.reaching.values():
            names.update(facts)
        for s in self.method.body:
            names.update(s.defs())
        return frozenset(names)

    def defs_at(self, var: str, at: int) -> tuple[int, ...]:
        if not 0 <= at < len(self.method.body):
            raise IRError(f"{self.method.sig}: no statement {at}")
        if var not in self.variables and not var.startswith("@") and var != "this":
            raise UnknownVariable(f"{self.method.sig}: unknown variable {var!r}")
        return tuple(sorted(self.reaching[at].get(var, ())))


def reaching_definitions(method: MethodDef, program: Program | None = None) -> MethodDefUse:
    cfg = build_cfg(method)
    n = len(method.body)
    defined = [_defined_vars(program, s) for s in method.body]
    entry = {p.name: frozenset({param_def(i)}) for i, p in enumerate(method.params)}

    in_: dict[int, dict[str, frozenset[int]]] = {i: {} for i in range(n)}
    out: dict[int, dict[str, frozenset[int]]] = {i: {} for i in range(n)}

    def transfer(i: int, facts: dict[str, frozenset[int]]) -> dict[str, frozenset[int]]:
        res = dict(facts)
        for v in defined[i]:
            res[v] = frozenset({i})
        return res

    work = list(range(n))
    while work:
        i = work.pop(0)
        facts: dict[str, set[int]] = {k: set(v) for k, v in entry.items()} if i == 0 else {}
        for p in cfg.preds(i):
            for k, v in out[p].items():
                facts.setdefault(k, set()).update(v)
        new_in = {k: frozenset(v) for k, v in facts.items()}
        new_out = transfer(i, new_in)
        if new_in != in_[i] or new_out != out[i]:
            in_[i], out[i] = new_in, new_out
            for s in cfg.succ[i]:
                if s not in work:
                    work.append(s)
    return MethodDefUse(method, cfg, in_)


class DefUseIndex:
    """Lazily computed use-def information for every method of a program."""

    def __init__(self, program: Program):
        self.program = program
        self._cache: dict[str, MethodDefUse] = {}

    def of(self, method: MethodDef | str) -> MethodDefUse:
        sig = method if isinstance(method, str) else method.sig
        if sig not in self._cache:
            m = self.program.method(sig)
            if m is None or m.is_external or not m.body:
                raise IRError(f"no body for {sig}")
            self._cache[sig] = reaching_definitions(m, self.program)
        return self._cache[sig]


def use_def(index: DefUseIndex, method: MethodDef | str, var: str, at: int) -> tuple[int, ...]:
    """Definitions of `var` reaching statement `at`, ordered by id."""
    return index.of(method).defs_at(var, at)
