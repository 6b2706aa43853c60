"""Framework constraints: grammar, parsing and the three verifiers.

A constraint is a conjunction of clauses ``<ref> <relation> <rhs>``::

    ⟨Parameter 0: int crashParameter⟩ ≠ -1 && ⟨Field SQLiteClosable: int mRefCount⟩ > 0

Clauses are joined by ``&&``, ``∧``, ``;`` or line breaks. Refs are kept as
raw text so a malformed ref still parses as a clause and fails the format check.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from ..ets.model import ETS
from ..ir.model import Program
from ..ir.types import same_type

EXTRACTED, PROPAGATED, FINAL = "extracted", "propagated", "final"

_REL_CANON = {"!=": "≠", "≠": "≠", "==": "==", "=": "==", ">=": "≥", "≥": "≥", "<=": "≤", "≤": "≤",
              ">": ">", "<": "<"}
_REL = r"(!=|≠|==|>=|≥|<=|≤|=|>|<)"
_CLAUSE = re.compile(r"⟨([^⟩]*)⟩\s*" + _REL + r"\s*(.+?)\s*(?=&&|∧|;|\n|$)")
_PARAM = re.compile(r"^Parameter\s+(\d+)\s*:\s*([\w.$\[\]<>]+)\s+([A-Za-z_$][\w$]*)$")
_FIELD = re.compile(r"^Field\s+([\w.$]+)\s*:\s*([\w.$\[\]<>]+)\s+([A-Za-z_$][\w$]*)$")


class ConstraintParseError(ValueError):
    pass


@dataclass(frozen=True)
class Ref:
    kind: str  # "param" | "field"
    type: str
    name: str
    index: int | None = None
    owner: str | None = None

    def __str__(self) -> str:
        if self.kind == "param":
            return f"⟨Parameter {self.index}: {self.type} {self.name}⟩"
        return f"⟨Field {self.owner}: {self.type} {self.name}⟩"


def parse_ref(text: str) -> Ref | None:
    text = text.strip()
    m = _PARAM.match(text)
    if m:
        return Ref("param", m.group(2), m.group(3), index=int(m.group(1)))
    m = _FIELD.match(text)
    if m:
        return Ref("field", m.group(2), m.group(3), owner=m.group(1))
    return None


@dataclass(frozen=True)
class Clause:
    ref: str  # raw text between the angle brackets
    rel: str
    rhs: str

    def __str__(self) -> str:
        return f"⟨{self.ref}⟩ {self.rel} {self.rhs}"


@dataclass(frozen=True)
class FrameworkConstraint:
    anchor: str
    clauses: tuple[Clause, ...]
    provenance: str = FINAL
    effect: str | None = None  # keyAPI effect summary, when requested

    def vars(self) -> frozenset[str]:
        out = set()
        for c in self.clauses:
            r = parse_ref(c.ref)
            out.add(str(r) if r is not None else c.ref.strip())
        return frozenset(out)

    def __str__(self) -> str:
        return " && ".join(str(c) for c in self.clauses)

    def to_json(self) -> dict:
        d = {"anchor": self.anchor, "provenance": self.provenance,
             "clauses": [{"ref": c.ref, "rel": c.rel, "rhs": c.rhs} for c in self.clauses],
             "text": str(self)}
        if self.effect:
            d["effect"] = self.effect
        return d


def parse_constraint(text: str, anchor: str, provenance: str = FINAL) -> FrameworkConstraint:
    """Pull every clause out of a completion; prose around the clauses is ignored."""
    clauses = tuple(Clause(m.group(1).strip(), _REL_CANON[m.group(2)], m.group(3).strip())
                    for m in _CLAUSE.finditer(text))
    if not clauses:
        raise ConstraintParseError("no constraint clause found")
    return FrameworkConstraint(anchor, clauses, provenance)


# -- verifiers --------------------------------------------------------------------

@dataclass(frozen=True)
class Check:
    ok: bool
    reason: str = ""


@dataclass(frozen=True)
class VerifierOutcome:
    format: Check
    source: Check
    static: Check

    @property
    def valid(self) -> bool:
        return self.format.ok and self.source.ok and self.static.ok

    @property
    def only_static_failed(self) -> bool:
        return self.format.ok and self.source.ok and not self.static.ok

    def to_json(self) -> dict:
        return {k: {"ok": c.ok, "reason": c.reason}
                for k, c in (("format", self.format), ("source", self.source), ("static", self.static))}


def verify_format(c: FrameworkConstraint) -> Check:
    if not c.clauses:
        return Check(False, "no clauses")
    for cl in c.clauses:
        if parse_ref(cl.ref) is None:
            return Check(False, f"malformed variable reference ⟨{cl.ref}⟩")
        if not cl.rhs:
            return Check(False, f"clause on ⟨{cl.ref}⟩ has no right-hand side")
    return Check(True)


def resolve_class(program: Program, name: str) -> str | None:
    """Qualified class for `name`, accepting a unique simple-name match."""
    if program.cls(name) is not None:
        return name
    hits = [c.name for c in program.classes if c.name.rsplit(".", 1)[-1] == name]
    return hits[0] if len(hits) == 1 else None


def _type_ok(declared: str, written: str) -> bool:
    return same_type(declared, written) or declared.rsplit(".", 1)[-1] == written.rsplit(".", 1)[-1]


def verify_source(c: FrameworkConstraint, program: Program) -> Check:
    m = program.method(c.anchor)
    if m is None:
        return Check(False, f"anchor {c.anchor} not found")
    for cl in c.clauses:
        r = parse_ref(cl.ref)
        if r is None:
            return Check(False, f"unparseable reference ⟨{cl.ref}⟩")
        if r.kind == "param":
            if r.index >= len(m.params):
                return Check(False, f"{c.anchor} has no parameter {r.index}")
            p = m.params[r.index]
            if p.name != r.name or not _type_ok(p.type, r.type):
                return Check(False, f"parameter {r.index} is declared as {p.type} {p.name}, not {r.type} {r.name}")
        else:
            owner = resolve_class(program, r.owner)
            hit = program.lookup_field(owner, r.name) if owner else None
            if hit is None:
                return Check(False, f"field {r.owner}.{r.name} is not declared")
            if not _type_ok(hit[1].type, r.type):
                return Check(False, f"field {r.owner}.{r.name} is declared as {hit[1].type}, not {r.type}")
    return Check(True)


@dataclass
class StaticContext:
    """Variables collected statically along crashAPI -> signaler, plus the keyFields."""

    chain_vars: dict[str, set[str]] = field(default_factory=dict)
    key_fields: set[str] = field(default_factory=set)


def static_context(ets: ETS, program: Program, key_info=None) -> StaticContext:
    ctx = StaticContext()
    for kv in ets.key_vars:
        m = program.method(kv.mtd)
        if m is not None and kv.loc < len(m.params):
            ctx.chain_vars.setdefault(kv.mtd, set()).add(m.params[kv.loc].name)
    if key_info is not None:
        for link in key_info.elements.get("CallChain_Crash") or ():
            m = program.method(link.method)
            if link.var and m is not None and program.partition_of(link.method) != "application":
                names = {p.name for p in m.params}
                ctx.chain_vars.setdefault(link.method, set()).update(
                    v.strip() for v in link.var.split(",") if v.strip() in names)
    ctx.key_fields = set(ets.key_fields)
    ctx.key_fields |= {f"{x.owner}.{x.field_name}" for x in ets.external_vars if x.kind == "field"}
    return ctx


def verify_static(c: FrameworkConstraint, ctx: StaticContext, program: Program | None = None) -> Check:
    for cl in c.clauses:
        r = parse_ref(cl.ref)
        if r is None:
            return Check(False, f"unparseable reference ⟨{cl.ref}⟩")
        if r.kind == "param":
            if r.name not in ctx.chain_vars.get(c.anchor, ()):
                return Check(False, f"{r.name} is not passed along the crash call chain")
        else:
            owner = resolve_class(program, r.owner) if program is not None else r.owner
            hit = program.lookup_field(owner, r.name) if program is not None and owner else None
            key = f"{hit[0]}.{r.name}" if hit else f"{owner or r.owner}.{r.name}"
            if key not in ctx.key_fields and not any(
                    k.endswith("." + r.name) and k.rsplit(".", 1)[0].rsplit(".", 1)[-1] == r.owner
                    for k in ctx.key_fields):
                return Check(False, f"{r.owner}.{r.name} is not a collected key field")
    return Check(True)


def verify(c: FrameworkConstraint, program: Program, ctx: StaticContext) -> VerifierOutcome:
    return VerifierOutcome(verify_format(c), verify_source(c, program), verify_static(c, ctx, program))


# -- representative constraint ------------------------------------------------------

def representative(var_sets: list[frozenset]) -> int | None:
    """Index of the first set containing every other set, or None when no such set exists."""
    for t, vt in enumerate(var_sets):
        if all(v <= vt for i, v in enumerate(var_sets) if i != t):
            return t
    return None
