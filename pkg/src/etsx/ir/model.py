"""Mini-IR data model.

Every value here is immutable. A `Program` is a flat list of classes, each
owning fields and methods; method bodies are three-address statements with
explicit successor lists, so control flow never depends on statement order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Union

FRAMEWORK = "framework"
APPLICATION = "application"
PARTITIONS = (FRAMEWORK, APPLICATION)

COMPARISONS = ("==", "!=", "<", "<=", ">", ">=")
NEGATED = {"==": "!=", "!=": "==", "<": ">=", ">=": "<", ">": "<=", "<=": ">"}
ARITH = ("+", "-", "*", "/", "%")

PRIMITIVES = frozenset(
    {"int", "long", "short", "byte", "char", "boolean", "float", "double", "void", "String"}
)

STMT_KINDS = (
    "assign", "call", "if", "switch", "return", "throw",
    "try-enter", "catch", "field-store", "field-load", "nop",
)


class IRError(Exception):
    pass


# -- operands and expressions ------------------------------------------------

@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Const:
    value: Union[int, float, str, bool, None]

    def __str__(self) -> str:
        v = self.value
        if v is None:
            return "null"
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, str):
            return _quote(v)
        return repr(v)


Atom = Union[Var, Const]


def _quote(s: str) -> str:
    out = s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t")
    return f'"{out}"'


@dataclass(frozen=True)
class BinOp:
    op: str
    left: Atom
    right: Atom

    def __str__(self) -> str:
        return f"{self.left} {self.op} {self.right}"


@dataclass(frozen=True)
class New:
    type: str
    args: tuple[Atom, ...] = ()

    def __str__(self) -> str:
        return f"new {self.type}({', '.join(map(str, self.args))})"


Expr = Union[Var, Const, BinOp, New]


def expr_vars(e: Expr | None) -> tuple[str, ...]:
    if e is None or isinstance(e, Const):
        return ()
    if isinstance(e, Var):
        return (e.name,)
    if isinstance(e, BinOp):
        return expr_vars(e.left) + expr_vars(e.right)
    if isinstance(e, New):
        return tuple(a.name for a in e.args if isinstance(a, Var))
    raise TypeError(e)


# -- conditions --------------------------------------------------------------

@dataclass(frozen=True)
class Cmp:
    left: Var
    op: str
    right: Atom

    def __post_init__(self):
        if self.op not in COMPARISONS:
            raise IRError(f"unknown comparison {self.op!r}")

    def __str__(self) -> str:
        return f"{self.left} {self.op} {self.right}"


@dataclass(frozen=True)
class And:
    left: "CondExpr"
    right: "CondExpr"

    def __str__(self) -> str:
        return f"{_paren(self.left, And)} && {_paren(self.right, And)}"


@dataclass(frozen=True)
class Or:
    left: "CondExpr"
    right: "CondExpr"

    def __str__(self) -> str:
        return f"{_paren(self.left, Or)} || {_paren(self.right, Or)}"


@dataclass(frozen=True)
class Not:
    operand: "CondExpr"

    def __str__(self) -> str:
        return f"!({self.operand})"


CondExpr = Union[Cmp, And, Or, Not]


def _paren(e: CondExpr, parent: type) -> str:
    if isinstance(e, (Cmp, Not)) or isinstance(e, parent):
        return str(e)
    return f"({e})"


def cond_vars(c: CondExpr) -> tuple[str, ...]:
    """Variables read by a condition, left to right, without duplicates."""
    out: list[str] = []
    for leaf in cond_leaves(c):
        for name in (leaf.left.name, leaf.right.name if isinstance(leaf.right, Var) else None):
            if name is not None and name not in out:
                out.append(name)
    return tuple(out)


def negate(c: CondExpr) -> CondExpr:
    """Push a negation down to the comparisons (De Morgan)."""
    if isinstance(c, Cmp):
        return Cmp(c.left, NEGATED[c.op], c.right)
    if isinstance(c, And):
        return Or(negate(c.left), negate(c.right))
    if isinstance(c, Or):
        return And(negate(c.left), negate(c.right))
    if isinstance(c, Not):
        return normalize(c.operand)
    raise TypeError(c)


def normalize(c: CondExpr) -> CondExpr:
    """Eliminate `Not` nodes."""
    if isinstance(c, Cmp):
        return c
    if isinstance(c, And):
        return And(normalize(c.left), normalize(c.right))
    if isinstance(c, Or):
        return Or(normalize(c.left), normalize(c.right))
    return negate(c.operand)


def cond_leaves(c: CondExpr) -> Iterator[Cmp]:
    """Comparisons of a negation-free view of `c`, left to right."""
    c = normalize(c)
    stack = [c]
    while stack:
        node = stack.pop()
        if isinstance(node, Cmp):
            yield node
        else:
            stack.append(node.right)
            stack.append(node.left)


# -- statements --------------------------------------------------------------

@dataclass(frozen=True)
class FieldRef:
    owner: str
    name: str

    def __str__(self) -> str:
        return f"{self.owner}.{self.name}"


@dataclass(frozen=True)
class Stmt:
    """One mini-IR statement.

    Only the operands relevant to `kind` are set:

    ============  ==================================================
    assign        target, expr
    call          target (optional), callee, args
    if            cond; successors are (true, false)
    switch        value, cases; successors are one per case + default
    return        value (optional)
    throw         value
    try-enter     block (first, last); successors are (body, handler)
    catch         target, exc_type
    field-store   field, value
    field-load    target, field
    nop           -
    ============  ==================================================
    """

    id: int
    kind: str
    succ: tuple[int, ...] = ()
    target: str | None = None
    expr: Expr | None = None
    callee: str | None = None
    args: tuple[Atom, ...] = ()
    cond: CondExpr | None = None
    value: Atom | None = None
    cases: tuple[Const, ...] = ()
    field: FieldRef | None = None
    exc_type: str | None = None
    block: tuple[int, int] | None = None

    def defs(self) -> tuple[str, ...]:
        """Local variables written by this statement."""
        if self.kind in ("assign", "call", "field-load", "catch") and self.target:
            return (self.target,)
        return ()

    def uses(self) -> tuple[str, ...]:
        """Local variables read by this statement."""
        k = self.kind
        if k == "assign":
            return expr_vars(self.expr)
        if k == "call":
            return tuple(a.name for a in self.args if isinstance(a, Var))
        if k == "if":
            return cond_vars(self.cond)
        if k in ("switch", "return", "throw", "field-store"):
            return (self.value.name,) if isinstance(self.value, Var) else ()
        return ()

    @property
    def callee_name(self) -> str:
        return self.callee.rsplit(".", 1)[1]

    @property
    def callee_owner(self) -> str:
        return self.callee.rsplit(".", 1)[0]


# -- declarations ------------------------------------------------------------

@dataclass(frozen=True)
class Param:
    name: str
    type: str


@dataclass(frozen=True)
class FieldDef:
    name: str
    type: str
    is_final: bool = False
    is_lock: bool = False


@dataclass(frozen=True)
class MethodDef:
    name: str
    owner: str
    params: tuple[Param, ...] = ()
    visibility: str = "public"
    is_entry: bool = False
    body: tuple[Stmt, ...] = ()
    returns: str = "void"
    throws: tuple[str, ...] = ()
    is_external: bool = False
    source: str | None = None

    @property
    def sig(self) -> str:
        return f"{self.owner}.{self.name}"

    @property
    def is_public(self) -> bool:
        return self.visibility == "public"

    @property
    def is_constructor(self) -> bool:
        return self.name in ("<init>", "<clinit>")

    def param_index(self, name: str) -> int | None:
        for i, p in enumerate(self.params):
            if p.name == name:
                return i
        return None

    def stmt(self, sid: int) -> Stmt:
        return self.body[sid]


@dataclass(frozen=True)
class ClassDef:
    name: str
    partition: str
    superclass: str | None = None
    fields: tuple[FieldDef, ...] = ()
    methods: tuple[MethodDef, ...] = ()

    @property
    def package(self) -> str:
        return self.name.rsplit(".", 1)[0] if "." in self.name else ""

    @property
    def simple_name(self) -> str:
        return self.name.rsplit(".", 1)[-1]

    def method(self, name: str) -> MethodDef | None:
        for m in self.methods:
            if m.name == name:
                return m
        return None

    def field(self, name: str) -> FieldDef | None:
        for f in self.fields:
            if f.name == name:
                return f
        return None


@dataclass(frozen=True)
class Program:
    classes: tuple[ClassDef, ...] = ()
    version: str | None = None
    app_packages: tuple[str, ...] = ()

    @cached_property
    def _classes(self) -> dict[str, ClassDef]:
        return {c.name: c for c in self.classes}

    @cached_property
    def _methods(self) -> dict[str, MethodDef]:
        return {m.sig: m for c in self.classes for m in c.methods}

    @cached_property
    def partition(self) -> dict[str, str]:
        return {c.name: c.partition for c in self.classes}

    @cached_property
    def subclasses(self) -> dict[str, tuple[str, ...]]:
        """Direct subclasses by class name."""
        out: dict[str, list[str]] = {}
        for c in self.classes:
            if c.superclass:
                out.setdefault(c.superclass, []).append(c.name)
        return {k: tuple(sorted(v)) for k, v in out.items()}

    def cls(self, name: str) -> ClassDef | None:
        return self._classes.get(name)

    def method(self, sig: str) -> MethodDef | None:
        return self._methods.get(sig)

    def methods(self) -> Iterator[MethodDef]:
        for c in self.classes:
            yield from c.methods

    def partition_of(self, sig_or_class: str) -> str | None:
        m = self._methods.get(sig_or_class)
        if m is not None:
            return self.partition[m.owner]
        return self.partition.get(sig_or_class)

    def superclasses(self, name: str) -> list[str]:
        """Ancestor chain of `name`, nearest first (unknown names end it)."""
        out = []
        c = self.cls(name)
        while c is not None and c.superclass:
            out.append(c.superclass)
            c = self.cls(c.superclass)
        return out

    def all_subclasses(self, name: str) -> list[str]:
        out, todo = [], list(self.subclasses.get(name, ()))
        while todo:
            n = todo.pop(0)
            out.append(n)
            todo.extend(self.subclasses.get(n, ()))
        return out

    def lookup_method(self, owner: str, name: str) -> MethodDef | None:
        """Resolve `owner.name` through the superclass chain."""
        for c in [owner, *self.superclasses(owner)]:
            cd = self.cls(c)
            if cd is not None:
                m = cd.method(name)
                if m is not None:
                    return m
        return None

    def lookup_field(self, owner: str, name: str) -> tuple[str, FieldDef] | None:
        """Resolve a field to (declaring class, FieldDef)."""
        for c in [owner, *self.superclasses(owner)]:
            cd = self.cls(c)
            if cd is not None:
                f = cd.field(name)
                if f is not None:
                    return c, f
        return None

    def field_key(self, ref: FieldRef) -> str:
        hit = self.lookup_field(ref.owner, ref.name)
        return f"{hit[0]}.{ref.name}" if hit else str(ref)


def split_sig(sig: str) -> tuple[str, str]:
    owner, _, name = sig.rpartition(".")
    return owner, name


def simple_method_name(sig: str) -> str:
    return sig.rsplit(".", 1)[-1]


def package_prefix(class_or_sig: str, n: int = 2) -> str:
    return ".".join(class_or_sig.split(".")[:n])


@dataclass
class Diagnostics:
    """Non-fatal findings gathered while analysing."""

    warnings: list[str] = field(default_factory=list)

    def warn(self, msg: str) -> None:
        self.warnings.append(msg)
