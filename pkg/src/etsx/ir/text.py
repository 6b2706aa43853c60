"""Parser and serializer for the line-oriented mini-IR format (`mir/1`).

Grammar, one construct per line (blank lines and `#` comments ignored)::

    mir/1
    version <label>                      # optional framework version
    app-package <prefix>                 # optional, repeatable
    class <Name> framework|application [extends <Super>]
      field [final] [lock] <type> <name>
      method <visibility> [entry] <ret> <name>(<type> <p>, ...) [throws <T>, ...]
        <id>: <statement> [-> <succ>, ...]
        | <source line>
      end
      external method <visibility> <ret> <name>(<params>) [throws <T>, ...]
    end

Statements::

    assign x = <atom> | <atom> <op> <atom> | new <Type>(<atoms>)
    call [x =] <Owner>.<method>(<atoms>)
    if <cond>                            -> <true>, <false>
    switch <var> [<const>, ...]          -> <case>..., <default>
    return [<atom>]
    throw <var>
    try-enter <first>..<last>            -> <body>, <handler>
    catch <var>: <Type>
    field-store <Owner>.<field> = <atom>
    field-load <var> = <Owner>.<field>
    nop

Conditions combine comparisons with `&&`, `||`, `!` and parentheses.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .model import (
    ARITH, COMPARISONS, PARTITIONS, And, BinOp, ClassDef, Cmp, CondExpr, Const,
    FieldDef, FieldRef, IRError, MethodDef, New, Not, Or, Param, Program, Stmt,
    Var,
)

HEADER = "mir/1"


class ParseError(IRError):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {msg}" if line else msg)
        self.msg, self.line, self.col = msg, line, col


# -- lexing ------------------------------------------------------------------

_IDENT = r"[A-Za-z_$][\w$]*"
_NAME = rf"(?:{_IDENT}(?:\.(?:{_IDENT}|<init>|<clinit>))*|<init>|<clinit>)"
_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<str>"(?:[^"\\]|\\.)*")
  | (?P<num>\d+(?:\.\d+)?)
  | (?P<name>""" + _NAME + r""")
  | (?P<op>->|==|!=|<=|>=|&&|\|\||\.\.|[<>!=+\-*/%(),:\[\]])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Tok:
    kind: str
    text: str
    col: int


def tokenize(text: str, line: int = 0, col0: int = 1) -> list[Tok]:
    toks: list[Tok] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col0 + pos)
        kind = m.lastgroup
        if kind != "ws":
            toks.append(Tok(kind, m.group(), col0 + pos))
        pos = m.end()
    # fold unary minus into numeric literals
    out: list[Tok] = []
    for t in toks:
        if (t.kind == "num" and out and out[-1].text == "-"
                and (len(out) == 1 or out[-2].kind == "op" and out[-2].text not in (")",))):
            minus = out.pop()
            out.append(Tok("num", "-" + t.text, minus.col))
        else:
            out.append(t)
    return out


class _Cursor:
    def __init__(self, toks: list[Tok], line: int, end_col: int):
        self.toks, self.i, self.line, self.end_col = toks, 0, line, end_col

    def peek(self, k: int = 0) -> Tok | None:
        j = self.i + k
        return self.toks[j] if j < len(self.toks) else None

    def at(self, text: str) -> bool:
        t = self.peek()
        return t is not None and t.text == text and t.kind in ("op", "name")

    def next(self) -> Tok:
        t = self.peek()
        if t is None:
            self.error("unexpected end of line")
        self.i += 1
        return t

    def expect(self, text: str) -> Tok:
        t = self.next()
        if t.text != text:
            self.error(f"expected {text!r}, got {t.text!r}", t)
        return t

    def name(self) -> str:
        t = self.next()
        if t.kind != "name":
            self.error(f"expected a name, got {t.text!r}", t)
        return t.text

    def done(self) -> bool:
        return self.i >= len(self.toks)

    def error(self, msg: str, tok: Tok | None = None):
        col = tok.col if tok else (self.peek().col if self.peek() else self.end_col)
        raise ParseError(msg, self.line, col)


def _atom(cur: _Cursor):
    t = cur.next()
    if t.kind == "num":
        return Const(float(t.text) if "." in t.text else int(t.text))
    if t.kind == "str":
        return Const(json.loads(t.text))
    if t.kind == "name":
        if t.text == "null":
            return Const(None)
        if t.text in ("true", "false"):
            return Const(t.text == "true")
        return Var(t.text)
    cur.error(f"expected an operand, got {t.text!r}", t)


def _atoms_in_parens(cur: _Cursor) -> tuple:
    cur.expect("(")
    args = []
    if not cur.at(")"):
        args.append(_atom(cur))
        while cur.at(","):
            cur.next()
            args.append(_atom(cur))
    cur.expect(")")
    return tuple(args)


def _cond(cur: _Cursor) -> CondExpr:
    left = _cond_and(cur)
    while cur.at("||"):
        cur.next()
        left = Or(left, _cond_and(cur))
    return left


def _cond_and(cur: _Cursor) -> CondExpr:
    left = _cond_unary(cur)
    while cur.at("&&"):
        cur.next()
        left = And(left, _cond_unary(cur))
    return left


def _cond_unary(cur: _Cursor) -> CondExpr:
    if cur.at("!"):
        cur.next()
        return Not(_cond_unary(cur))
    if cur.at("("):
        cur.next()
        inner = _cond(cur)
        cur.expect(")")
        return inner
    t = cur.peek()
    left = _atom(cur)
    if not isinstance(left, Var):
        cur.error("comparison must start with a variable", t)
    op = cur.next()
    if op.text not in COMPARISONS:
        cur.error(f"expected a comparison operator, got {op.text!r}", op)
    return Cmp(left, op.text, _atom(cur))


def parse_condition(text: str) -> CondExpr:
    cur = _Cursor(tokenize(text), 0, len(text) + 1)
    c = _cond(cur)
    if not cur.done():
        cur.error(f"trailing input {cur.peek().text!r}")
    return c


# -- statements --------------------------------------------------------------

_STMT_HEAD = re.compile(r"^(\d+)\s*:\s*")


def _split_succ(toks: list[Tok]) -> tuple[list[Tok], list[Tok] | None]:
    for i in range(len(toks) - 1, -1, -1):
        if toks[i].kind == "op" and toks[i].text == "->":
            return toks[:i], toks[i + 1:]
    return toks, None


_KIND = re.compile(r"^(try-enter|field-store|field-load|[a-z]+)(?=\s|$)")


def _parse_stmt(sid: int, text: str, line: int, col0: int) -> Stmt:
    km = _KIND.match(text)
    if km is None:
        raise ParseError("expected a statement kind", line, col0)
    kind = km.group(1)
    toks = tokenize(text[km.end():], line, col0 + km.end())
    body, succ_toks = _split_succ(toks)
    succ: list[int] = []
    if succ_toks is not None:
        expect_num = True
        for t in succ_toks:
            if expect_num and t.kind == "num" and "." not in t.text and not t.text.startswith("-"):
                succ.append(int(t.text))
            elif not expect_num and t.text == ",":
                pass
            else:
                raise ParseError("malformed successor list", line, t.col)
            expect_num = not expect_num
        if not succ or expect_num:
            raise ParseError("malformed successor list", line, succ_toks[-1].col if succ_toks else col0)
    cur = _Cursor(body, line, col0 + len(text))
    st: dict = {"id": sid, "kind": kind, "succ": tuple(succ)}
    if kind == "assign":
        st["target"] = cur.name()
        cur.expect("=")
        if cur.at("new"):
            cur.next()
            st["expr"] = New(cur.name(), _atoms_in_parens(cur))
        else:
            left = _atom(cur)
            if not cur.done() and cur.peek().text in ARITH:
                op = cur.next().text
                st["expr"] = BinOp(op, left, _atom(cur))
            else:
                st["expr"] = left
    elif kind == "call":
        if cur.peek(1) is not None and cur.peek(1).text == "=":
            st["target"] = cur.name()
            cur.expect("=")
        t = cur.peek()
        callee = cur.name()
        if "." not in callee:
            cur.error("callee must be Owner.method", t)
        st["callee"] = callee
        st["args"] = _atoms_in_parens(cur)
    elif kind == "if":
        st["cond"] = _cond(cur)
    elif kind == "switch":
        v = _atom(cur)
        if not isinstance(v, Var):
            cur.error("switch subject must be a variable")
        st["value"] = v
        cur.expect("[")
        cases = []
        while not cur.at("]"):
            c = _atom(cur)
            if not isinstance(c, Const):
                cur.error("switch cases must be constants")
            cases.append(c)
            if cur.at(","):
                cur.next()
        cur.expect("]")
        st["cases"] = tuple(cases)
    elif kind == "return":
        if not cur.done():
            st["value"] = _atom(cur)
    elif kind == "throw":
        v = _atom(cur)
        if not isinstance(v, Var):
            cur.error("throw needs a variable")
        st["value"] = v
    elif kind == "try-enter":
        a = cur.next()
        cur.expect("..")
        b = cur.next()
        try:
            st["block"] = (int(a.text), int(b.text))
        except ValueError:
            cur.error("try-enter needs a <first>..<last> range", a)
    elif kind == "catch":
        st["target"] = cur.name()
        cur.expect(":")
        st["exc_type"] = cur.name()
    elif kind == "field-store":
        owner, _, fname = cur.name().rpartition(".")
        if not owner:
            cur.error("field-store needs Owner.field")
        st["field"] = FieldRef(owner, fname)
        cur.expect("=")
        st["value"] = _atom(cur)
    elif kind == "field-load":
        st["target"] = cur.name()
        cur.expect("=")
        owner, _, fname = cur.name().rpartition(".")
        if not owner:
            cur.error("field-load needs Owner.field")
        st["field"] = FieldRef(owner, fname)
    elif kind == "nop":
        pass
    else:
        raise ParseError(f"unknown statement kind {kind!r}", line, col0)
    if not cur.done():
        cur.error(f"trailing input {cur.peek().text!r}")
    return Stmt(**st)


def check_successors(stmt: Stmt, n: int) -> None:
    k, s = stmt.kind, stmt.succ
    if k == "if" and len(s) != 2:
        raise IRError(f"stmt {stmt.id}: if requires 2 successors")
    if k in ("return", "throw") and s:
        raise IRError(f"stmt {stmt.id}: {k} takes no successors")
    if k == "switch" and len(s) != len(stmt.cases) + 1:
        raise IRError(f"stmt {stmt.id}: switch requires one successor per case plus default")
    if k == "try-enter" and len(s) != 2:
        raise IRError(f"stmt {stmt.id}: try-enter requires 2 successors (body, handler)")
    if k not in ("if", "return", "throw", "switch", "try-enter") and not s:
        raise IRError(f"stmt {stmt.id}: {k} requires at least 1 successor")
    for t in s:
        if not 0 <= t < n:
            raise IRError(f"stmt {stmt.id}: dangling successor {t}")


# -- declarations ------------------------------------------------------------

_VIS = ("public", "private", "protected", "package")


def _parse_method_header(text: str, line: int, owner: str, external: bool) -> MethodDef:
    cur = _Cursor(tokenize(text, line), line, len(text) + 1)
    cur.expect("method")
    vis = cur.name()
    if vis not in _VIS:
        cur.error(f"expected visibility, got {vis!r}")
    entry = False
    if cur.at("entry"):
        cur.next()
        entry = True
    ret = cur.name()
    name = cur.name()
    cur.expect("(")
    params: list[Param] = []
    while not cur.at(")"):
        ptype = cur.name()
        pname = cur.name()
        params.append(Param(pname, ptype))
        if cur.at(","):
            cur.next()
    cur.expect(")")
    throws: list[str] = []
    if cur.at("throws"):
        cur.next()
        throws.append(cur.name())
        while cur.at(","):
            cur.next()
            throws.append(cur.name())
    if not cur.done():
        cur.error(f"trailing input {cur.peek().text!r}")
    names = [p.name for p in params]
    if len(set(names)) != len(names):
        raise ParseError(f"duplicate parameter name in {owner}.{name}", line, 1)
    return MethodDef(
        name=name, owner=owner, params=tuple(params), visibility=vis, is_entry=entry,
        returns=ret, throws=tuple(throws), is_external=external,
    )


def parse_program(text: str) -> Program:
    """Parse mini-IR source into a resolved `Program`.

    Raises `ParseError` (with line/column) on syntax errors, duplicate
    declarations, dangling callees and malformed successor lists.
    """
    lines = text.splitlines()
    header_seen = False
    version = None
    app_packages: list[str] = []
    classes: list[ClassDef] = []
    cls: dict | None = None
    meth: dict | None = None

    def close_method(lineno: int):
        nonlocal meth
        body = meth["body"]
        for i, s in enumerate(body):
            if s.id != i:
                raise ParseError(f"statement ids must be dense from 0 (got {s.id} at position {i})",
                                 meth["lines"][i], 1)
        for i, s in enumerate(body):
            try:
                check_successors(s, len(body))
            except IRError as e:
                raise ParseError(str(e), meth["lines"][i], 1) from None
        src = "\n".join(meth["source"]) if meth["source"] else None
        m = meth["decl"]
        cls["methods"].append(MethodDef(
            name=m.name, owner=m.owner, params=m.params, visibility=m.visibility,
            is_entry=m.is_entry, body=tuple(body), returns=m.returns, throws=m.throws,
            source=src,
        ))
        meth = None

    for lineno, raw in enumerate(lines, 1):
        stripped = raw.strip()
        if meth is not None and stripped.startswith("|"):
            content = raw.lstrip()[1:]
            meth["source"].append(content[1:] if content.startswith(" ") else content)
            continue
        if not stripped or stripped.startswith("#"):
            continue
        indent = len(raw) - len(raw.lstrip())
        if not header_seen:
            if stripped != HEADER:
                raise ParseError(f"expected header {HEADER!r}", lineno, 1)
            header_seen = True
            continue
        word = stripped.split()[0]
        if meth is not None:
            if stripped == "end":
                close_method(lineno)
                continue
            m = _STMT_HEAD.match(stripped)
            if not m:
                raise ParseError("expected a statement '<id>: ...' or 'end'", lineno, indent + 1)
            sid = int(m.group(1))
            meth["body"].append(_parse_stmt(sid, stripped[m.end():], lineno, indent + m.end() + 1))
            meth["lines"].append(lineno)
            continue
        if cls is not None:
            if stripped == "end":
                classes.append(ClassDef(
                    name=cls["name"], partition=cls["partition"], superclass=cls["super"],
                    fields=tuple(cls["fields"]), methods=tuple(cls["methods"]),
                ))
                cls = None
            elif word == "field":
                parts = stripped.split()[1:]
                final = lock = False
                while parts and parts[0] in ("final", "lock"):
                    if parts.pop(0) == "final":
                        final = True
                    else:
                        lock = True
                if len(parts) != 2:
                    raise ParseError("expected 'field [final] [lock] <type> <name>'", lineno, indent + 1)
                if any(f.name == parts[1] for f in cls["fields"]):
                    raise ParseError(f"duplicate field {parts[1]!r} in {cls['name']}", lineno, indent + 1)
                cls["fields"].append(FieldDef(parts[1], parts[0], final, lock))
            elif word == "method":
                decl = _parse_method_header(stripped, lineno, cls["name"], False)
                _check_dup_method(cls, decl.name, lineno)
                meth = {"decl": decl, "body": [], "lines": [], "source": []}
            elif word == "external":
                decl = _parse_method_header(stripped[len("external"):].strip(), lineno, cls["name"], True)
                _check_dup_method(cls, decl.name, lineno)
                cls["methods"].append(decl)
            else:
                raise ParseError(f"unexpected {word!r} in class body", lineno, indent + 1)
            continue
        parts = stripped.split()
        if word == "version" and len(parts) == 2:
            version = parts[1]
        elif word == "app-package" and len(parts) == 2:
            app_packages.append(parts[1])
        elif word == "class":
            if len(parts) not in (3, 5) or (len(parts) == 5 and parts[3] != "extends"):
                raise ParseError("expected 'class <Name> <partition> [extends <Super>]'", lineno, 1)
            if parts[2] not in PARTITIONS:
                raise ParseError(f"partition must be one of {PARTITIONS}", lineno, 1)
            if any(c.name == parts[1] for c in classes):
                raise ParseError(f"duplicate class {parts[1]!r}", lineno, 1)
            cls = {"name": parts[1], "partition": parts[2],
                   "super": parts[4] if len(parts) == 5 else None, "fields": [], "methods": []}
        else:
            raise ParseError(f"unexpected {word!r} at top level", lineno, 1)
    if meth is not None or cls is not None:
        raise ParseError("unexpected end of input (missing 'end')", len(lines), 1)
    if not header_seen:
        raise ParseError(f"expected header {HEADER!r}", 1, 1)
    program = Program(tuple(classes), version, tuple(app_packages))
    validate(program)
    return program


def _check_dup_method(cls: dict, name: str, lineno: int) -> None:
    if any(m.name == name for m in cls["methods"]):
        raise ParseError(f"duplicate method {cls['name']}.{name}", lineno, 1)


def validate(program: Program) -> None:
    """Whole-program checks: callee resolution, acyclic hierarchy, variable scope."""
    for c in program.classes:
        seen = {c.name}
        for s in program.superclasses(c.name):
            if s in seen:
                raise IRError(f"cyclic superclass chain through {c.name}")
            seen.add(s)
    for m in program.methods():
        known = {p.name for p in m.params} | {"this"}
        for s in m.body:
            known.update(s.defs())
        for s in m.body:
            check_successors(s, len(m.body))
            for v in s.uses():
                if v not in known:
                    raise IRError(f"{m.sig} stmt {s.id}: variable {v!r} is never defined")
            if s.kind == "call" and program.lookup_method(s.callee_owner, s.callee_name) is None:
                raise IRError(f"{m.sig} stmt {s.id}: dangling callee {s.callee} (declare it external)")
            if s.kind == "try-enter":
                lo, hi = s.block
                if not (0 <= lo <= hi < len(m.body)) or s.succ[1] < len(m.body) and m.body[s.succ[1]].kind != "catch":
                    raise IRError(f"{m.sig} stmt {s.id}: try-enter needs a valid range and a catch handler")


# -- serialization -----------------------------------------------------------

def _succ(s: Stmt) -> str:
    return f" -> {', '.join(map(str, s.succ))}" if s.succ else ""


def format_stmt(s: Stmt) -> str:
    k = s.kind
    if k == "assign":
        body = f"assign {s.target} = {s.expr}"
    elif k == "call":
        call = f"{s.callee}({', '.join(map(str, s.args))})"
        body = f"call {s.target} = {call}" if s.target else f"call {call}"
    elif k == "if":
        body = f"if {s.cond}"
    elif k == "switch":
        body = f"switch {s.value} [{', '.join(map(str, s.cases))}]"
    elif k == "return":
        body = f"return {s.value}" if s.value is not None else "return"
    elif k == "throw":
        body = f"throw {s.value}"
    elif k == "try-enter":
        body = f"try-enter {s.block[0]}..{s.block[1]}"
    elif k == "catch":
        body = f"catch {s.target}: {s.exc_type}"
    elif k == "field-store":
        body = f"field-store {s.field} = {s.value}"
    elif k == "field-load":
        body = f"field-load {s.target} = {s.field}"
    else:
        body = "nop"
    return f"{s.id}: {body}{_succ(s)}"


def _method_header(m: MethodDef) -> str:
    params = ", ".join(f"{p.type} {p.name}" for p in m.params)
    entry = " entry" if m.is_entry else ""
    throws = f" throws {', '.join(m.throws)}" if m.throws else ""
    return f"method {m.visibility}{entry} {m.returns} {m.name}({params}){throws}"


def serialize_program(program: Program) -> str:
    out = [HEADER]
    if program.version:
        out.append(f"version {program.version}")
    for p in program.app_packages:
        out.append(f"app-package {p}")
    for c in program.classes:
        ext = f" extends {c.superclass}" if c.superclass else ""
        out.append(f"class {c.name} {c.partition}{ext}")
        for f in c.fields:
            mods = ("final " if f.is_final else "") + ("lock " if f.is_lock else "")
            out.append(f"  field {mods}{f.type} {f.name}")
        for m in c.methods:
            if m.is_external:
                out.append(f"  external {_method_header(m)}")
                continue
            out.append(f"  {_method_header(m)}")
            for s in m.body:
                out.append(f"    {format_stmt(s)}")
            if m.source is not None:
                for ln in m.source.split("\n"):
                    out.append(f"    | {ln}" if ln else "    |")
            out.append("  end")
        out.append("end")
    return "\n".join(out) + "\n"


def load_program(path) -> Program:
    with open(path, encoding="utf-8") as fh:
        return parse_program(fh.read())
