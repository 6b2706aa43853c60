"""Exception type names and subtyping.

Programs may declare their own exception classes; the common JDK ones are
built in so fixtures don't have to.
"""

from __future__ import annotations

from .model import Program

_JDK = {
    "java.lang.Throwable": None,
    "java.lang.Exception": "java.lang.Throwable",
    "java.lang.Error": "java.lang.Throwable",
    "java.lang.RuntimeException": "java.lang.Exception",
    "java.lang.IllegalArgumentException": "java.lang.RuntimeException",
    "java.lang.IllegalStateException": "java.lang.RuntimeException",
    "java.lang.NullPointerException": "java.lang.RuntimeException",
    "java.lang.IndexOutOfBoundsException": "java.lang.RuntimeException",
    "java.lang.ArrayIndexOutOfBoundsException": "java.lang.IndexOutOfBoundsException",
    "java.lang.UnsupportedOperationException": "java.lang.RuntimeException",
    "java.lang.ArithmeticException": "java.lang.RuntimeException",
    "java.lang.ClassCastException": "java.lang.RuntimeException",
    "java.lang.SecurityException": "java.lang.RuntimeException",
    "java.lang.NumberFormatException": "java.lang.IllegalArgumentException",
    "java.util.ConcurrentModificationException": "java.lang.RuntimeException",
    "java.io.IOException": "java.lang.Exception",
}
_BY_SIMPLE = {k.rsplit(".", 1)[1]: k for k in _JDK}


def canonical_type(name: str) -> str:
    return _BY_SIMPLE.get(name, name)


def simple_type(name: str) -> str:
    return name.rsplit(".", 1)[-1]


def _parent(program: Program | None, name: str) -> str | None:
    name = canonical_type(name)
    if name in _JDK:
        return _JDK[name]
    if program is not None:
        c = program.cls(name)
        if c is not None and c.superclass:
            return canonical_type(c.superclass)
    return None


def is_subtype(program: Program | None, sub: str, sup: str) -> bool:
    sub, sup = canonical_type(sub), canonical_type(sup)
    seen = set()
    while sub is not None and sub not in seen:
        if sub == sup:
            return True
        seen.add(sub)
        sub = _parent(program, sub)
    return False


def is_throwable(program: Program | None, name: str | None) -> bool:
    return bool(name) and is_subtype(program, name, "java.lang.Throwable")


def same_type(a: str, b: str) -> bool:
    a, b = canonical_type(a), canonical_type(b)
    return a == b or simple_type(a) == simple_type(b)
