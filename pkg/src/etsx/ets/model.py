"""Exception-thrown summaries and their parts."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property

from ..ir.model import Cmp, cond_vars

BASIC = "basic"
NOT_RETURN = "not-return"
TRY_CATCH = "try-catch"
TAGS = (BASIC, NOT_RETURN, TRY_CATCH)

SYMBOLIC = None  # a segment holding this value matches any string
_ANY = r"[\s\S]*"


@dataclass(frozen=True)
class Sink:
    method: str
    stmt: int
    var: str | None
    kind: str = "throw"  # or "handler"

    @property
    def id(self) -> str:
        return f"{self.method}#{self.stmt}"


@dataclass(frozen=True)
class MessagePattern:
    """Alternatives of literal/symbolic segment sequences.

    Each alternative is a tuple whose items are either a literal string or
    `SYMBOLIC`. An empty alternative tuple list means nothing was resolved
    and the pattern matches anything (`imprecise` is then set).
    """

    alternatives: tuple[tuple[str | None, ...], ...]
    imprecise: bool = False

    @staticmethod
    def anything() -> "MessagePattern":
        return MessagePattern(((SYMBOLIC,),), imprecise=True)

    @staticmethod
    def literal(text: str) -> "MessagePattern":
        return MessagePattern(((text,),))

    @cached_property
    def regex(self) -> str:
        alts = sorted({_alt_regex(a) for a in self.alternatives})
        if not alts:
            return _ANY
        if len(alts) == 1:
            return alts[0]
        return "(?:" + "|".join(alts) + ")"

    @cached_property
    def _compiled(self) -> re.Pattern:
        return re.compile(self.regex)

    def matches(self, message: str) -> bool:
        return self._compiled.fullmatch(message) is not None

    @property
    def specificity(self) -> int:
        """Literal characters of the least specific alternative."""
        if not self.alternatives:
            return 0
        return min(sum(len(s) for s in a if s is not SYMBOLIC) for a in self.alternatives)

    def to_json(self):
        return {"alternatives": [list(a) for a in self.alternatives], "imprecise": self.imprecise,
                "regex": self.regex}

    @staticmethod
    def from_json(d) -> "MessagePattern":
        return MessagePattern(tuple(tuple(a) for a in d["alternatives"]), d.get("imprecise", False))


def _alt_regex(alt: tuple[str | None, ...]) -> str:
    out = []
    for seg in alt:
        if seg is SYMBOLIC:
            if not out or out[-1] != _ANY:
                out.append(_ANY)
        elif seg:
            out.append(re.escape(seg))
    return "".join(out)


@dataclass(frozen=True)
class KeyCond:
    cond: Cmp
    tag: str
    at: int  # statement carrying the check (in the signaler)

    def __str__(self) -> str:
        return str(self.cond)

    @property
    def vars(self) -> tuple[str, ...]:
        return cond_vars(self.cond)


@dataclass(frozen=True)
class VarRef:
    """A signaler-local variable read at statement `at`."""

    name: str
    at: int


@dataclass(frozen=True)
class ExternalVar:
    kind: str  # "param" or "field"
    owner: str  # method sig for params, declaring class for fields
    loc: int | None  # 0-based parameter position
    field_name: str | None
    kcv: str

    @property
    def key(self) -> str:
        return f"{self.owner}.{self.field_name}" if self.kind == "field" else f"{self.owner}@{self.loc}"


@dataclass(frozen=True)
class KeyVar:
    mtd: str
    loc: int  # 0-based
    kcv: str


@dataclass(frozen=True)
class KeyAPI:
    mtd: str
    key_field: str  # "<DeclaringClass>.<field>"
    kcv: str
    dpt: int
    storer: str  # method that stores key_field directly

    @property
    def field_name(self) -> str:
        return self.key_field.rsplit(".", 1)[1]

    @property
    def field_class(self) -> str:
        return self.key_field.rsplit(".", 1)[0]


@dataclass(frozen=True)
class ETS:
    sink: Sink
    signaler: str
    type: str
    message: MessagePattern
    key_conds: tuple[KeyCond, ...] = ()
    key_cond_vars: tuple[VarRef, ...] = ()
    key_vars: tuple[KeyVar, ...] = ()
    key_apis: tuple[KeyAPI, ...] = ()
    external_vars: tuple[ExternalVar, ...] = ()
    flags: tuple[str, ...] = ()
    version: str | None = None

    @property
    def id(self) -> tuple[str, str, str, str]:
        return (self.sink.id, self.signaler, self.type, self.message.regex)

    @property
    def kcv_names(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(v.name for v in self.key_cond_vars))

    @property
    def tags(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(k.tag for k in self.key_conds))

    @property
    def key_fields(self) -> tuple[str, ...]:
        return tuple(dict.fromkeys(a.key_field for a in self.key_apis))


@dataclass
class ExtractConfig:
    threshold: int | None = 3  # None = uncapped
    handlers: tuple[str, ...] = ("log_throwable",)
    keyvar_depth: int = 5
    workers: int = 1


@dataclass
class EtsStore:
    entries: list[ETS] = field(default_factory=list)
    framework_version: str | None = None
    warnings: list[str] = field(default_factory=list)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def by_signaler(self, sig: str) -> list[ETS]:
        return [e for e in self.entries if e.signaler == sig]
