"""Crash reports, stack roles and ETS matching.

Two report layouts are accepted. The keyed one::

    Type: java.lang.IllegalStateException
    Msg: attempt to re-open an already-closed object: ...
    Version: 10.0            (optional)
    Stack:
      android.database.sqlite.SQLiteClosable.acquireReference
      ...

and the usual Java dump (``type: message`` followed by ``at`` lines).
Frames are listed top (signaler) to bottom (entry).
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field, replace
from typing import Iterable

from .ets.model import ETS, EtsStore
from .ir.model import APPLICATION, FRAMEWORK, Program, package_prefix, split_sig
from .ir.types import same_type


class CrashReportError(ValueError):
    pass


class MatchError(LookupError):
    def __init__(self, msg: str, diagnostics: dict | None = None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class CrashReport:
    type: str
    message: str
    stack: tuple[str, ...]
    version: str | None = None
    flags: tuple[str, ...] = ()

    @property
    def signaler(self) -> str:
        return self.stack[0]

    @property
    def message_missing(self) -> bool:
        return "empty-message" in self.flags

    def text(self) -> str:
        lines = [f"Type: {self.type}", f"Msg: {self.message}"]
        if self.version:
            lines.append(f"Version: {self.version}")
        lines.append("Stack:")
        lines += [f"  {f}" for f in self.stack]
        return "\n".join(lines) + "\n"


_FRAME = re.compile(r"^[\w$<>]+(?:\.[\w$<>]+)+$")
_AT = re.compile(r"^at\s+([^\s(]+)(?:\(.*\))?$")
_KEY = re.compile(r"^(Type|Msg|Message|Version|Stack)\s*:\s?(.*)$", re.IGNORECASE)


def _frame(text: str, lineno: int) -> str:
    text = text.strip()
    m = _AT.match(text)
    if m:
        text = m.group(1)
    if not _FRAME.match(text):
        raise CrashReportError(f"line {lineno}: malformed frame {text!r}")
    return text


def parse_crash_report(text: str, program: Program | None = None) -> CrashReport:
    lines = text.splitlines()
    etype, message, version = None, None, None
    frames: list[str] = []
    in_stack = False
    for i, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        km = _KEY.match(line)
        if km:
            key, val = km.group(1).lower(), km.group(2).strip()
            if key == "type":
                etype = val
            elif key in ("msg", "message"):
                message = val
            elif key == "version":
                version = val or None
            else:
                in_stack = True
                if val:
                    frames.append(_frame(val, i))
            continue
        if in_stack or line.startswith("at "):
            frames.append(_frame(line, i))
            continue
        if etype is None:
            # java style header: "pkg.Type: message"
            head, sep, rest = line.partition(": ")
            if not _FRAME.match(head.strip()):
                raise CrashReportError(f"line {i}: expected an exception type, got {line!r}")
            etype = head.strip()
            message = rest if sep else None
            continue
        raise CrashReportError(f"line {i}: unexpected line {line!r}")
    if not etype:
        raise CrashReportError("missing exception type")
    if not frames:
        raise CrashReportError("no stack frames")
    flags = ()
    if not message:
        message, flags = "", ("empty-message",)
    report = CrashReport(etype, message, tuple(frames), version, flags)
    if program is not None:
        assign_roles(report, program)
    return report


# -- roles --------------------------------------------------------------------

@dataclass(frozen=True)
class StackRoles:
    signaler: str
    crash_api: str
    crash_method: str
    entry: str
    partitions: tuple[str, ...]
    boundary: int  # index of crashAPI in the stack
    warnings: tuple[str, ...] = ()

    def app_frames(self, stack: tuple[str, ...]) -> list[str]:
        return [f for f, p in zip(stack, self.partitions) if p == APPLICATION]


def frame_partition(program: Program, sig: str) -> str:
    """Partition of a frame; unknown classes fall back to package inference."""
    part = program.partition_of(sig)
    if part is not None:
        return part
    owner, _ = split_sig(sig)
    part = program.partition.get(owner)
    if part is not None:
        return part
    for pkg in program.app_packages:
        if owner == pkg or owner.startswith(pkg + "."):
            return APPLICATION
    prefix = package_prefix(owner)
    app_prefixes = {package_prefix(c.name) for c in program.classes if c.partition == APPLICATION}
    fw_prefixes = {package_prefix(c.name) for c in program.classes if c.partition == FRAMEWORK}
    if prefix in app_prefixes and prefix not in fw_prefixes:
        return APPLICATION
    return FRAMEWORK


def assign_roles(report: CrashReport, program: Program) -> StackRoles:
    parts = tuple(frame_partition(program, f) for f in report.stack)
    if parts[0] != FRAMEWORK:
        raise CrashReportError("top frame is not a framework method")
    if APPLICATION not in parts:
        raise CrashReportError("no application frame")
    b = next(i for i in range(len(parts) - 1) if parts[i] == FRAMEWORK and parts[i + 1] == APPLICATION)
    warnings = []
    if FRAMEWORK in parts[b + 1:]:
        warnings.append("interleaved framework/application frames; roles use the topmost boundary")
    entry = max(i for i, p in enumerate(parts) if p == APPLICATION)
    st = report.stack
    return StackRoles(st[0], st[b], st[b + 1], st[entry], parts, b, tuple(warnings))


# -- classification and matching ---------------------------------------------

class ETSRelatedType(str, enum.Enum):
    NO_KEY_COND_VAR = "NoKeyCondVar"
    NO_EXTERNAL_VAR = "NoExternalVar"
    ONLY_KEY_VAR = "OnlyKeyVar"
    ONLY_KEY_API = "OnlyKeyAPI"
    KEY_VAR_AND_KEY_API = "KeyVarAndKeyAPI"

    def __str__(self) -> str:
        return self.value


def classify_ets(ets: ETS) -> ETSRelatedType:
    if not ets.key_cond_vars:
        return ETSRelatedType.NO_KEY_COND_VAR
    kv, ka = bool(ets.key_vars), bool(ets.key_apis)
    if kv and ka:
        return ETSRelatedType.KEY_VAR_AND_KEY_API
    if kv:
        return ETSRelatedType.ONLY_KEY_VAR
    if ka:
        return ETSRelatedType.ONLY_KEY_API
    return ETSRelatedType.NO_EXTERNAL_VAR


@dataclass(frozen=True)
class Match:
    ets: ETS
    related_type: ETSRelatedType
    low_confidence: bool = False
    candidates: int = 1
    notes: tuple[str, ...] = field(default=())


def version_key(v: str | None):
    if v is None:
        return ((2, ""),)
    return tuple((0, int(p), "") if p.isdigit() else (1, 0, p) for p in re.split(r"[.\-_]", v))


def _type_matches(ets_type: str, report_type: str) -> bool:
    return any(same_type(t, report_type) for t in ets_type.split("|") if t)


def _entries(stores) -> list[ETS]:
    if isinstance(stores, EtsStore):
        stores = [stores]
    out = []
    for s in stores:
        if isinstance(s, EtsStore):
            for e in s.entries:
                out.append(e if e.version is not None or s.framework_version is None
                           else _with_version(e, s.framework_version))
        else:
            out.append(s)
    return out


def _with_version(e: ETS, v: str) -> ETS:
    return replace(e, version=v)


def best_match_ets(report: CrashReport, stores: EtsStore | Iterable, version: str | None = None) -> Match:
    """Pick the summary explaining `report`.

    With a version only that version's summaries are considered and the most
    specific message pattern wins. Without one, matches are grouped by
    ETSRelatedType and the representative comes from the largest group.
    """
    entries = _entries(stores)
    if not entries:
        raise MatchError("empty ETS store")
    version = version or report.version
    low = report.message_missing
    by_sig = [e for e in entries if e.signaler == report.signaler]
    by_type = [e for e in by_sig if _type_matches(e.type, report.type)]
    cands = by_type if low else [e for e in by_type if e.message.matches(report.message)]
    diag = {"signaler": len(by_sig), "type": len(by_type), "message": len(cands)}
    if version is not None:
        in_version = [e for e in cands if e.version == version]
        diag["version"] = len(in_version)
        cands = in_version
    if not cands:
        if not by_sig:
            why = "no summary for signaler " + report.signaler
        elif not by_type:
            why = f"signaler matched but no summary throws {report.type}"
        elif version is not None and diag["message"]:
            why = f"no matching summary in version {version}"
        else:
            why = "type matched but the message did not match any pattern"
        raise MatchError(why, diag)
    notes = ["type-only match (empty message)"] if low else []
    if version is not None:
        best = sorted(cands, key=lambda e: (-e.message.specificity, e.sink.id))[0]
        return Match(best, classify_ets(best), low, len(cands), tuple(notes))
    groups: dict[ETSRelatedType, list[ETS]] = {}
    for e in cands:
        groups.setdefault(classify_ets(e), []).append(e)
    order = list(ETSRelatedType)
    rtype = sorted(groups, key=lambda t: (-len(groups[t]), order.index(t)))[0]
    best = sorted(groups[rtype], key=lambda e: (version_key(e.version), e.sink.id))[0]
    if len(groups) > 1:
        notes.append("types: " + ", ".join(f"{t}={len(v)}" for t, v in sorted(groups.items())))
    return Match(best, rtype, low, len(cands), tuple(notes))
