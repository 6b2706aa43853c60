"""Constraint pipeline with verification and retry, and the final explanation report."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable

from ..cis import CIS, explanation_order
from ..crash import CrashReport, assign_roles
from ..ets.model import ETS
from ..ir.model import Program
from ..localize import CandidateRanking
from . import prompts
from .backends import Backend, BackendError
from .constraints import (
    EXTRACTED, FINAL, PROPAGATED, ConstraintParseError, FrameworkConstraint, VerifierOutcome,
    parse_constraint, representative, static_context, verify,
)

log = logging.getLogger(__name__)

MAX_TURNS = 3
TOP_K = 5


def _source(program: Program, sig: str) -> str | None:
    m = program.method(sig)
    return m.source if m is not None else None


@dataclass
class PipelineResult:
    extracted: FrameworkConstraint
    propagated: list[FrameworkConstraint]
    final: FrameworkConstraint


def extract_constraint(ets: ETS, report: CrashReport, program: Program, backend: Backend,
                       attempt: int = 1) -> PipelineResult:
    """Extract at the signaler, then rewrite caller by caller up to crashAPI.

    Raises ConstraintParseError for an unusable completion and BackendError when the
    backend fails.
    """
    roles = assign_roles(report, program)
    tail = list(reversed(report.stack[: roles.boundary + 1]))  # crashAPI ... signaler
    sys = prompts.SYSTEM_PROMPT
    text = backend.complete(sys, prompts.extract_prompt(report, ets.signaler, _source(program, ets.signaler)),
                            "ec", attempt)
    ec = parse_constraint(text, ets.signaler, EXTRACTED)
    cur, pcs = ec, []
    for sig in reversed(tail[:-1]):
        text = backend.complete(sys, prompts.propagate_prompt(cur, sig, _source(program, sig)),
                                f"pc:{sig}", attempt)
        cur = parse_constraint(text, sig, PROPAGATED)
        pcs.append(cur)
    final = replace(cur, provenance=FINAL)
    effects = []
    for api in sorted(ets.key_apis, key=lambda a: (a.dpt, a.mtd)):
        try:
            effects.append(backend.complete(sys, prompts.effect_prompt(api.mtd, api.key_field,
                                                                       _source(program, api.mtd)),
                                            f"effect:{api.mtd}", attempt).strip())
        except BackendError as e:
            log.info("no effect summary for %s: %s", api.mtd, e)
    if effects:
        final = replace(final, effect=" ".join(dict.fromkeys(effects)))
    return PipelineResult(ec, pcs, final)


@dataclass
class Attempt:
    turn: int
    constraint: FrameworkConstraint | None
    outcome: VerifierOutcome | None
    error: str | None = None

    def to_json(self) -> dict:
        return {"turn": self.turn, "constraint": str(self.constraint) if self.constraint else None,
                "verifiers": self.outcome.to_json() if self.outcome else None, "error": self.error}


@dataclass
class Validation:
    status: str  # valid | representative | none
    constraint: FrameworkConstraint | None
    attempts: list[Attempt] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"status": self.status, "constraint": self.constraint.to_json() if self.constraint else None,
                "attempts": [a.to_json() for a in self.attempts]}


def validate_with_retry(pipeline: Callable[[int], FrameworkConstraint],
                        check: Callable[[FrameworkConstraint], VerifierOutcome],
                        max_turns: int = MAX_TURNS) -> Validation:
    """Up to `max_turns` attempts; falls back to the representative constraint when
    every attempt failed only the static check."""
    if max_turns < 1:
        raise ValueError("max_turns must be at least 1")
    attempts: list[Attempt] = []
    for turn in range(1, max_turns + 1):
        try:
            c = pipeline(turn)
        except ConstraintParseError as e:
            attempts.append(Attempt(turn, None, None, f"unparseable: {e}"))
            continue
        except BackendError as e:
            attempts.append(Attempt(turn, None, None, f"backend: {e}"))
            return Validation("none", None, attempts)
        out = check(c)
        attempts.append(Attempt(turn, c, out))
        if out.valid:
            return Validation("valid", c, attempts)
    if attempts and all(a.outcome is not None and a.outcome.only_static_failed for a in attempts):
        t = representative([a.constraint.vars() for a in attempts])
        if t is not None:
            return Validation("representative", attempts[t].constraint, attempts)
    return Validation("none", None, attempts)


# -- report -------------------------------------------------------------------------------

@dataclass
class Section:
    sig: str
    ep: str
    code: str | None
    text: str
    origin: str  # backend | template

    def to_json(self) -> dict:
        return {"sig": self.sig, "ep": self.ep, "code": self.code, "text": self.text, "origin": self.origin}


@dataclass
class ExplanationReport:
    header: dict
    global_text: str
    sections: list[Section]
    provenance: dict

    def to_json(self) -> dict:
        return {"header": self.header, "global": self.global_text,
                "candidates": [s.to_json() for s in self.sections], "provenance": self.provenance}

    def to_text(self) -> str:
        h = self.header
        out = [f"Exception: {h['type']}", f"Message: {h['message']}", "Stack:"]
        out += [f"  {f}" for f in h["stack"]]
        if h.get("constraint"):
            out.append(f"Framework constraint ({h['constraint']['anchor']}): {h['constraint']['text']}")
            if h["constraint"].get("effect"):
                out.append(f"keyAPI effect: {h['constraint']['effect']}")
        out += ["", "Global explanation:", self.global_text, ""]
        for i, s in enumerate(self.sections, 1):
            out.append(f"Candidate method {i}: {s.sig} [{s.ep}]")
            if s.code:
                out += ["  " + ln for ln in s.code.splitlines()]
            out += [s.text, ""]
        for note in self.provenance.get("notes", ()):
            out.append(f"Note: {note}")
        return "\n".join(out).rstrip() + "\n"


def _template_global(report: CrashReport, cises: list[CIS]) -> str:
    if not cises:
        return f"{report.type} was thrown by {report.signaler}; no candidate method was found."
    names = ", ".join(c.candidate for c in cises)
    return (f"{report.type} was thrown by {report.signaler}. Candidate methods, in the order they "
            f"are explained: {names}.")


def generate_report(report: CrashReport, ets: ETS, ranking: CandidateRanking | None, cises: list[CIS],
                    backend: Backend | None, program: Program, naive: bool = False,
                    max_turns: int = MAX_TURNS, top_k: int | None = TOP_K) -> ExplanationReport:
    notes: list[str] = []
    cises = explanation_order(list(cises), report)
    if top_k is not None and len(cises) > top_k:
        keep = set((ranking.sigs() if ranking else [c.candidate for c in cises])[:top_k])
        cises = [c for c in cises if c.candidate in keep][:top_k]
    use_backend = backend is not None and not naive
    if not use_backend:
        notes.append("naive mode: reasons are template text, no backend was called")

    validation = None
    if use_backend:
        ctx = static_context(ets, program, cises[0].key_info if cises else None)
        validation = validate_with_retry(
            lambda turn: extract_constraint(ets, report, program, backend, turn).final,
            lambda c: verify(c, program, ctx), max_turns)
        if validation.status == "representative":
            notes.append("constraint is the representative of attempts that failed the static check")
        elif validation.status == "none":
            notes.append("no framework constraint passed verification")
    constraint = validation.constraint if validation else None
    for c in cises:
        c.constraint = constraint

    degraded = []
    if not cises:
        notes.append("no candidate methods to explain")
    global_text = _template_global(report, cises)
    if use_backend and cises:
        try:
            global_text = backend.complete(prompts.SYSTEM_PROMPT, prompts.global_prompt(report, constraint, cises),
                                           "global").strip()
        except BackendError as e:
            degraded.append("global")
            notes.append(f"global explanation falls back to template text ({e})")

    sections = []
    for c in cises:
        template = prompts.render_candidate_prompt(c.key_info)
        text, origin = template, "template"
        if use_backend:
            try:
                text = backend.complete(prompts.SYSTEM_PROMPT, prompts.candidate_prompt(report, constraint, c),
                                        f"candidate:{c.candidate}").strip()
                origin = "backend"
            except BackendError:
                degraded.append(c.candidate)
        sections.append(Section(c.candidate, c.ep, c.snippet(c.candidate), text, origin))

    header = {"type": report.type, "message": report.message, "stack": list(report.stack),
              "constraint": constraint.to_json() if constraint else None}
    provenance = {
        "backend": backend.name if use_backend else "none",
        "ep": {c.candidate: c.ep for c in cises},
        "constraint": validation.to_json() if validation else None,
        "degraded": degraded,
        "notes": notes,
    }
    return ExplanationReport(header, global_text, sections, provenance)
