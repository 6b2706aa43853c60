"""Prompt text and the per-pattern reason templates."""

from __future__ import annotations

from ..cis import EP1, EP2, EP3, REQUIRED, CIS, ChainLink, KeyInfo
from ..crash import CrashReport

SYSTEM_PROMPT = (
    "You help developers understand crashes in Android apps. You know the Android framework "
    "source well. Base every statement on the code you are shown and keep answers short."
)

CONSTRAINT_FORMAT = (
    "Write the constraint as one or more clauses joined by &&. Each clause is a variable reference, "
    "a relation (==, ≠, <, ≤, >, ≥) and a value. A variable reference is either "
    "⟨Parameter <index>: <type> <name>⟩ for a parameter of the method shown, or "
    "⟨Field <class>: <type> <name>⟩ for a class field."
)


class TemplateError(ValueError):
    pass


def simple(name: str) -> str:
    return name.rsplit(".", 1)[-1]


def render_chain(links: list[ChainLink]) -> str:
    return " → ".join(str(l) for l in links)


def _kv_phrase(el: dict) -> str:
    if el["KeyVariable"]:
        return f"{', '.join(el['KeyVariable'])} of {el['CrashAPI']}"
    return f"the state {el['CrashAPI']} depends on"


def render_candidate_prompt(ki: KeyInfo) -> str:
    """The EP template for `ki` with every placeholder filled in."""
    if ki.ep not in REQUIRED:
        raise TemplateError(f"unknown explanation pattern {ki.ep!r}")
    missing = [k for k in REQUIRED[ki.ep] if ki.elements.get(k) in (None, "")]
    if missing:
        raise TemplateError(f"{ki.ep} template needs {', '.join(missing)}")
    el = ki.elements
    cand = ki.candidate or "the candidate method"
    if ki.ep == EP1:
        path = el["InheritancePath"]
        links = ", and ".join(f"{simple(a)} extends class {simple(b)}" for a, b in zip(path, path[1:]))
        return (f"{links} (inheritance path: {' → '.join(path)}). None of these classes overrides "
                f"{simple(el['Signaler'])}, and {el['Signaler']} throws an exception unconditionally, "
                f"so every call of it through {simple(path[0])} crashes. Candidate: {cand}.")
    if ki.ep == EP2:
        target = _kv_phrase(el)
        return (f"{cand} supplies the value that reaches {target}. "
                f"Value flow: {render_chain(el['CallChain_Crash'])}. If that value breaks the check "
                f"in {el['Signaler']}, the exception is thrown.")
    if ki.ep == EP3:
        mod = el["Modified"]
        what = "field" if mod["kind"] == "field" else "object"
        return (f"{cand} modifies the {what} {mod['target']}. {el['EntryAPI']} later reads it and hands "
                f"it on to {_kv_phrase(el)}. Value flow: {render_chain(el['CallChain_Crash'])}. "
                f"The modified value decides whether {el['Signaler']} throws.")
    return (f"{cand} reaches {el['KeyAPI']} along {render_chain(el['CallChain_KeyAPI'])}. "
            f"{el['KeyAPI']} updates the framework field {el['KeyField']}, and {el['CrashAPI']} "
            f"checks that field before throwing.")


def code_block(sig: str, src: str | None) -> str:
    return f"// {sig}\n{src if src else '// source unavailable'}\n"


def extract_prompt(report: CrashReport, signaler: str, src: str | None) -> str:
    return (f"The app crashed with {report.type}: {report.message}\n"
            f"The exception is thrown by {signaler}:\n\n{code_block(signaler, src)}\n"
            f"What must hold when {signaler} is entered so that it does not throw? {CONSTRAINT_FORMAT}")


def propagate_prompt(prev, method: str, src: str | None) -> str:
    return (f"This constraint must hold at {prev.anchor}:\n  {prev}\n"
            f"{method} calls it:\n\n{code_block(method, src)}\n"
            f"Rewrite the constraint in terms of the parameters and fields visible when {method} is "
            f"entered. {CONSTRAINT_FORMAT}")


def effect_prompt(api: str, key_field: str, src: str | None) -> str:
    return (f"{code_block(api, src)}\nIn one sentence, how does calling {api} change {key_field}?")


def global_prompt(report: CrashReport, constraint, cises: list[CIS]) -> str:
    lines = [f"Crash: {report.type}: {report.message}", "Stack:"]
    lines += [f"  {f}" for f in report.stack]
    if constraint is not None:
        lines.append(f"Framework constraint at {constraint.anchor}: {constraint}")
    lines.append("Candidate methods:")
    for c in cises:
        lines.append(f"- {c.candidate} ({c.ep}): {render_candidate_prompt(c.key_info)}")
    lines.append("Explain in a short paragraph why the app crashed and how the candidates relate.")
    return "\n".join(lines)


def candidate_prompt(report: CrashReport, constraint, cis: CIS) -> str:
    parts = [f"Crash: {report.type}: {report.message}"]
    if constraint is not None:
        parts.append(f"Framework constraint at {constraint.anchor}: {constraint}")
    parts.append(code_block(cis.candidate, cis.snippet(cis.candidate)))
    parts.append("Why this method may be responsible: " + render_candidate_prompt(cis.key_info))
    parts.append("Explain how this method can lead to the crash, referring to the code above.")
    return "\n".join(parts)
