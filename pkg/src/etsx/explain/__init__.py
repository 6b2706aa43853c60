from .backends import (
    Backend, BackendError, FailingBackend, MockBackend, RemoteBackend, ReplayBackend, make_backend, request_key,
)
from .constraints import (
    Check, Clause, ConstraintParseError, FrameworkConstraint, Ref, StaticContext, VerifierOutcome,
    parse_constraint, parse_ref, representative, static_context, verify, verify_format, verify_source,
    verify_static,
)
from .prompts import SYSTEM_PROMPT, TemplateError, render_candidate_prompt, render_chain
from .report import (
    Attempt, ExplanationReport, PipelineResult, Section, Validation, extract_constraint, generate_report,
    validate_with_retry,
)

__all__ = [
    "Attempt", "Backend", "BackendError", "Check", "Clause", "ConstraintParseError", "ExplanationReport",
    "FailingBackend", "FrameworkConstraint", "MockBackend", "PipelineResult", "Ref", "RemoteBackend",
    "ReplayBackend", "SYSTEM_PROMPT", "Section", "StaticContext", "TemplateError", "Validation",
    "VerifierOutcome", "extract_constraint", "generate_report", "make_backend", "parse_constraint",
    "parse_ref", "render_candidate_prompt", "render_chain", "representative", "request_key",
    "static_context", "validate_with_retry", "verify", "verify_format", "verify_source", "verify_static",
]
