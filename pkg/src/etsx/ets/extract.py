"""Summary extraction over the framework partition."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor

from ..ir.callgraph import CallGraph, build_cg
from ..ir.cfg import build_cfg
from ..ir.defuse import DefUseIndex
from ..ir.model import FRAMEWORK, MethodDef, Program
from .conditions import CondState, key_conds_and_vars, not_return_conds, try_catch_conds
from .external import collect_external_vars, collect_key_apis, trace_key_vars
from .model import ETS, EtsStore, ExtractConfig, Sink
from .sinks import find_sink_points, sink_exception

log = logging.getLogger(__name__)


def summarize_sink(program: Program, sink: Sink, index: DefUseIndex, cg: CallGraph,
                   config: ExtractConfig | None = None) -> ETS:
    config = config or ExtractConfig()
    method = program.method(sink.method)
    cfg = build_cfg(method)
    etype, pattern = sink_exception(sink, program, index)

    state = CondState(threshold=config.threshold)
    key_conds_and_vars(state, cfg, sink.stmt)
    not_return_conds(state, cfg, sink.stmt)
    try_catch_conds(state, method, cfg, sink.stmt, program)

    kcvs = tuple(state.vars)
    externals = collect_external_vars(program, index, method, kcvs)
    key_vars = trace_key_vars(program, index, cg, externals, depth=config.keyvar_depth)
    key_apis = collect_key_apis(program, cg, externals, method.sig)

    flags = list(state.flags)
    if pattern.imprecise:
        flags.append("imprecise")
    if sink.kind == "handler":
        flags.append("handler")
    return ETS(
        sink=sink, signaler=method.sig, type=etype, message=pattern,
        key_conds=tuple(state.conds), key_cond_vars=kcvs,
        key_vars=tuple(key_vars), key_apis=tuple(key_apis),
        external_vars=tuple(externals), flags=tuple(flags), version=program.version,
    )


def _framework_methods(program: Program) -> list[MethodDef]:
    out = []
    for c in sorted(program.classes, key=lambda c: c.name):
        if c.partition != FRAMEWORK:
            continue
        for m in sorted(c.methods, key=lambda m: m.name):
            if not m.is_external and m.body:
                out.append(m)
    return out


def extract_ets(program: Program, config: ExtractConfig | None = None) -> EtsStore:
    """One summary per sink point of every framework method.

    A failing sink is reported in `warnings` and skipped; it never aborts the
    rest of the extraction.
    """
    config = config or ExtractConfig()
    cg = build_cg(program)
    index = DefUseIndex(program)
    sinks = [s for m in _framework_methods(program)
             for s in find_sink_points(m, program, config.handlers)]

    def run(sink: Sink):
        try:
            return summarize_sink(program, sink, index, cg, config), None
        except Exception as exc:  # keep going, report per sink
            return None, f"{sink.id}: {type(exc).__name__}: {exc}"

    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            results = list(pool.map(run, sinks))
    else:
        results = [run(s) for s in sinks]

    store = EtsStore(framework_version=program.version)
    for ets, warning in results:
        if ets is not None:
            store.entries.append(ets)
        else:
            log.warning(warning)
            store.warnings.append(warning)
    return store
