from .conditions import CondState, enclosing_catches, key_conds_and_vars, not_return_conds, try_catch_conds
from .external import collect_external_vars, collect_key_apis, field_storers, trace_key_vars, trace_origins
from .extract import extract_ets, summarize_sink
from .model import (
    BASIC, ETS, NOT_RETURN, SYMBOLIC, TRY_CATCH, EtsStore, ExternalVar, ExtractConfig, KeyAPI,
    KeyCond, KeyVar, MessagePattern, Sink, VarRef,
)
from .sinks import find_sink_points, local_types, message_regex, sink_exception
from .store import StoreError, dumps_store, load_store, load_stores, loads_store, save_store

__all__ = [
    "BASIC", "ETS", "NOT_RETURN", "SYMBOLIC", "TRY_CATCH", "CondState", "EtsStore", "ExternalVar",
    "ExtractConfig", "KeyAPI", "KeyCond", "KeyVar", "MessagePattern", "Sink", "StoreError",
    "VarRef", "collect_external_vars", "collect_key_apis", "dumps_store", "enclosing_catches",
    "extract_ets", "field_storers", "find_sink_points", "key_conds_and_vars", "load_store",
    "load_stores", "loads_store", "local_types", "message_regex", "not_return_conds", "save_store",
    "sink_exception", "summarize_sink", "trace_key_vars", "trace_origins", "try_catch_conds",
]
