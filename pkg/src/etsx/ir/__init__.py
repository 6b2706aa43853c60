from .callgraph import CallGraph, Edge, build_cg, call_depth, depths_from, directed_depth, dispatch_targets
from .cfg import CFG, build_cfg
from .defuse import DefUseIndex, UnknownVariable, is_param_def, param_def, param_loc, use_def
from .model import (
    APPLICATION, FRAMEWORK, And, BinOp, ClassDef, Cmp, CondExpr, Const, FieldDef,
    FieldRef, IRError, MethodDef, New, Not, Or, Param, Program, Stmt, Var,
    cond_leaves, cond_vars, negate, normalize, package_prefix, simple_method_name,
    split_sig,
)
from .text import ParseError, load_program, parse_condition, parse_program, serialize_program

__all__ = [
    "APPLICATION", "FRAMEWORK", "And", "BinOp", "CFG", "CallGraph", "ClassDef", "Cmp",
    "CondExpr", "Const", "DefUseIndex", "Edge", "FieldDef", "FieldRef", "IRError",
    "MethodDef", "New", "Not", "Or", "Param", "ParseError", "Program", "Stmt",
    "UnknownVariable", "Var", "build_cfg", "build_cg", "call_depth", "cond_leaves",
    "cond_vars", "depths_from", "directed_depth", "dispatch_targets", "is_param_def",
    "load_program", "negate", "normalize", "package_prefix", "param_def", "param_loc",
    "parse_condition", "parse_program", "serialize_program", "simple_method_name",
    "split_sig", "use_def",
]
