"""Sandboxed tensor-expression language used for node alternatives."""
from .analysis import (DependencySet, bind_by_name, canonical_form, dependencies,
                       identity_source, positional_params, rename_reference)
from .ast import (BinOp, Call, CallableCall, ExprAst, GlobalRef, Lambda, ListLit, Name, Num,
                  Param, UnaryOp, walk)
from .builtins import BUILTINS, INIT_BUILTINS
from .parser import (ArityError, DslError, DslSyntaxError, UnknownBuiltinError, parse, parse_init,
                     pretty_print, to_source, tokenize)

__all__ = [
    "ArityError", "BUILTINS", "BinOp", "Call", "CallableCall", "DependencySet", "DslError",
    "DslSyntaxError", "ExprAst", "GlobalRef", "INIT_BUILTINS", "Lambda", "ListLit", "Name", "Num",
    "Param", "UnaryOp", "UnknownBuiltinError", "bind_by_name", "canonical_form", "dependencies",
    "identity_source", "parse", "parse_init", "positional_params", "pretty_print",
    "rename_reference", "to_source", "tokenize", "walk",
]
