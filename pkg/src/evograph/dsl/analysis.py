"""Static analysis over parsed expressions: dependency extraction, canonical
keys for duplicate detection, and the rewrites used by graph maintenance."""
from __future__ import annotations

from dataclasses import dataclass, field

from .ast import CallableCall, GlobalRef, Lambda, Name, Param, transform, walk
from .parser import DslError, to_source

GLOBALS_PARAM = "globals"


@dataclass(frozen=True)
class DependencySet:
    inputs: frozenset = field(default_factory=frozenset)
    nodes: frozenset = field(default_factory=frozenset)
    globals: frozenset = field(default_factory=frozenset)
    callables: frozenset = field(default_factory=frozenset)

    def __bool__(self) -> bool:
        return bool(self.inputs or self.nodes or self.globals or self.callables)

    @property
    def upstream(self) -> frozenset:
        """Graph nodes this expression reads (intermediate and callable)."""
        return self.nodes | self.callables


def dependencies(ast, declared_inputs=(), declared_nodes=None) -> DependencySet:
    """Classify every free identifier of ``ast``.

    Names in ``declared_inputs`` are inputs; any other bare name is a node.
    When ``declared_nodes`` is given, a name that is neither raises DslError.
    Lambda parameters are bound and never appear in the result.
    """
    declared_inputs = frozenset(declared_inputs)
    inputs, nodes, globs, calls = set(), set(), set(), set()
    for n in walk(ast):
        if isinstance(n, Name):
            if n.id in declared_inputs:
                inputs.add(n.id)
            elif declared_nodes is None or n.id in declared_nodes:
                nodes.add(n.id)
            else:
                raise DslError(f"unresolvable identifier {n.id!r}")
        elif isinstance(n, GlobalRef):
            globs.add(n.key)
        elif isinstance(n, CallableCall):
            calls.add(n.name)
    return DependencySet(frozenset(inputs), frozenset(nodes), frozenset(globs), frozenset(calls))


def bind_by_name(ast: Lambda) -> Lambda:
    """Resolve parameters as references to same-named inputs/nodes.

    Non-callable nodes bind their lambda parameters by name, so
    ``lambda pre_var, post_var: pre_var / post_var`` reads the two nodes. The
    result has no parameters and only free names.
    """
    if not positional_params(ast):
        return ast
    body = transform(ast.body, lambda n: Name(n.id) if isinstance(n, Param) and n.id != GLOBALS_PARAM
                     else n)
    return Lambda(tuple(p for p in ast.params if p == GLOBALS_PARAM), body)


def positional_params(ast: Lambda) -> tuple:
    """Parameters supplied by a caller (``globals`` is bound implicitly)."""
    return tuple(p for p in ast.params if p != GLOBALS_PARAM)


def canonical_form(ast: Lambda, rename_params: bool = True) -> str:
    """Whitespace-normalised rendering with positional parameter names.

    Two alternatives are duplicates iff their canonical forms are equal. No
    algebraic normalisation is attempted.
    """
    if rename_params and ast.params:
        mapping = {p: (p if p == GLOBALS_PARAM else f"_{i}") for i, p in enumerate(ast.params)}
        body = transform(ast.body, lambda n: Param(mapping[n.id]) if isinstance(n, Param) else n)
        ast = Lambda(tuple(mapping[p] for p in ast.params), body)
    return to_source(ast)


def identity_source(ast: Lambda) -> str | None:
    """If the (by-name bound) lambda just forwards one input/node, return its name."""
    body = ast.body
    if isinstance(body, Name):
        return body.id
    if isinstance(body, Param) and body.id != GLOBALS_PARAM:
        return body.id
    return None


def rename_reference(ast: Lambda, old: str, new: str) -> Lambda:
    """Replace free references to ``old`` by ``new`` (parameters untouched)."""
    def fn(n):
        if isinstance(n, Name) and n.id == old:
            return Name(new)
        if isinstance(n, CallableCall) and n.name == old:
            return CallableCall(new, n.args)
        return n
    return transform(ast, fn)
