"""AST node types for the expression language.

All nodes are frozen dataclasses, so structural equality and hashing come for
free; two sources parse to equal trees iff they are the same program modulo
whitespace and redundant parentheses.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Union


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Name:
    """Free identifier: a dataset input or another node."""

    id: str


@dataclass(frozen=True)
class Param:
    """Reference to a parameter of the enclosing lambda."""

    id: str


@dataclass(frozen=True)
class GlobalRef:
    """``globals["key"]``"""

    key: str


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple
    kwargs: tuple = ()  # ((name, expr), ...) in source order


@dataclass(frozen=True)
class CallableCall:
    name: str  # includes the leading '@'
    args: tuple


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class UnaryOp:
    op: str
    operand: "Expr"


@dataclass(frozen=True)
class ListLit:
    items: tuple


@dataclass(frozen=True)
class Lambda:
    params: tuple
    body: "Expr"


Expr = Union[Num, Name, Param, GlobalRef, Call, CallableCall, BinOp, UnaryOp, ListLit]
ExprAst = Lambda


def children(node) -> tuple:
    if isinstance(node, (Call,)):
        return tuple(node.args) + tuple(v for _, v in node.kwargs)
    if isinstance(node, CallableCall):
        return tuple(node.args)
    if isinstance(node, BinOp):
        return (node.left, node.right)
    if isinstance(node, UnaryOp):
        return (node.operand,)
    if isinstance(node, ListLit):
        return tuple(node.items)
    if isinstance(node, Lambda):
        return (node.body,)
    return ()


def walk(node) -> Iterator:
    """Pre-order traversal."""
    stack = [node]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(reversed(children(n)))


def transform(node, fn):
    """Bottom-up rebuild: ``fn`` sees each node after its children were rebuilt."""
    if isinstance(node, Call):
        node = Call(
            node.func,
            tuple(transform(a, fn) for a in node.args),
            tuple((k, transform(v, fn)) for k, v in node.kwargs),
        )
    elif isinstance(node, CallableCall):
        node = CallableCall(node.name, tuple(transform(a, fn) for a in node.args))
    elif isinstance(node, BinOp):
        node = BinOp(node.op, transform(node.left, fn), transform(node.right, fn))
    elif isinstance(node, UnaryOp):
        node = UnaryOp(node.op, transform(node.operand, fn))
    elif isinstance(node, ListLit):
        node = ListLit(tuple(transform(i, fn) for i in node.items))
    elif isinstance(node, Lambda):
        node = Lambda(node.params, transform(node.body, fn))
    return fn(node)
