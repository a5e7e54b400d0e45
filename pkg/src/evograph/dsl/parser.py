"""Tokenizer, recursive-descent parser and pretty printer.

Grammar (see docs/grammar.md for the EBNF)::

    lambda  := 'lambda' [NAME (',' NAME)*] ':' expr
    expr    := arith [CMP arith]
    arith   := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := ('-' | '+') unary | power
    power   := atom ['**' unary]
    atom    := NUMBER | NAME | NAME '(' args ')' | '@' NAME '(' args ')'
             | 'globals' '[' STRING ']' | '(' expr ')' | '[' items ']'
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .ast import (BinOp, Call, CallableCall, GlobalRef, Lambda, ListLit, Name, Num, Param,
                  UnaryOp, walk)
from .builtins import BUILTINS, INIT_BUILTINS, Signature


class DslError(ValueError):
    """Base class for parse/validation failures; carries a 1-based position."""

    def __init__(self, message: str, line: int = 0, col: int = 0, expected: tuple = ()):
        self.message = message
        self.line = line
        self.col = col
        self.expected = tuple(expected)
        where = f"{line}:{col}: " if line else ""
        exp = f" (expected {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{where}{message}{exp}")


class DslSyntaxError(DslError):
    pass


class UnknownBuiltinError(DslError):
    pass


class ArityError(DslError):
    pass


@dataclass(frozen=True)
class Token:
    kind: str  # NUM, NAME, AT, STR, OP, EOF
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<at>@[A-Za-z_][A-Za-z0-9_]*)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<str>"[^"\\\n]*"|'[^'\\\n]*')
  | (?P<op>\*\*|<=|>=|==|!=|[-+*/<>()\[\],:=])
    """,
    re.VERBOSE,
)

COMPARISONS = ("<", "<=", ">", ">=", "==", "!=")
RESERVED = ("lambda", "globals")


def tokenize(source: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        col = pos - line_start + 1
        if not m:
            raise DslSyntaxError(f"unexpected character {source[pos]!r}", line, col)
        kind = m.lastgroup
        text = m.group()
        if kind == "ws":
            nl = text.count("\n")
            if nl:
                line += nl
                line_start = pos + text.rindex("\n") + 1
        else:
            tokens.append(Token({"num": "NUM", "at": "AT", "name": "NAME", "str": "STR",
                                 "op": "OP"}[kind], text, line, col))
        pos = m.end()
    tokens.append(Token("EOF", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, source: str, table: dict[str, Signature], params: tuple = ()):
        self.toks = tokenize(source)
        self.i = 0
        self.table = table
        self.params = params

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def fail(self, expected: tuple, tok: Token | None = None):
        tok = tok or self.tok
        found = repr(tok.text) if tok.kind != "EOF" else "end of input"
        raise DslSyntaxError(f"unexpected {found}", tok.line, tok.col, expected)

    def accept(self, text: str) -> bool:
        if self.tok.kind in ("OP", "NAME") and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        tok = self.tok
        if not self.accept(text):
            self.fail((repr(text),))
        return tok

    def lambda_(self) -> Lambda:
        self.expect("lambda")
        params = []
        if self.tok.kind == "NAME" and self.tok.text != "lambda":
            while True:
                tok = self.tok
                if tok.kind != "NAME" or tok.text == "lambda":
                    self.fail(("parameter name",))
                if tok.text in params:
                    raise DslSyntaxError(f"duplicate parameter {tok.text!r}", tok.line, tok.col)
                params.append(tok.text)
                self.i += 1
                if not self.accept(","):
                    break
        self.expect(":")
        self.params = tuple(params)
        body = self.expr()
        self.end()
        return Lambda(tuple(params), body)

    def end(self):
        if self.tok.kind != "EOF":
            self.fail(("end of input", "operator"))

    def expr(self):
        left = self.arith()
        if self.tok.kind == "OP" and self.tok.text in COMPARISONS:
            op = self.tok.text
            self.i += 1
            left = BinOp(op, left, self.arith())
            if self.tok.kind == "OP" and self.tok.text in COMPARISONS:
                self.fail(("non-comparison operator",))
        return left

    def arith(self):
        left = self.term()
        while self.tok.kind == "OP" and self.tok.text in ("+", "-"):
            op = self.tok.text
            self.i += 1
            left = BinOp(op, left, self.term())
        return left

    def term(self):
        left = self.unary()
        while self.tok.kind == "OP" and self.tok.text in ("*", "/"):
            op = self.tok.text
            self.i += 1
            left = BinOp(op, left, self.unary())
        return left

    def unary(self):
        if self.tok.kind == "OP" and self.tok.text in ("-", "+"):
            op = self.tok.text
            self.i += 1
            return UnaryOp(op, self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        if self.accept("**"):
            return BinOp("**", base, self.unary())
        return base

    def atom(self):
        tok = self.tok
        if tok.kind == "NUM":
            self.i += 1
            return Num(float(tok.text))
        if tok.kind == "AT":
            self.i += 1
            if tok.text == "@globals":
                raise DslSyntaxError("'@globals' is not callable; use globals[\"name\"]", tok.line, tok.col)
            if self.table is INIT_BUILTINS:
                raise DslSyntaxError("callables are not allowed in initialisers", tok.line, tok.col)
            self.expect("(")
            args, kwargs = self.args()
            if kwargs:
                raise DslSyntaxError("callables take positional arguments only", tok.line, tok.col)
            return CallableCall(tok.text, tuple(args))
        if tok.kind == "OP" and tok.text == "(":
            self.i += 1
            inner = self.expr()
            self.expect(")")
            return inner
        if tok.kind == "OP" and tok.text == "[":
            self.i += 1
            items = []
            if not self.accept("]"):
                while True:
                    items.append(self.expr())
                    if self.accept("]"):
                        break
                    if not self.accept(","):
                        self.fail(("','", "']'"))
            return ListLit(tuple(items))
        if tok.kind == "NAME":
            if tok.text == "lambda":
                self.fail(("expression",))
            self.i += 1
            if tok.text == "globals":
                self.expect("[")
                key = self.tok
                if key.kind != "STR":
                    self.fail(("quoted globals key",))
                self.i += 1
                self.expect("]")
                if self.table is INIT_BUILTINS:
                    raise DslSyntaxError("initialisers cannot reference globals", tok.line, tok.col)
                return GlobalRef(key.text[1:-1])
            if self.tok.kind == "OP" and self.tok.text == "(":
                self.i += 1
                return self.call(tok)
            if tok.text in self.params:
                return Param(tok.text)
            if self.table is INIT_BUILTINS:
                raise DslSyntaxError(f"unknown name {tok.text!r} in initialiser", tok.line, tok.col)
            return Name(tok.text)
        self.fail(("expression",))

    def args(self):
        args, kwargs = [], []
        if self.accept(")"):
            return args, kwargs
        while True:
            tok = self.tok
            if tok.kind == "NAME" and self.toks[self.i + 1].text == "=" and self.toks[self.i + 1].kind == "OP":
                self.i += 2
                kwargs.append((tok.text, self.expr()))
            else:
                if kwargs:
                    raise DslSyntaxError("positional argument after keyword argument", tok.line, tok.col)
                args.append(self.expr())
            if self.accept(")"):
                return args, kwargs
            if not self.accept(","):
                self.fail(("','", "')'"))

    def call(self, name_tok: Token):
        sig = self.table.get(name_tok.text)
        if sig is None:
            raise UnknownBuiltinError(f"unknown builtin {name_tok.text!r}", name_tok.line, name_tok.col)
        args, kwargs = self.args()
        try:
            slots = sig.bind(len(args), tuple(k for k, _ in kwargs))
        except ValueError as exc:
            raise ArityError(f"{name_tok.text}: {exc}", name_tok.line, name_tok.col) from None
        for slot, where in slots.items():
            if sig.kind_of(slot) != "static":
                continue
            exprs = [args[i] for i in where] if slot == "*" else (
                [args[where]] if isinstance(where, int) else [dict(kwargs)[where]])
            for e in exprs:
                if not is_constant(e):
                    raise ArityError(f"{name_tok.text}: argument {slot!r} must be a constant expression",
                                     name_tok.line, name_tok.col)
        return Call(name_tok.text, tuple(args), tuple(kwargs))


def is_constant(node) -> bool:
    return all(isinstance(n, (Num, UnaryOp, BinOp, ListLit)) for n in walk(node))


def parse(source: str) -> Lambda:
    """Parse ``lambda <params>: <expr>`` into a validated AST."""
    if not isinstance(source, str):
        raise DslSyntaxError(f"expected text, got {type(source).__name__}")
    return _Parser(source, BUILTINS).lambda_()


def parse_init(source: str):
    """Parse a ``@globals`` initialiser such as ``randn(8, 4) * 0.1``."""
    if not isinstance(source, str):
        source = str(source)
    p = _Parser(source, INIT_BUILTINS)
    expr = p.expr()
    p.end()
    return expr


# --- pretty printing -------------------------------------------------------

_PREC = {**{op: 1 for op in COMPARISONS}, "+": 2, "-": 2, "*": 3, "/": 3, "**": 5}
_UNARY_PREC = 4


def _fmt_num(v: float) -> str:
    if v.is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def _prec(node) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, UnaryOp):
        return _UNARY_PREC
    return 6


def to_source(node) -> str:
    """Render an AST as source text; ``parse(to_source(a)) == a`` for lambdas."""
    if isinstance(node, Lambda):
        head = "lambda " + ", ".join(node.params) if node.params else "lambda"
        return f"{head}: {to_source(node.body)}"
    if isinstance(node, Num):
        return _fmt_num(node.value)
    if isinstance(node, (Name, Param)):
        return node.id
    if isinstance(node, GlobalRef):
        return f'globals["{node.key}"]'
    if isinstance(node, Call):
        parts = [to_source(a) for a in node.args] + [f"{k}={to_source(v)}" for k, v in node.kwargs]
        return f"{node.func}({', '.join(parts)})"
    if isinstance(node, CallableCall):
        return f"{node.name}({', '.join(to_source(a) for a in node.args)})"
    if isinstance(node, ListLit):
        return "[" + ", ".join(to_source(i) for i in node.items) + "]"
    if isinstance(node, UnaryOp):
        inner = to_source(node.operand)
        # -x**2 already parses as -(x**2); anything looser needs parentheses
        if _prec(node.operand) < _UNARY_PREC or isinstance(node.operand, UnaryOp):
            inner = f"({inner})"
        return f"{node.op}{inner}"
    if isinstance(node, BinOp):
        p = _PREC[node.op]
        left, right = to_source(node.left), to_source(node.right)
        lp, rp = _prec(node.left), _prec(node.right)
        if node.op == "**":
            if lp <= p:
                left = f"({left})"
            if rp < _UNARY_PREC:
                right = f"({right})"
        elif p == 1:
            if lp <= 1:
                left = f"({left})"
            if rp <= 1:
                right = f"({right})"
        else:
            if lp < p:
                left = f"({left})"
            if rp <= p:
                right = f"({right})"
        return f"{left} {node.op} {right}"
    raise TypeError(f"not an AST node: {node!r}")


pretty_print = to_source
