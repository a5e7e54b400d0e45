"""TOON: a compact tabular text rendering of the diagnostics.

Layout::

    context:
      key: value
    features[N]{name,depth,...}:
      row,values,...
      ... (K more features)
    subnodes[M]{...}:
      ...

Reals are fixed-point (3 decimals in tables, 4 for AUC-like context values),
flags are ``T``/``F``, and an empty string field is written as ``-``.
Lines indented by four or more spaces continue the previous line, so
page-wrapped copies parse as well.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, fields, is_dataclass

FEATURE_FIELDS = (
    ("name", "str"), ("depth", "int"), ("ind_auc", "f3"), ("imp", "f3"), ("sign", "sign"),
    ("corr", "f3"), ("max_corr", "f3"), ("n_hi_corr", "int"), ("most_corr", "str"),
    ("cluster", "int"), ("cl_size", "int"), ("resid_corr", "f3"), ("resid_sq", "f3"),
    ("w_stab", "f3"),
)
SUBNODE_FIELDS = (
    ("name", "str"), ("depth", "int"), ("n_deps", "int"), ("bttlnk", "flag"),
    ("n_paths", "int"), ("cfg_auc_max", "f3"), ("qi_max", "f3"), ("qd_max", "f3"),
    ("imp_max", "f3"), ("ind_auc_max", "f3"), ("resid_max", "f3"),
)
TABLES = {"features": FEATURE_FIELDS, "subnodes": SUBNODE_FIELDS}

# decimals for real-valued context entries; anything unlisted gets 4
CONTEXT_DECIMALS = {"effective_rank": 1, "mean_max_corr": 3}

_HEADER = re.compile(r"^(\w+)\[(\d+)\]\{([^{}]*)\}:$")
_MORE = re.compile(r"^\.\.\. \((\d+) more (\w+)\)$")
_INT = re.compile(r"^-?\d+$")
_REAL = re.compile(r"^-?(\d+\.\d*|\.\d+|\d+)([eE][-+]?\d+)?$|^-?(inf|nan)$")


class ToonFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


@dataclass
class ToonReport:
    context: dict = field(default_factory=dict)
    features: list = field(default_factory=list)  # dicts keyed by FEATURE_FIELDS
    subnodes: list = field(default_factory=list)
    n_features: int | None = None  # declared row count; defaults to len(features)
    n_subnodes: int | None = None

    def declared(self, table: str) -> int:
        n = getattr(self, f"n_{table}")
        return len(getattr(self, table)) if n is None else n


def _fmt(value, kind: str) -> str:
    if kind == "int":
        return str(int(value))
    if kind == "f3":
        return f"{float(value):.3f}"
    if kind == "flag":
        return "T" if value else "F"
    text = str(value)
    if kind == "sign":
        if text not in ("+", "-"):
            raise ToonFormatError(f"sign must be '+' or '-', got {text!r}")
        return text
    if "," in text or "\n" in text:
        raise ToonFormatError(f"text field contains a separator: {text!r}")
    return text or "-"


def _parse_value(text: str, kind: str, line: int):
    try:
        if kind == "int":
            if not _INT.match(text):
                raise ValueError
            return int(text)
        if kind == "f3":
            if not _REAL.match(text):
                raise ValueError
            return float(text)
    except ValueError:
        raise ToonFormatError(f"expected {'an integer' if kind == 'int' else 'a number'}, got {text!r}", line)
    if kind == "flag":
        if text not in ("T", "F"):
            raise ToonFormatError(f"expected T or F, got {text!r}", line)
        return text == "T"
    if kind == "sign":
        if text not in ("+", "-"):
            raise ToonFormatError(f"expected + or -, got {text!r}", line)
        return text
    return "" if text == "-" else text


def _record(obj, spec) -> dict:
    d = {f.name: getattr(obj, f.name) for f in fields(obj)} if is_dataclass(obj) else dict(obj)
    missing = [k for k, _ in spec if k not in d]
    if missing:
        raise ToonFormatError(f"record lacks fields {missing}")
    return {k: d[k] for k, _ in spec}


def quantize(record, spec) -> dict:
    """The record as it reads back after a round trip through text."""
    return {k: _parse_value(_fmt(v, kind), kind, 0) for (k, kind), v in
            zip(spec, _record(record, spec).values())}


def _fmt_context(key: str, value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return f"{value:.{CONTEXT_DECIMALS.get(key, 4)}f}"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_fmt_context(key, v) for v in value) + "]"
    text = str(value)
    if "\n" in text:
        raise ToonFormatError(f"context value for {key!r} spans lines")
    return text


def _parse_context(text: str):
    if text.startswith("[") and text.endswith("]"):
        inner = text[1:-1].strip()
        return [_parse_context(t.strip()) for t in inner.split(",")] if inner else []
    if text in ("true", "false"):
        return text == "true"
    if _INT.match(text):
        return int(text)
    if _REAL.match(text):
        return float(text)
    return text


def quantize_context(context: dict) -> dict:
    return {k: _parse_context(_fmt_context(k, v)) for k, v in context.items()}


def emit_toon(context, features=(), subnodes=(), n_features=None, n_subnodes=None) -> str:
    """Render diagnostics as TOON text.

    ``context`` may be a :class:`ToonReport`, in which case the other
    arguments are taken from it. Declared counts larger than the number of
    rows produce a ``... (K more ...)`` marker.
    """
    if isinstance(context, ToonReport):
        rep = context
        context, features, subnodes = rep.context, rep.features, rep.subnodes
        n_features, n_subnodes = rep.n_features, rep.n_subnodes
    lines = ["context:"]
    for key, value in context.items():
        lines.append(f"  {key}: {_fmt_context(key, value)}")
    for table, rows, declared in (("features", features, n_features),
                                  ("subnodes", subnodes, n_subnodes)):
        spec = TABLES[table]
        rows = list(rows)
        total = len(rows) if declared is None else int(declared)
        if total < len(rows):
            raise ToonFormatError(f"{table}: declared {total} rows but {len(rows)} given")
        lines.append(f"{table}[{total}]{{{','.join(k for k, _ in spec)}}}:")
        for r in rows:
            rec = _record(r, spec)
            lines.append("  " + ",".join(_fmt(rec[k], kind) for k, kind in spec))
        if total > len(rows):
            lines.append(f"  ... ({total - len(rows)} more {table})")
    return "\n".join(lines) + "\n"


def _logical_lines(text: str) -> list:
    """(line number, content) with continuation lines folded in."""
    out = []
    for i, raw in enumerate(text.splitlines(), 1):
        if not raw.strip():
            continue
        if raw.startswith("    ") and out:
            num, prev = out[-1]
            out[-1] = (num, prev + raw.strip())
        else:
            out.append((i, raw.rstrip()))
    return out


def parse_toon(text: str) -> ToonReport:
    rep = ToonReport()
    section = None
    counts: dict = {}
    for num, line in _logical_lines(text):
        if not line.startswith(" "):
            if line == "context:":
                if section is not None:
                    raise ToonFormatError("context must come first", num)
                section = "context"
                continue
            m = _HEADER.match(line)
            if not m:
                raise ToonFormatError(f"malformed header {line!r}", num)
            table, declared, names = m.group(1), int(m.group(2)), m.group(3).split(",")
            if table not in TABLES:
                raise ToonFormatError(f"unknown table {table!r}", num)
            expected = [k for k, _ in TABLES[table]]
            if names != expected:
                raise ToonFormatError(f"{table} fields {names} differ from {expected}", num)
            if table in counts:
                raise ToonFormatError(f"duplicate table {table!r}", num)
            section = table
            counts[table] = [declared, 0]
            setattr(rep, f"n_{table}", declared)
            continue
        body = line.strip()
        if section == "context":
            key, sep, value = body.partition(":")
            if not sep or not key:
                raise ToonFormatError(f"malformed context entry {body!r}", num)
            rep.context[key.strip()] = _parse_context(value.strip())
        elif section in TABLES:
            m = _MORE.match(body)
            if m:
                if m.group(2) != section:
                    raise ToonFormatError(f"truncation marker names {m.group(2)!r} inside {section}", num)
                counts[section][1] += int(m.group(1))
                continue
            spec = TABLES[section]
            values = body.split(",")
            if len(values) != len(spec):
                raise ToonFormatError(f"{section} row has {len(values)} fields, expected {len(spec)}", num)
            getattr(rep, section).append(
                {k: _parse_value(v, kind, num) for (k, kind), v in zip(spec, values)})
        else:
            raise ToonFormatError("row outside any section", num)
    for table, (declared, omitted) in counts.items():
        shown = len(getattr(rep, table))
        if shown + omitted != declared:
            raise ToonFormatError(f"{table}: header declares {declared} rows, found {shown} "
                                  f"plus {omitted} omitted")
    return rep
