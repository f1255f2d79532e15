"""Minimal DOT graph text support.

Covers only the subset the provenance exporter emits: a named digraph,
node statements with shape/label attributes, and `->` edge statements.
Emission is deterministic so equal graphs serialize to identical bytes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field


class DotParseError(Exception):
    pass


@dataclass
class DotGraph:
    name: str = "g"
    nodes: dict[str, dict[str, str]] = field(default_factory=dict)
    edges: list[tuple[str, str]] = field(default_factory=list)


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def emit(graph: DotGraph) -> str:
    """Nodes sorted by id, then edges sorted by (src, dst)."""
    if not graph.nodes and not graph.edges:
        return f"digraph {graph.name} {{ }}\n"
    lines = [f"digraph {graph.name} {{"]
    for node_id in sorted(graph.nodes):
        attrs = graph.nodes[node_id]
        if attrs:
            rendered = ", ".join(f"{k}={_quote(attrs[k])}" for k in sorted(attrs))
            lines.append(f"  {_quote(node_id)} [{rendered}];")
        else:
            lines.append(f"  {_quote(node_id)};")
    for src, dst in sorted(graph.edges):
        lines.append(f"  {_quote(src)} -> {_quote(dst)};")
    lines.append("}")
    return "\n".join(lines) + "\n"


_TOKEN_RE = re.compile(
    r"""\s*(?:
        (?P<string>"(?:[^"\\]|\\.)*")
      | (?P<arrow>->)
      | (?P<ident>[A-Za-z0-9_.+-]+)
      | (?P<punct>[{}\[\];,=])
    )""",
    re.VERBOSE,
)


def _tokens(text: str):
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            rest = text[pos:].strip()
            if not rest:
                return
            raise DotParseError(f"unexpected input at {rest[:20]!r}")
        if m.lastgroup == "string":
            raw = m.group("string")[1:-1]
            yield "name", raw.replace('\\"', '"').replace("\\\\", "\\")
        elif m.lastgroup == "arrow":
            yield "arrow", "->"
        elif m.lastgroup == "ident":
            yield "name", m.group("ident")
        else:
            yield "punct", m.group("punct")
        pos = m.end()


def parse(text: str) -> DotGraph:
    toks = list(_tokens(text))
    pos = 0

    def need(kind, value=None):
        nonlocal pos
        if pos >= len(toks):
            raise DotParseError("unexpected end of input")
        k, v = toks[pos]
        if k != kind or (value is not None and v != value):
            raise DotParseError(f"expected {value or kind}, got {v!r}")
        pos += 1
        return v

    need("name", "digraph")
    graph = DotGraph(name=need("name"))
    need("punct", "{")
    while pos < len(toks) and toks[pos] != ("punct", "}"):
        head = need("name")
        if pos < len(toks) and toks[pos] == ("arrow", "->"):
            pos += 1
            dst = need("name")
            graph.edges.append((head, dst))
            graph.nodes.setdefault(head, {})
            graph.nodes.setdefault(dst, {})
        else:
            attrs: dict[str, str] = {}
            if pos < len(toks) and toks[pos] == ("punct", "["):
                pos += 1
                while toks[pos] != ("punct", "]"):
                    key = need("name")
                    need("punct", "=")
                    attrs[key] = need("name")
                    if toks[pos] == ("punct", ","):
                        pos += 1
                pos += 1
            graph.nodes[head] = attrs
        if pos < len(toks) and toks[pos] == ("punct", ";"):
            pos += 1
    need("punct", "}")
    return graph
