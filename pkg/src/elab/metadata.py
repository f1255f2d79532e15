"""Typed metadata tuples and the attribute query language.

Every catalog object carries a set of (attribute_name, value_type,
attribute_values) tuples, at most one per attribute name, multi-valued
through the values list. Queries are boolean expressions over clauses:

    type = "Poster" and (city = "Batavia" or not year < 2004)

Keywords are case-insensitive, precedence is not > and > or, and a clause
matches a multi-valued attribute when any one value satisfies it. Unknown
attributes make the clause false instead of raising, so a query over sparse
metadata degrades to fewer matches rather than an error.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from datetime import datetime


class MetadataError(Exception):
    pass


class QuerySyntaxError(MetadataError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class QueryTypeError(MetadataError):
    pass


class ValueType(enum.Enum):
    INTEGER = "integer"
    FLOAT = "float"
    STRING = "string"
    DATE = "date"
    BOOLEAN = "boolean"


MetadataValue = int | float | str | bool | datetime

_DATE_FORMATS = (
    "%Y-%m-%dT%H:%M:%S.%f",
    "%Y-%m-%dT%H:%M:%S",
    "%Y-%m-%d %H:%M:%S.%f",
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%d",
)


def parse_date(text: str) -> datetime:
    """Accepts ISO-8601 with either T or space, optional fractional seconds."""
    for fmt in _DATE_FORMATS:
        try:
            return datetime.strptime(text, fmt)
        except ValueError:
            continue
    raise MetadataError(f"not a date: {text!r}")


def format_date(value: datetime) -> str:
    return value.isoformat()


def value_matches(value: MetadataValue, value_type: ValueType) -> bool:
    if value_type is ValueType.BOOLEAN:
        return isinstance(value, bool)
    if value_type is ValueType.INTEGER:
        return isinstance(value, int) and not isinstance(value, bool)
    if value_type is ValueType.FLOAT:
        return isinstance(value, float)
    if value_type is ValueType.STRING:
        return isinstance(value, str)
    if value_type is ValueType.DATE:
        return isinstance(value, datetime)
    return False


def coerce_value(raw: object, value_type: ValueType) -> MetadataValue:
    """Parse a wire-format value (JSON scalar or string) as value_type."""
    if value_type is ValueType.DATE and isinstance(raw, str):
        return parse_date(raw)
    if value_type is ValueType.FLOAT and isinstance(raw, int) and not isinstance(raw, bool):
        return float(raw)
    if isinstance(raw, (int, float, str, bool)) and value_matches(raw, value_type):
        return raw
    raise MetadataError(f"value {raw!r} does not parse as {value_type.value}")


def wire_value(value: MetadataValue) -> object:
    return format_date(value) if isinstance(value, datetime) else value


_NAME_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")


@dataclass(frozen=True)
class MetadataTuple:
    attribute_name: str
    value_type: ValueType
    attribute_values: tuple[MetadataValue, ...]

    def __post_init__(self):
        if not self.attribute_name or not _NAME_RE.match(self.attribute_name):
            raise MetadataError(f"bad attribute name {self.attribute_name!r}")
        if not self.attribute_values:
            raise MetadataError(f"attribute {self.attribute_name!r} has no values")
        for v in self.attribute_values:
            if not value_matches(v, self.value_type):
                raise MetadataError(
                    f"attribute {self.attribute_name!r}: value {v!r} is not {self.value_type.value}"
                )


def make_tuple(name: str, type_name: str, values: list) -> MetadataTuple:
    vt = ValueType(type_name)
    return MetadataTuple(name, vt, tuple(coerce_value(v, vt) for v in values))


# ---------------------------------------------------------------------------
# Query AST

QueryLiteral = int | float | str | bool


@dataclass(frozen=True)
class Clause:
    attribute: str
    op: str  # = != < <= > >= contains
    literal: QueryLiteral


@dataclass(frozen=True)
class Not:
    item: "Query"


@dataclass(frozen=True)
class And:
    items: tuple["Query", ...]


@dataclass(frozen=True)
class Or:
    items: tuple["Query", ...]


Query = Clause | Not | And | Or

_ORDERING_OPS = ("<", "<=", ">", ">=")


# ---------------------------------------------------------------------------
# Query parsing

_Q_TOKEN_RE = re.compile(
    r"""\s*(?:
        (?P<string>"(?:[^"\\]|\\.)*")
      | (?P<number>-?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?)
      | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
      | (?P<op><=|>=|!=|=|<|>)
      | (?P<paren>[()])
    )""",
    re.VERBOSE,
)


class _QueryParser:
    def __init__(self, text: str):
        self.text = text
        self.tokens: list[tuple[str, object, int]] = []
        pos = 0
        while pos < len(text):
            m = _Q_TOKEN_RE.match(text, pos)
            if not m or m.end() == m.start():
                stripped = text[pos:].lstrip()
                if not stripped:
                    break
                at = len(text) - len(stripped)
                raise QuerySyntaxError(f"unexpected character {stripped[0]!r}", at)
            at = m.start(m.lastgroup)  # type: ignore[arg-type]
            if m.lastgroup == "string":
                raw = m.group("string")[1:-1]
                value = raw.replace('\\"', '"').replace("\\\\", "\\")
                self.tokens.append(("string", value, at))
            elif m.lastgroup == "number":
                raw = m.group("number")
                value = float(raw) if ("." in raw or "e" in raw or "E" in raw) else int(raw)
                self.tokens.append(("number", value, at))
            elif m.lastgroup == "ident":
                self.tokens.append(("ident", m.group("ident"), at))
            elif m.lastgroup == "op":
                self.tokens.append(("op", m.group("op"), at))
            else:
                self.tokens.append(("paren", m.group("paren"), at))
            pos = m.end()
        self.tokens.append(("eof", None, len(text)))
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def next(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def at_keyword(self, word: str) -> bool:
        kind, value, _ = self.peek()
        return kind == "ident" and str(value).lower() == word

    def parse(self) -> Query:
        q = self.parse_expr()
        kind, value, at = self.peek()
        if kind != "eof":
            raise QuerySyntaxError(f"unexpected trailing input {value!r}", at)
        return q

    def parse_expr(self) -> Query:
        items = [self.parse_term()]
        while self.at_keyword("or"):
            self.next()
            items.append(self.parse_term())
        return items[0] if len(items) == 1 else Or(tuple(items))

    def parse_term(self) -> Query:
        items = [self.parse_factor()]
        while self.at_keyword("and"):
            self.next()
            items.append(self.parse_factor())
        return items[0] if len(items) == 1 else And(tuple(items))

    def parse_factor(self) -> Query:
        if self.at_keyword("not"):
            self.next()
            return Not(self.parse_factor())
        kind, value, at = self.peek()
        if kind == "paren" and value == "(":
            self.next()
            q = self.parse_expr()
            kind, value, at = self.next()
            if not (kind == "paren" and value == ")"):
                raise QuerySyntaxError("expected ')'", at)
            return q
        return self.parse_clause()

    def parse_clause(self) -> Clause:
        kind, name, at = self.next()
        if kind != "ident":
            raise QuerySyntaxError("expected an attribute name", at)
        if str(name).lower() in ("and", "or", "not", "contains", "true", "false"):
            raise QuerySyntaxError(f"keyword {name!r} is not an attribute name", at)
        kind, op, at = self.next()
        if kind == "ident" and str(op).lower() == "contains":
            op = "contains"
        elif kind != "op":
            raise QuerySyntaxError("expected a comparison operator", at)
        kind, value, at = self.next()
        if kind == "ident" and str(value).lower() in ("true", "false"):
            literal: QueryLiteral = str(value).lower() == "true"
        elif kind in ("string", "number"):
            literal = value  # type: ignore[assignment]
        else:
            raise QuerySyntaxError("expected a literal", at)
        if op == "contains" and not isinstance(literal, str):
            raise QueryTypeError("'contains' requires a string literal")
        if op in _ORDERING_OPS and isinstance(literal, bool):
            raise QueryTypeError(f"ordering comparator {op!r} does not apply to booleans")
        return Clause(str(name), str(op), literal)


def parse_query(text: str) -> Query:
    return _QueryParser(text).parse()


# ---------------------------------------------------------------------------
# Query printing (canonical form; parse_query(format_query(q)) == q)


def _format_literal(value: QueryLiteral) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, int):
        return str(value)
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'


def format_query(q: Query) -> str:
    if isinstance(q, Clause):
        return f"{q.attribute} {q.op} {_format_literal(q.literal)}"
    if isinstance(q, Not):
        inner = format_query(q.item)
        if isinstance(q.item, (And, Or)):
            inner = f"({inner})"
        return f"not {inner}"
    if isinstance(q, And):
        parts = []
        for item in q.items:
            text = format_query(item)
            parts.append(f"({text})" if isinstance(item, Or) else text)
        return " and ".join(parts)
    parts = [format_query(item) for item in q.items]
    return " or ".join(parts)


# ---------------------------------------------------------------------------
# Evaluation


def _compare(a, b, op: str) -> bool:
    if op == "=":
        return a == b
    if op == "!=":
        return a != b
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    return a >= b


def _clause_value_ok(value: MetadataValue, value_type: ValueType, clause: Clause) -> bool:
    lit = clause.literal
    op = clause.op
    if op == "contains":
        return value_type is ValueType.STRING and isinstance(lit, str) and lit in value  # type: ignore[operator]
    if value_type is ValueType.BOOLEAN:
        if op in _ORDERING_OPS or not isinstance(lit, bool):
            return False
        return _compare(value, lit, op)
    if isinstance(lit, bool):
        return False
    if value_type in (ValueType.INTEGER, ValueType.FLOAT):
        if not isinstance(lit, (int, float)):
            return False
        return _compare(value, lit, op)
    if value_type is ValueType.STRING:
        if not isinstance(lit, str):
            return False
        return _compare(value, lit, op)
    # date attribute: literal must be a parseable quoted date
    if not isinstance(lit, str):
        return False
    try:
        when = parse_date(lit)
    except MetadataError:
        return False
    return _compare(value, when, op)


def evaluate(q: Query, metadata: dict[str, MetadataTuple]) -> bool:
    """True when the metadata set satisfies the query.

    Multi-valued attributes match a clause when any single value does; a
    clause over an attribute the object lacks is false, whatever the
    comparator.
    """
    if isinstance(q, Clause):
        t = metadata.get(q.attribute)
        if t is None:
            return False
        return any(_clause_value_ok(v, t.value_type, q) for v in t.attribute_values)
    if isinstance(q, Not):
        return not evaluate(q.item, metadata)
    if isinstance(q, And):
        return all(evaluate(item, metadata) for item in q.items)
    return any(evaluate(item, metadata) for item in q.items)
