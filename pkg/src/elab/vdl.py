"""Recipe language for analysis workflows.

A transformation (TR) is the counterpart of a function definition: a named,
versioned, parameterized analysis step, either atomic (backed by a registered
executable) or compound (composing other transformations). A derivation (DV)
is the counterpart of a function call: a TR plus concrete arguments. Both are
written in a small text language:

    TR histogram:1(input logical_file data, scalar integer bins = 60,
                   output logical_file plotdata) atomic "histogram"

    DV run14_hist = histogram:1(data = @run14.raw, bins = 30,
                                plotdata = @run14.hist)

``@name`` is a file reference: in a DV it names a concrete logical file; in
a compound body it names either a caller parameter or a body-local
intermediate file. ``#`` starts a comment. All functions here are pure over
immutable inputs.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from datetime import datetime

Literal = int | float | str | bool


class VdlError(Exception):
    pass


class VdlSyntaxError(VdlError):
    def __init__(self, message: str, line: int, column: int, expected: str | None = None):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column
        self.expected = expected


class DuplicateParamError(VdlError):
    def __init__(self, name: str):
        super().__init__(f"duplicate parameter name {name!r}")
        self.name = name


class UnresolvedTransformation(VdlError):
    def __init__(self, name: str):
        super().__init__(f"transformation {name!r} is not resolvable")
        self.name = name


class CycleDetected(VdlError):
    def __init__(self, path: list[str]):
        super().__init__("transformation call cycle: " + " -> ".join(path))
        self.path = list(path)


class ExpansionError(VdlError):
    pass


class Direction(enum.Enum):
    INPUT = "input"
    OUTPUT = "output"
    SCALAR = "scalar"


class ValueType(enum.Enum):
    LOGICAL_FILE = "logical_file"
    INTEGER = "integer"
    FLOAT = "float"
    STRING = "string"
    BOOLEAN = "boolean"


SCALAR_TYPES = (ValueType.INTEGER, ValueType.FLOAT, ValueType.STRING, ValueType.BOOLEAN)


@dataclass(frozen=True)
class Ref:
    """An ``@name`` file reference (concrete lfn, caller param, or local)."""

    name: str


BindingValue = Ref | Literal
Bindings = tuple[tuple[str, BindingValue], ...]


@dataclass(frozen=True)
class ParamSpec:
    name: str
    direction: Direction
    value_type: ValueType
    default: Literal | None = None
    annotation: str | None = None

    def __post_init__(self):
        if self.direction in (Direction.INPUT, Direction.OUTPUT):
            if self.value_type is not ValueType.LOGICAL_FILE:
                raise VdlError(f"{self.direction.value} parameter {self.name!r} must be logical_file")
            if self.default is not None:
                raise VdlError(f"file parameter {self.name!r} cannot have a default")
        else:
            if self.value_type not in SCALAR_TYPES:
                raise VdlError(f"scalar parameter {self.name!r} cannot be logical_file")
            if self.default is not None and not literal_matches(self.default, self.value_type):
                raise VdlError(f"default for {self.name!r} does not match {self.value_type.value}")


@dataclass(frozen=True)
class AtomicBody:
    executable_name: str


@dataclass(frozen=True)
class Call:
    tr_name: str
    bindings: Bindings


@dataclass(frozen=True)
class CompoundBody:
    calls: tuple[Call, ...]


@dataclass(frozen=True)
class Transformation:
    name: str
    version: int
    params: tuple[ParamSpec, ...]
    body: AtomicBody | CompoundBody

    def __post_init__(self):
        if self.version < 0:
            raise VdlError(f"negative version on {self.name!r}")
        seen = set()
        for p in self.params:
            if p.name in seen:
                raise DuplicateParamError(p.name)
            seen.add(p.name)

    @property
    def is_atomic(self) -> bool:
        return isinstance(self.body, AtomicBody)

    def param(self, name: str) -> ParamSpec | None:
        for p in self.params:
            if p.name == name:
                return p
        return None

    @property
    def key(self) -> str:
        return f"{self.name}:{self.version}"


@dataclass(frozen=True)
class Derivation:
    name: str
    tr_name: str
    tr_version: int
    bindings: Bindings

    def binding(self, name: str) -> BindingValue | None:
        for k, v in self.bindings:
            if k == name:
                return v
        return None


@dataclass(frozen=True)
class LogicalFile:
    lfn: str
    physical_path: str | None = None
    content_digest: str | None = None
    registered_at: datetime | None = None

    def __post_init__(self):
        if not valid_lfn(self.lfn):
            raise VdlError(f"invalid logical file name {self.lfn!r}")


_LFN_RE = re.compile(r"[A-Za-z0-9_][A-Za-z0-9_.+-]*$")


def valid_lfn(lfn: str) -> bool:
    return bool(lfn) and not any(c.isspace() for c in lfn) and bool(_LFN_RE.match(lfn))


def literal_matches(value: Literal, value_type: ValueType) -> bool:
    if value_type is ValueType.BOOLEAN:
        return isinstance(value, bool)
    if value_type is ValueType.INTEGER:
        return isinstance(value, int) and not isinstance(value, bool)
    if value_type is ValueType.FLOAT:
        return isinstance(value, float)
    if value_type is ValueType.STRING:
        return isinstance(value, str)
    return False


def coerce_literal(value: Literal, value_type: ValueType) -> Literal | None:
    """Return the value as ``value_type`` (int widens to float), else None."""
    if literal_matches(value, value_type):
        return value
    if value_type is ValueType.FLOAT and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    return None


# ---------------------------------------------------------------------------
# Tokenizer


@dataclass(frozen=True)
class _Token:
    kind: str  # IDENT NUMBER STRING ATNAME PUNCT EOF
    value: object
    line: int
    column: int
    is_float: bool = False


_NUMBER_RE = re.compile(r"-?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?")
_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_ATNAME_RE = re.compile(r"[A-Za-z0-9_][A-Za-z0-9_.+-]*")
_PUNCT = set("(){},;=:")
_ESCAPES = {"\\": "\\", '"': '"', "n": "\n", "t": "\t", "r": "\r"}


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col
        if c == '"':
            value, i2 = _lex_string(text, i, start_line, start_col)
            tokens.append(_Token("STRING", value, start_line, start_col))
            col += i2 - i
            i = i2
            continue
        if c == "@":
            m = _ATNAME_RE.match(text, i + 1)
            if not m:
                raise VdlSyntaxError("expected a name after '@'", line, col, expected="name")
            tokens.append(_Token("ATNAME", m.group(0), start_line, start_col))
            col += m.end() - i
            i = m.end()
            continue
        if c.isdigit() or (c == "-" and i + 1 < n and (text[i + 1].isdigit() or text[i + 1] == ".")) or (
            c == "." and i + 1 < n and text[i + 1].isdigit()
        ):
            m = _NUMBER_RE.match(text, i)
            assert m
            raw = m.group(0)
            is_float = "." in raw or "e" in raw or "E" in raw
            value = float(raw) if is_float else int(raw)
            tokens.append(_Token("NUMBER", value, start_line, start_col, is_float=is_float))
            col += m.end() - i
            i = m.end()
            continue
        m = _IDENT_RE.match(text, i)
        if m:
            tokens.append(_Token("IDENT", m.group(0), start_line, start_col))
            col += m.end() - i
            i = m.end()
            continue
        if c in _PUNCT:
            tokens.append(_Token("PUNCT", c, start_line, start_col))
            i += 1
            col += 1
            continue
        raise VdlSyntaxError(f"unexpected character {c!r}", line, col)
    tokens.append(_Token("EOF", None, line, col))
    return tokens


def _lex_string(text: str, i: int, line: int, col: int) -> tuple[str, int]:
    out: list[str] = []
    j = i + 1
    n = len(text)
    while j < n:
        c = text[j]
        if c == '"':
            return "".join(out), j + 1
        if c == "\n":
            break
        if c == "\\":
            if j + 1 >= n or text[j + 1] not in _ESCAPES:
                raise VdlSyntaxError("bad escape in string", line, col)
            out.append(_ESCAPES[text[j + 1]])
            j += 2
            continue
        out.append(c)
        j += 1
    raise VdlSyntaxError("unterminated string", line, col, expected='"')


# ---------------------------------------------------------------------------
# Parser


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def next(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, expected: str) -> VdlSyntaxError:
        tok = self.peek()
        got = "end of input" if tok.kind == "EOF" else repr(tok.value)
        return VdlSyntaxError(f"expected {expected}, got {got}", tok.line, tok.column, expected=expected)

    def expect_punct(self, ch: str) -> _Token:
        tok = self.peek()
        if tok.kind != "PUNCT" or tok.value != ch:
            raise self.fail(f"'{ch}'")
        return self.next()

    def expect_ident(self, what: str = "identifier") -> str:
        tok = self.peek()
        if tok.kind != "IDENT":
            raise self.fail(what)
        return self.next().value  # type: ignore[return-value]

    def expect_keyword(self, *words: str) -> str:
        tok = self.peek()
        if tok.kind != "IDENT" or tok.value not in words:
            raise self.fail(" or ".join(f"'{w}'" for w in words))
        return self.next().value  # type: ignore[return-value]

    def at_punct(self, ch: str) -> bool:
        tok = self.peek()
        return tok.kind == "PUNCT" and tok.value == ch

    def at_keyword(self, word: str) -> bool:
        tok = self.peek()
        return tok.kind == "IDENT" and tok.value == word

    def parse_definitions(self) -> list[Transformation | Derivation]:
        defs: list[Transformation | Derivation] = []
        while self.peek().kind != "EOF":
            word = self.expect_keyword("TR", "DV")
            if word == "TR":
                defs.append(self.parse_tr())
            else:
                defs.append(self.parse_dv())
        return defs

    def parse_tr(self) -> Transformation:
        name = self.expect_ident("transformation name")
        version = 0
        if self.at_punct(":"):
            self.next()
            version = self.expect_int("version")
        self.expect_punct("(")
        params = [self.parse_param()]
        while self.at_punct(","):
            self.next()
            params.append(self.parse_param())
        self.expect_punct(")")
        if self.at_keyword("atomic"):
            self.next()
            tok = self.peek()
            if tok.kind != "STRING":
                raise self.fail("quoted executable name")
            body: AtomicBody | CompoundBody = AtomicBody(self.next().value)  # type: ignore[arg-type]
        elif self.at_punct("{"):
            self.next()
            calls = [self.parse_call()]
            while not self.at_punct("}"):
                calls.append(self.parse_call())
            self.next()
            body = CompoundBody(tuple(calls))
        else:
            raise self.fail("'atomic' or '{'")
        return Transformation(name, version, tuple(params), body)

    def expect_int(self, what: str) -> int:
        tok = self.peek()
        if tok.kind != "NUMBER" or tok.is_float:
            raise self.fail(what)
        return self.next().value  # type: ignore[return-value]

    def parse_param(self) -> ParamSpec:
        word = self.expect_keyword("input", "output", "scalar")
        if word in ("input", "output"):
            self.expect_keyword("logical_file")
            name = self.expect_ident("parameter name")
            direction = Direction.INPUT if word == "input" else Direction.OUTPUT
            annotation = self.parse_doc()
            return ParamSpec(name, direction, ValueType.LOGICAL_FILE, annotation=annotation)
        type_word = self.expect_keyword("integer", "float", "string", "boolean")
        value_type = ValueType(type_word)
        name = self.expect_ident("parameter name")
        default: Literal | None = None
        if self.at_punct("="):
            self.next()
            default = self.parse_literal()
            coerced = coerce_literal(default, value_type)
            if coerced is None:
                tok = self.tokens[self.pos - 1]
                raise VdlSyntaxError(
                    f"default for {name!r} does not match {value_type.value}", tok.line, tok.column
                )
            default = coerced
        annotation = self.parse_doc()
        return ParamSpec(name, Direction.SCALAR, value_type, default=default, annotation=annotation)

    def parse_doc(self) -> str | None:
        tok = self.peek()
        if tok.kind == "ATNAME" and tok.value == "doc":
            self.next()
            if self.peek().kind != "STRING":
                raise self.fail("quoted annotation after '@doc'")
            return self.next().value  # type: ignore[return-value]
        return None

    def parse_literal(self) -> Literal:
        tok = self.peek()
        if tok.kind == "NUMBER":
            return self.next().value  # type: ignore[return-value]
        if tok.kind == "STRING":
            return self.next().value  # type: ignore[return-value]
        if tok.kind == "IDENT" and tok.value in ("true", "false"):
            return self.next().value == "true"
        raise self.fail("literal")

    def parse_binding(self) -> tuple[str, BindingValue]:
        name = self.expect_ident("binding name")
        self.expect_punct("=")
        tok = self.peek()
        if tok.kind == "ATNAME":
            return name, Ref(self.next().value)  # type: ignore[arg-type]
        return name, self.parse_literal()

    def parse_call(self) -> Call:
        name = self.expect_ident("transformation name")
        self.expect_punct("(")
        bindings = [self.parse_binding()]
        while self.at_punct(","):
            self.next()
            bindings.append(self.parse_binding())
        self.expect_punct(")")
        self.expect_punct(";")
        return Call(name, tuple(bindings))

    def parse_dv(self) -> Derivation:
        name = self.expect_ident("derivation name")
        self.expect_punct("=")
        tr_name = self.expect_ident("transformation name")
        self.expect_punct(":")
        version = self.expect_int("version")
        self.expect_punct("(")
        bindings = [self.parse_binding()]
        while self.at_punct(","):
            self.next()
            bindings.append(self.parse_binding())
        self.expect_punct(")")
        return Derivation(name, tr_name, version, tuple(bindings))


def parse_vdl(text: str) -> list[Transformation | Derivation]:
    """Parse recipe source into definitions, in source order."""
    return _Parser(text).parse_definitions()


# ---------------------------------------------------------------------------
# Serializer


def _format_literal(value: Literal) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, int):
        return str(value)
    out = value.replace("\\", "\\\\").replace('"', '\\"')
    out = out.replace("\n", "\\n").replace("\t", "\\t").replace("\r", "\\r")
    return f'"{out}"'


def _format_binding_value(value: BindingValue) -> str:
    if isinstance(value, Ref):
        return f"@{value.name}"
    return _format_literal(value)


def _format_param(p: ParamSpec) -> str:
    if p.direction is Direction.SCALAR:
        out = f"scalar {p.value_type.value} {p.name}"
        if p.default is not None:
            out += f" = {_format_literal(p.default)}"
    else:
        out = f"{p.direction.value} logical_file {p.name}"
    if p.annotation is not None:
        out += f" @doc {_format_literal(p.annotation)}"
    return out


def _format_bindings(bindings: Bindings) -> str:
    return ", ".join(f"{name} = {_format_binding_value(v)}" for name, v in bindings)


def serialize(defs: list[Transformation | Derivation]) -> str:
    """Canonical text form; ``parse_vdl(serialize(defs))`` equals ``defs``."""
    blocks: list[str] = []
    for d in defs:
        if isinstance(d, Transformation):
            head = f"TR {d.name}:{d.version}(" + ", ".join(_format_param(p) for p in d.params) + ")"
            if isinstance(d.body, AtomicBody):
                blocks.append(f"{head} atomic {_format_literal(d.body.executable_name)}")
            else:
                lines = [head + " {"]
                for call in d.body.calls:
                    lines.append(f"  {call.tr_name}({_format_bindings(call.bindings)});")
                lines.append("}")
                blocks.append("\n".join(lines))
        else:
            blocks.append(
                f"DV {d.name} = {d.tr_name}:{d.tr_version}({_format_bindings(d.bindings)})"
            )
    return "\n\n".join(blocks) + ("\n" if blocks else "")


# ---------------------------------------------------------------------------
# Validation


@dataclass(frozen=True)
class Problem:
    kind: str
    param: str
    message: str
    expected: str | None = None
    got: str | None = None


@dataclass
class ValidationReport:
    problems: list[Problem] = field(default_factory=list)
    effective_bindings: dict[str, Literal | str] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.problems

    def add(self, kind: str, param: str, message: str, expected: str | None = None, got: str | None = None):
        self.problems.append(Problem(kind, param, message, expected, got))


def _type_name(value: BindingValue) -> str:
    if isinstance(value, Ref):
        return "logical_file"
    if isinstance(value, bool):
        return "boolean"
    if isinstance(value, int):
        return "integer"
    if isinstance(value, float):
        return "float"
    return "string"


def validate_derivation(dv: Derivation, tr: Transformation) -> ValidationReport:
    """Check a derivation against its transformation and fill in defaults.

    An empty problem list means the derivation is executable; the report then
    carries the effective binding map (files as lfn strings, scalars as
    literals with defaults applied).
    """
    report = ValidationReport()
    params = {p.name: p for p in tr.params}
    bound: dict[str, BindingValue] = {}
    for name, value in dv.bindings:
        if name not in params:
            report.add("unknown_param", name, f"transformation {tr.name!r} has no parameter {name!r}")
            continue
        bound[name] = value
    for p in tr.params:
        if p.name in bound:
            value = bound[p.name]
            if p.direction is Direction.SCALAR:
                if isinstance(value, Ref):
                    report.add(
                        "type_mismatch", p.name,
                        f"parameter {p.name!r} expects a {p.value_type.value} literal",
                        expected=p.value_type.value, got="logical_file",
                    )
                    continue
                coerced = coerce_literal(value, p.value_type)
                if coerced is None:
                    report.add(
                        "type_mismatch", p.name,
                        f"parameter {p.name!r} expects {p.value_type.value}, got {_type_name(value)}",
                        expected=p.value_type.value, got=_type_name(value),
                    )
                    continue
                report.effective_bindings[p.name] = coerced
            else:
                if not isinstance(value, Ref):
                    report.add(
                        "type_mismatch", p.name,
                        f"parameter {p.name!r} expects a file reference (@lfn)",
                        expected="logical_file", got=_type_name(value),
                    )
                    continue
                if not valid_lfn(value.name):
                    report.add("type_mismatch", p.name, f"invalid logical file name {value.name!r}")
                    continue
                report.effective_bindings[p.name] = value.name
        elif p.direction is Direction.SCALAR and p.default is not None:
            report.effective_bindings[p.name] = p.default
        else:
            report.add("missing_binding", p.name, f"required parameter {p.name!r} is not bound")
    inputs = {
        report.effective_bindings[p.name]
        for p in tr.params
        if p.direction is Direction.INPUT and p.name in report.effective_bindings
    }
    for p in tr.params:
        if p.direction is Direction.OUTPUT and report.effective_bindings.get(p.name) in inputs:
            report.add(
                "output_input_clash", p.name,
                f"output {p.name!r} reuses an input logical file name",
            )
    return report


def validate_transformation(tr: Transformation, resolver) -> ValidationReport:
    """Structural checks for compound bodies; atomic bodies are always valid.

    ``resolver`` maps a transformation name to a Transformation or raises
    ``UnresolvedTransformation``.
    """
    report = ValidationReport()
    if isinstance(tr.body, AtomicBody):
        return report
    caller = {p.name: p for p in tr.params}
    produced_locals: dict[str, int] = {}
    produced_outputs: set[str] = set()
    try:
        _check_acyclic(tr, resolver, [tr.name])
    except UnresolvedTransformation as exc:
        report.add("unresolved_transformation", exc.name, str(exc))
        return report
    except CycleDetected as exc:
        report.add("cycle", tr.name, str(exc))
        return report
    for idx, call in enumerate(tr.body.calls):
        callee = resolver(call.tr_name)
        callee_params = {p.name: p for p in callee.params}
        bound_names = set()
        for pname, arg in call.bindings:
            cp = callee_params.get(pname)
            if cp is None:
                report.add("unknown_param", pname, f"call {idx} ({call.tr_name}): no parameter {pname!r}")
                continue
            bound_names.add(pname)
            if isinstance(arg, Ref):
                src = caller.get(arg.name)
                if src is not None:
                    _check_ref_compat(report, idx, call.tr_name, cp, src)
                    if cp.direction is Direction.OUTPUT and src.direction is Direction.OUTPUT:
                        produced_outputs.add(src.name)
                else:
                    if cp.value_type is not ValueType.LOGICAL_FILE:
                        report.add(
                            "type_mismatch", pname,
                            f"call {idx} ({call.tr_name}): scalar {pname!r} bound to a file reference",
                        )
                    elif cp.direction is Direction.OUTPUT:
                        produced_locals[arg.name] = produced_locals.get(arg.name, 0) + 1
                        if produced_locals[arg.name] > 1:
                            report.add(
                                "duplicate_producer", arg.name,
                                f"intermediate {arg.name!r} is produced more than once",
                            )
                    elif arg.name not in produced_locals:
                        report.add(
                            "use_before_production", arg.name,
                            f"call {idx} ({call.tr_name}): intermediate {arg.name!r} consumed "
                            "before any call produces it",
                        )
            else:
                if cp.direction is not Direction.SCALAR:
                    report.add(
                        "type_mismatch", pname,
                        f"call {idx} ({call.tr_name}): file parameter {pname!r} bound to a literal",
                    )
                elif coerce_literal(arg, cp.value_type) is None:
                    report.add(
                        "type_mismatch", pname,
                        f"call {idx} ({call.tr_name}): {pname!r} expects {cp.value_type.value}",
                        expected=cp.value_type.value, got=_type_name(arg),
                    )
        for cp in callee.params:
            if cp.name not in bound_names and not (cp.direction is Direction.SCALAR and cp.default is not None):
                report.add(
                    "missing_binding", cp.name,
                    f"call {idx} ({call.tr_name}): required parameter {cp.name!r} is not bound",
                )
    for p in tr.params:
        if p.direction is Direction.OUTPUT and p.name not in produced_outputs:
            report.add("unproduced_output", p.name, f"no call produces output {p.name!r}")
    return report


def _check_ref_compat(report: ValidationReport, idx: int, callee_name: str, cp: ParamSpec, src: ParamSpec):
    where = f"call {idx} ({callee_name})"
    if cp.direction is Direction.SCALAR:
        if src.direction is not Direction.SCALAR or src.value_type is not cp.value_type:
            report.add(
                "type_mismatch", cp.name,
                f"{where}: {cp.name!r} expects {cp.value_type.value}, got parameter {src.name!r}",
            )
    elif cp.direction is Direction.INPUT:
        if src.direction is Direction.SCALAR:
            report.add("type_mismatch", cp.name, f"{where}: input {cp.name!r} bound to scalar {src.name!r}")
    else:  # callee OUTPUT
        if src.direction is not Direction.OUTPUT:
            report.add(
                "type_mismatch", cp.name,
                f"{where}: output {cp.name!r} must bind an output parameter, got {src.name!r}",
            )


def _check_acyclic(tr: Transformation, resolver, stack: list[str]) -> None:
    if not isinstance(tr.body, CompoundBody):
        return
    for call in tr.body.calls:
        if call.tr_name in stack:
            raise CycleDetected(stack + [call.tr_name])
        callee = resolver(call.tr_name)
        _check_acyclic(callee, resolver, stack + [call.tr_name])


# ---------------------------------------------------------------------------
# Compound expansion


@dataclass(frozen=True)
class AtomicCall:
    transformation: Transformation
    bindings: dict[str, Literal | str]

    def __eq__(self, other):  # dict field blocks the generated frozen __eq__
        return (
            isinstance(other, AtomicCall)
            and self.transformation == other.transformation
            and self.bindings == other.bindings
        )


def expand_compound(tr, bindings, resolver, context=None, _stack=None) -> list[AtomicCall]:
    """Flatten a transformation into atomic calls with bindings substituted.

    ``bindings`` is an effective binding map (files as lfn strings). Local
    intermediates are renamed ``<context>.<call_index>.<output_param>`` after
    the slot that produces them, so expansion is deterministic and generated
    names are collision-free within one derivation. ``context`` defaults to
    the transformation name; callers expanding a derivation pass its name.
    """
    context = context if context is not None else tr.name
    stack = _stack or [tr.name]
    if isinstance(tr.body, AtomicBody):
        return [AtomicCall(tr, dict(bindings))]
    caller = {p.name: p for p in tr.params}
    locals_map: dict[str, str] = {}
    callees: list[Transformation] = []
    for idx, call in enumerate(tr.body.calls):
        if call.tr_name in stack:
            raise CycleDetected(stack + [call.tr_name])
        callee = resolver(call.tr_name)
        callees.append(callee)
        for pname, arg in call.bindings:
            if isinstance(arg, Ref) and arg.name not in caller:
                cp = callee.param(pname)
                if cp is not None and cp.direction is Direction.OUTPUT:
                    locals_map.setdefault(arg.name, f"{context}.{idx}.{pname}")
    result: list[AtomicCall] = []
    for idx, call in enumerate(tr.body.calls):
        callee = callees[idx]
        sub: dict[str, Literal | str] = {}
        for pname, arg in call.bindings:
            if isinstance(arg, Ref):
                if arg.name in caller:
                    if arg.name not in bindings:
                        raise ExpansionError(f"caller parameter {arg.name!r} is unbound")
                    sub[pname] = bindings[arg.name]
                elif arg.name in locals_map:
                    sub[pname] = locals_map[arg.name]
                else:
                    raise ExpansionError(f"intermediate {arg.name!r} has no producing call")
            else:
                cp = callee.param(pname)
                value = coerce_literal(arg, cp.value_type) if cp is not None else arg
                sub[pname] = arg if value is None else value
        for p in callee.params:
            if p.name not in sub and p.direction is Direction.SCALAR and p.default is not None:
                sub[p.name] = p.default
        result.extend(
            expand_compound(
                callee, sub, resolver,
                context=f"{context}.{idx}",
                _stack=stack + [call.tr_name],
            )
        )
    return result
