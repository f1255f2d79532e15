"""Typed metadata tuples and the attribute query language."""

import random
from datetime import datetime

import pytest

from elab.metadata import (
    And,
    Clause,
    MetadataError,
    MetadataTuple,
    Not,
    Or,
    QuerySyntaxError,
    QueryTypeError,
    ValueType,
    evaluate,
    format_date,
    format_query,
    make_tuple,
    parse_date,
    parse_query,
)


def T(name, vt, *values):
    return MetadataTuple(name, vt, tuple(values))


# -- values and tuples ------------------------------------------------------


def test_tuple_rejects_empty_and_bad_names():
    with pytest.raises(MetadataError):
        MetadataTuple("x", ValueType.STRING, ())
    with pytest.raises(MetadataError):
        MetadataTuple("9lives", ValueType.STRING, ("x",))
    with pytest.raises(MetadataError):
        MetadataTuple("has space", ValueType.STRING, ("x",))


def test_tuple_type_checks_every_value():
    with pytest.raises(MetadataError):
        T("n", ValueType.INTEGER, 1, "two")
    with pytest.raises(MetadataError):
        T("b", ValueType.BOOLEAN, 1)  # an int is not a boolean
    assert T("n", ValueType.INTEGER, 1, 2).attribute_values == (1, 2)


def test_integer_is_not_float_but_coercion_widens():
    with pytest.raises(MetadataError):
        T("x", ValueType.FLOAT, 3)
    t = make_tuple("x", "float", [3])
    assert t.attribute_values == (3.0,) and isinstance(t.attribute_values[0], float)


def test_make_tuple_parses_dates():
    t = make_tuple("date", "date", ["2004-06-01"])
    assert t.attribute_values[0] == datetime(2004, 6, 1)


def test_date_formats_accepted():
    assert parse_date("2004-06-01") == datetime(2004, 6, 1)
    assert parse_date("2004-06-01 13:45:00") == datetime(2004, 6, 1, 13, 45)
    assert parse_date("2004-06-01T13:45:00") == datetime(2004, 6, 1, 13, 45)
    with pytest.raises(MetadataError):
        parse_date("June 1st")


def test_format_date_round_trips():
    for d in (datetime(2004, 6, 1), datetime(2004, 6, 1, 13, 45, 7)):
        assert parse_date(format_date(d)) == d


# -- query parsing ----------------------------------------------------------


def test_parse_clause_ops():
    for op in ("=", "!=", "<", "<=", ">", ">="):
        q = parse_query(f"count {op} 5")
        assert q == Clause("count", op, 5)
    assert parse_query('name contains "uon"') == Clause("name", "contains", "uon")


def test_parse_precedence_not_and_or():
    q = parse_query('a = 1 or b = 2 and not c = 3')
    assert q == Or((Clause("a", "=", 1), And((Clause("b", "=", 2), Not(Clause("c", "=", 3))))))


def test_parens_override():
    q = parse_query("(a = 1 or b = 2) and c = 3")
    assert q == And((Or((Clause("a", "=", 1), Clause("b", "=", 2))), Clause("c", "=", 3)))


def test_literal_kinds():
    assert parse_query("x = true") == Clause("x", "=", True)
    assert parse_query("x = 2.5") == Clause("x", "=", 2.5)
    assert parse_query("x = -3") == Clause("x", "=", -3)
    assert parse_query('x = "two words"') == Clause("x", "=", "two words")


def test_syntax_error_has_position():
    with pytest.raises(QuerySyntaxError) as err:
        parse_query("school = ")
    assert err.value.position == len("school = ")
    with pytest.raises(QuerySyntaxError) as err:
        parse_query("= 5")
    assert err.value.position == 0


def test_trailing_garbage_rejected():
    with pytest.raises(QuerySyntaxError):
        parse_query("a = 1 b = 2")


def test_type_errors_at_parse_time():
    with pytest.raises(QueryTypeError):
        parse_query("name contains 5")
    with pytest.raises(QueryTypeError):
        parse_query("flag < true")
    parse_query("flag = true")  # equality on booleans is fine


def test_format_query_round_trips():
    # parse flattens associative chains, so round-trip on the parsed form:
    # one format/parse pass canonicalizes, after which it is a fixed point,
    # and the canonical form stays semantically equal to the original.
    rng = random.Random(7)
    for _ in range(200):
        q = random_query(rng, 3)
        canon = parse_query(format_query(q))
        assert parse_query(format_query(canon)) == canon
        for _ in range(20):
            m = random_metadata(rng)
            assert evaluate(q, m) == evaluate(canon, m)


# -- evaluation -------------------------------------------------------------


def md(*tuples):
    return {t.attribute_name: t for t in tuples}


def test_unknown_attribute_is_false_even_negated_clause():
    m = md(T("a", ValueType.INTEGER, 1))
    assert evaluate(parse_query("b = 1"), m) is False
    assert evaluate(parse_query("b != 1"), m) is False
    # not applies to the clause result, so missing attr under not is true
    assert evaluate(parse_query("not b = 1"), m) is True


def test_any_value_matches():
    m = md(T("author", ValueType.STRING, "Ana", "Ben"))
    assert evaluate(parse_query('author = "Ben"'), m)
    assert evaluate(parse_query('author contains "na"'), m)
    assert not evaluate(parse_query('author = "Cleo"'), m)


def test_numeric_comparison_across_int_float():
    m = md(T("rate", ValueType.FLOAT, 2.5))
    assert evaluate(parse_query("rate > 2"), m)
    assert evaluate(parse_query("rate = 2.5"), m)
    m2 = md(T("count", ValueType.INTEGER, 3))
    assert evaluate(parse_query("count < 3.5"), m2)


def test_type_mismatched_clause_is_false():
    m = md(T("school", ValueType.STRING, "Lakeside"))
    assert evaluate(parse_query("school = 5"), m) is False
    assert evaluate(parse_query("school > 5"), m) is False


def test_date_compares_against_string_literal():
    m = md(T("date", ValueType.DATE, datetime(2004, 6, 1)))
    assert evaluate(parse_query('date >= "2004-01-01"'), m)
    assert evaluate(parse_query('date < "2004-07-01"'), m)
    assert not evaluate(parse_query('date = "2004-06-02"'), m)


def test_contains_on_strings_only_matches_substring():
    m = md(T("title", ValueType.STRING, "Muon lifetime study"))
    assert evaluate(parse_query('title contains "lifetime"'), m)
    assert not evaluate(parse_query('title contains "Lifetime"'), m)


# -- random evaluation vs a hand-rolled oracle ------------------------------

ATTRS = ("a", "b", "c", "d")


def random_metadata(rng):
    out = {}
    for name in ATTRS:
        if rng.random() < 0.25:
            continue  # leave some attributes missing
        kind = rng.randrange(3)
        if kind == 0:
            vals = tuple(rng.randint(0, 5) for _ in range(rng.randint(1, 3)))
            out[name] = MetadataTuple(name, ValueType.INTEGER, vals)
        elif kind == 1:
            vals = tuple(rng.choice(("red", "green", "blue")) for _ in range(rng.randint(1, 2)))
            out[name] = MetadataTuple(name, ValueType.STRING, vals)
        else:
            out[name] = MetadataTuple(name, ValueType.BOOLEAN, (rng.random() < 0.5,))
    return out


def random_clause(rng):
    name = rng.choice(ATTRS)
    kind = rng.randrange(3)
    if kind == 0:
        return Clause(name, rng.choice(("=", "!=", "<", "<=", ">", ">=")), rng.randint(0, 5))
    if kind == 1:
        op = rng.choice(("=", "!=", "contains"))
        return Clause(name, op, rng.choice(("red", "green", "blue", "e")))
    return Clause(name, rng.choice(("=", "!=")), rng.random() < 0.5)


def random_query(rng, depth):
    if depth == 0 or rng.random() < 0.4:
        return random_clause(rng)
    kind = rng.randrange(3)
    if kind == 0:
        return Not(random_query(rng, depth - 1))
    parts = tuple(random_query(rng, depth - 1) for _ in range(rng.randint(2, 3)))
    return And(parts) if kind == 1 else Or(parts)


def oracle_eval(q, m):
    if isinstance(q, Clause):
        t = m.get(q.attribute)
        if t is None:
            return False
        for v in t.attribute_values:
            if oracle_clause(v, t.value_type, q):
                return True
        return False
    if isinstance(q, Not):
        return not oracle_eval(q.item, m)
    if isinstance(q, And):
        return all(oracle_eval(p, m) for p in q.items)
    return any(oracle_eval(p, m) for p in q.items)


def oracle_clause(value, vt, q):
    lit = q.literal
    if q.op == "contains":
        return vt is ValueType.STRING and isinstance(lit, str) and lit in value
    if isinstance(lit, bool) or vt is ValueType.BOOLEAN:
        if not (isinstance(lit, bool) and vt is ValueType.BOOLEAN):
            return False
        return (value == lit) if q.op == "=" else (value != lit) if q.op == "!=" else False
    if vt in (ValueType.INTEGER, ValueType.FLOAT):
        if isinstance(lit, str):
            return False
        return compare(value, lit, q.op)
    if vt is ValueType.STRING:
        if not isinstance(lit, str):
            return False
        return compare(value, lit, q.op)
    if vt is ValueType.DATE:
        if not isinstance(lit, str):
            return False
        try:
            return compare(value, parse_date(lit), q.op)
        except MetadataError:
            return False
    return False


def compare(a, b, op):
    return {
        "=": a == b, "!=": a != b,
        "<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b,
    }[op]


def test_evaluate_matches_oracle():
    rng = random.Random(99)
    for _ in range(3000):
        m = random_metadata(rng)
        q = random_query(rng, 3)
        assert evaluate(q, m) == oracle_eval(q, m), (format_query(q), m)


def test_not_wraps_single_item():
    q = parse_query("not (a = 1)")
    assert isinstance(q, Not) and q.item == Clause("a", "=", 1)
