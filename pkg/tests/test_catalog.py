"""Durable object store with typed metadata and query search."""

import random
from datetime import datetime

import pytest

from elab.catalog import (
    Catalog,
    DuplicateName,
    InvalidMetadata,
    Kind,
    TypeConflict,
    UnknownObject,
    object_id_for,
)
from elab.metadata import MetadataTuple, ValueType, evaluate, make_tuple, parse_query
from elab.storage import Database


@pytest.fixture
def cat(tmp_path):
    db = Database(tmp_path / "cat.sqlite")
    yield Catalog(db)
    db.close()


def T(name, vt, *values):
    return MetadataTuple(name, vt, tuple(values))


# -- registration -----------------------------------------------------------


def test_register_get_round_trip(cat):
    obj = cat.register(Kind.DATASET_FILE, "a.data", "sha256:00", [T("n", ValueType.INTEGER, 3)])
    assert cat.get(obj.object_id) == obj
    assert obj.object_id == object_id_for(Kind.DATASET_FILE, "a.data", "sha256:00")
    assert obj.object_id.startswith("obj-")


def test_register_idempotent(cat):
    a = cat.register(Kind.DATASET_FILE, "a.data", "x")
    b = cat.register(Kind.DATASET_FILE, "a.data", "x")
    assert a.object_id == b.object_id
    assert len(cat) == 1


def test_reregister_with_metadata_upserts(cat):
    a = cat.register(Kind.DATASET_FILE, "a.data", "x", [T("k", ValueType.STRING, "one")])
    b = cat.register(Kind.DATASET_FILE, "a.data", "x", [T("k", ValueType.STRING, "two")])
    assert b.object_id == a.object_id
    assert cat.get(a.object_id).metadata["k"].attribute_values == ("two",)


def test_duplicate_transformation_name_refused(cat):
    cat.register(Kind.TRANSFORMATION, "fit:1", "TR fit:1(...) v1")
    with pytest.raises(DuplicateName):
        cat.register(Kind.TRANSFORMATION, "fit:1", "TR fit:1(...) v2")
    # same name, same payload is the idempotent case, not a collision
    cat.register(Kind.TRANSFORMATION, "fit:1", "TR fit:1(...) v1")
    # other kinds may share a name with different payloads
    cat.register(Kind.DATASET_FILE, "fit:1", "other payload")


def test_prefix_discipline(cat):
    with pytest.raises(InvalidMetadata):
        cat.register(Kind.GLOSSARY, "muon", "")
    with pytest.raises(InvalidMetadata):
        cat.register(Kind.REFERENCE, "muon", "")
    cat.register(Kind.GLOSSARY, "Glossary_muon", "")
    cat.register(Kind.REFERENCE, "Reference_muon", "")


def test_duplicate_attribute_in_one_call_rejected(cat):
    with pytest.raises(InvalidMetadata):
        cat.register(
            Kind.DATASET_FILE, "a", "p",
            [T("k", ValueType.STRING, "x"), T("k", ValueType.STRING, "y")],
        )


# -- annotation -------------------------------------------------------------


def test_annotate_upserts_and_keeps_rest(cat):
    obj = cat.register(
        Kind.PLOT, "p.svg", "svg",
        [T("title", ValueType.STRING, "old"), T("bins", ValueType.INTEGER, 60)],
    )
    updated = cat.annotate(obj.object_id, [T("title", ValueType.STRING, "new")])
    assert updated.metadata["title"].attribute_values == ("new",)
    assert updated.metadata["bins"].attribute_values == (60,)


def test_annotate_empty_is_identity(cat):
    obj = cat.register(Kind.PLOT, "p.svg", "svg", [T("a", ValueType.STRING, "x")])
    assert cat.annotate(obj.object_id, []) == obj


def test_annotate_type_conflict(cat):
    obj = cat.register(Kind.PLOT, "p.svg", "svg", [T("bins", ValueType.INTEGER, 60)])
    with pytest.raises(TypeConflict):
        cat.annotate(obj.object_id, [T("bins", ValueType.STRING, "sixty")])


def test_annotate_unknown_object(cat):
    with pytest.raises(UnknownObject):
        cat.annotate("obj-ffffffffffffffff", [T("a", ValueType.STRING, "x")])


def test_random_upserts_match_map_replay(cat):
    rng = random.Random(31)
    obj = cat.register(Kind.DATASET_FILE, "r.data", "p")
    model = {}
    attrs = ["a", "b", "c", "d", "e"]
    for _ in range(300):
        name = rng.choice(attrs)
        t = T(name, ValueType.INTEGER, rng.randint(0, 9))
        cat.annotate(obj.object_id, [t])
        model[name] = t
    final = cat.get(obj.object_id).metadata
    assert final == model


# -- search -----------------------------------------------------------------


def test_empty_catalog_any_query(cat):
    assert cat.search('type = "Poster"') == []


def test_search_order_is_kind_then_id(cat):
    objs = [
        cat.register(Kind.PLOT, "z.svg", "1", [T("hit", ValueType.BOOLEAN, True)]),
        cat.register(Kind.DATASET_FILE, "a.data", "2", [T("hit", ValueType.BOOLEAN, True)]),
        cat.register(Kind.DATASET_FILE, "b.data", "3", [T("hit", ValueType.BOOLEAN, True)]),
    ]
    got = cat.search("hit = true")
    assert got == sorted(objs, key=lambda o: (o.kind.value, o.object_id))


def test_search_kind_filter(cat):
    cat.register(Kind.PLOT, "p.svg", "1", [T("x", ValueType.INTEGER, 1)])
    ds = cat.register(Kind.DATASET_FILE, "d.data", "2", [T("x", ValueType.INTEGER, 1)])
    assert cat.search("x = 1", kind=Kind.DATASET_FILE) == [ds]


def test_list_by_kind_sorted_by_name(cat):
    cat.register(Kind.GLOSSARY, "Glossary_muon", "")
    cat.register(Kind.GLOSSARY, "Glossary_flux", "")
    names = [o.name for o in cat.list_by_kind(Kind.GLOSSARY)]
    assert names == ["Glossary_flux", "Glossary_muon"]


# -- random population vs linear scan ---------------------------------------

ATTR_POOL = ("school", "city", "count", "rate", "good", "tag")


def random_object(cat, rng, i):
    kind = rng.choice(list(Kind))
    name = f"obj{i}.data"
    if kind is Kind.GLOSSARY:
        name = f"Glossary_w{i}"
    elif kind is Kind.REFERENCE:
        name = f"Reference_w{i}"
    tuples = []
    for attr in ATTR_POOL:
        if rng.random() < 0.35:
            continue
        if attr in ("school", "city", "tag"):
            vals = tuple(rng.choice(("Batavia", "Aurora", "Geneva")) for _ in range(rng.randint(1, 3)))
            tuples.append(T(attr, ValueType.STRING, *vals))
        elif attr == "count":
            tuples.append(T(attr, ValueType.INTEGER, *(rng.randint(0, 9) for _ in range(rng.randint(1, 2)))))
        elif attr == "rate":
            tuples.append(T(attr, ValueType.FLOAT, round(rng.uniform(0, 5), 2)))
        else:
            tuples.append(T(attr, ValueType.BOOLEAN, rng.random() < 0.5))
    return cat.register(kind, name, f"payload-{i}", tuples)


def random_query_text(rng):
    def clause():
        attr = rng.choice(ATTR_POOL)
        if attr in ("school", "city", "tag"):
            if rng.random() < 0.3:
                return f'{attr} contains "{rng.choice(("Bat", "via", "zz", "a"))}"'
            return f'{attr} {rng.choice(("=", "!="))} "{rng.choice(("Batavia", "Aurora", "Nowhere"))}"'
        if attr == "count":
            return f"count {rng.choice(('=', '!=', '<', '<=', '>', '>='))} {rng.randint(0, 9)}"
        if attr == "rate":
            return f"rate {rng.choice(('<', '>', '<=', '>='))} {round(rng.uniform(0, 5), 1)}"
        return f"good {rng.choice(('=', '!='))} {rng.choice(('true', 'false'))}"

    parts = [clause() for _ in range(rng.randint(1, 3))]
    text = parts[0]
    for p in parts[1:]:
        text = f"{text} {rng.choice(('and', 'or'))} {p}"
        if rng.random() < 0.3:
            text = f"not ({text})"
    return text


def test_search_matches_linear_scan(cat):
    rng = random.Random(8)
    objs = [random_object(cat, rng, i) for i in range(300)]
    store = {o.object_id: o for o in objs}
    for _ in range(80):
        text = random_query_text(rng)
        q = parse_query(text)
        want = sorted(
            (o for o in store.values() if evaluate(q, o.metadata)),
            key=lambda o: (o.kind.value, o.object_id),
        )
        assert cat.search(text) == want, text


# -- the published poster example -------------------------------------------

POSTER_TUPLES = [
    make_tuple("author", "string", ["Thomas Jordan", "Liz Quigg", "Eric Gilbert", "Bob Peterson"]),
    make_tuple("city", "string", ["Batavia"]),
    make_tuple("date", "date", ["2004-11-10 00:00:00"]),
    make_tuple("group", "string", ["Fermilab"]),
    make_tuple("name", "string", ["poster_decays.data"]),
    make_tuple("plotURL", "string", ["Users/.../fermigroup/cosmic/plots"]),
    make_tuple("project", "string", ["Cosmic"]),
    make_tuple("school", "string", ["Fermilab"]),
    make_tuple("state", "string", ["IL"]),
    make_tuple("teacher", "string", ["Jordan"]),
    make_tuple("title", "string", ["Possible Particle Decays"]),
    make_tuple("type", "string", ["Poster"]),
    make_tuple("year", "string", ["AY2004"]),
]


def test_poster_record_round_trips(cat):
    obj = cat.register(Kind.POSTER, "poster_decays.data", "poster body", POSTER_TUPLES)
    got = cat.get(obj.object_id)
    assert sorted(got.metadata) == sorted(t.attribute_name for t in POSTER_TUPLES)
    assert got.metadata["title"].attribute_values == ("Possible Particle Decays",)
    assert got.metadata["type"].attribute_values == ("Poster",)
    assert got.metadata["year"].attribute_values == ("AY2004",)
    assert got.metadata["date"].attribute_values == (datetime(2004, 11, 10),)
    # any one of the four authors matches
    assert got in cat.search('author = "Liz Quigg"')
    assert got in cat.search('type = "Poster" and city = "Batavia"')


def test_poster_record_export_import_byte_exact(cat, tmp_path):
    cat.register(Kind.POSTER, "poster_decays.data", "poster body", POSTER_TUPLES)
    text = cat.export_records()
    db2 = Database(tmp_path / "other.sqlite")
    cat2 = Catalog(db2)
    assert cat2.import_records(text) == 1
    assert cat2.export_records() == text
    db2.close()


def test_export_import_round_trip_random(cat, tmp_path):
    rng = random.Random(5)
    for i in range(60):
        random_object(cat, rng, i)
    text = cat.export_records()
    db2 = Database(tmp_path / "copy.sqlite")
    cat2 = Catalog(db2)
    cat2.import_records(text)
    assert cat2.export_records() == text
    db2.close()


# -- durability -------------------------------------------------------------


def test_survives_reopen(tmp_path):
    path = tmp_path / "persist.sqlite"
    db = Database(path)
    cat = Catalog(db)
    rng = random.Random(13)
    for i in range(40):
        random_object(cat, rng, i)
    before = cat.export_records()
    hits_before = cat.search('school = "Batavia"')
    db.close()

    db2 = Database(path)
    cat2 = Catalog(db2)
    assert cat2.export_records() == before
    assert cat2.search('school = "Batavia"') == hits_before
    db2.close()
