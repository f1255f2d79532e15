"""The virtual data catalog.

Stores every shareable object (dataset files, transformations, derivations,
parameters, plots, posters, glossary and reference entries) with its typed
metadata, and answers attribute queries. Objects are addressed by a content
id derived from (kind, name, payload), which makes registration idempotent.
Rows live in the embedded database for durability; a full in-memory mirror
serves queries, which keeps search semantics independent of SQL.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

from .metadata import (
    MetadataError,
    MetadataTuple,
    Query,
    ValueType,
    coerce_value,
    evaluate,
    parse_query,
    wire_value,
)
from .storage import Database, sha256_hex


class CatalogError(Exception):
    pass


class UnknownObject(CatalogError):
    def __init__(self, object_id: str):
        super().__init__(f"no such object: {object_id}")
        self.object_id = object_id


class DuplicateName(CatalogError):
    pass


class InvalidMetadata(CatalogError):
    pass


class TypeConflict(CatalogError):
    pass


class Kind(enum.Enum):
    DATASET_FILE = "dataset_file"
    TRANSFORMATION = "transformation"
    DERIVATION = "derivation"
    PARAMETER = "parameter"
    PLOT = "plot"
    POSTER = "poster"
    GLOSSARY = "glossary"
    REFERENCE = "reference"


_KIND_PREFIX = {Kind.GLOSSARY: "Glossary_", Kind.REFERENCE: "Reference_"}


@dataclass
class CatalogObject:
    object_id: str
    kind: Kind
    name: str
    payload: str
    metadata: dict[str, MetadataTuple] = field(default_factory=dict)


def object_id_for(kind: Kind, name: str, payload: str) -> str:
    digest = sha256_hex(f"{kind.value}\n{name}\n{payload}".encode())
    return f"obj-{digest[:16]}"


def _tuple_to_wire(t: MetadataTuple) -> dict:
    return {
        "attribute_name": t.attribute_name,
        "value_type": t.value_type.value,
        "attribute_values": [wire_value(v) for v in t.attribute_values],
    }


def _tuple_from_wire(rec: dict) -> MetadataTuple:
    vt = ValueType(rec["value_type"])
    values = tuple(coerce_value(v, vt) for v in rec["attribute_values"])
    return MetadataTuple(rec["attribute_name"], vt, values)


def _metadata_json(metadata: dict[str, MetadataTuple]) -> str:
    records = [_tuple_to_wire(metadata[k]) for k in sorted(metadata)]
    return json.dumps(records, ensure_ascii=False, separators=(",", ":"))


def _metadata_from_json(text: str) -> dict[str, MetadataTuple]:
    out: dict[str, MetadataTuple] = {}
    for rec in json.loads(text):
        t = _tuple_from_wire(rec)
        out[t.attribute_name] = t
    return out


class Catalog:
    SCHEMA = """
    CREATE TABLE IF NOT EXISTS catalog_objects (
        object_id TEXT PRIMARY KEY,
        kind TEXT NOT NULL,
        name TEXT NOT NULL,
        payload TEXT NOT NULL,
        metadata TEXT NOT NULL
    );
    CREATE INDEX IF NOT EXISTS catalog_by_kind_name ON catalog_objects (kind, name);
    """

    def __init__(self, db: Database):
        self.db = db
        self.db.executescript(self.SCHEMA)
        self._objects: dict[str, CatalogObject] = {}
        for object_id, kind, name, payload, meta in self.db.query(
            "SELECT object_id, kind, name, payload, metadata FROM catalog_objects"
        ):
            self._objects[object_id] = CatalogObject(
                object_id, Kind(kind), name, payload, _metadata_from_json(meta)
            )

    # -- registration -------------------------------------------------------

    def register(
        self,
        kind: Kind,
        name: str,
        payload: str,
        metadata: list[MetadataTuple] | None = None,
    ) -> CatalogObject:
        """Store an object; identical (kind, name, payload) is a no-op.

        Re-registering an existing object with extra metadata upserts the
        tuples, same as annotate. A transformation whose (name, version) is
        already taken by a different payload is refused.
        """
        prefix = _KIND_PREFIX.get(kind)
        if prefix is not None and not name.startswith(prefix):
            raise InvalidMetadata(f"{kind.value} name must start with {prefix!r}: {name!r}")
        tuples = self._check_tuples(metadata or [])
        object_id = object_id_for(kind, name, payload)
        with self.db.lock:
            existing = self._objects.get(object_id)
            if existing is not None:
                if tuples:
                    return self.annotate(object_id, list(tuples.values()))
                return existing
            if kind is Kind.TRANSFORMATION:
                for obj in self._objects.values():
                    if obj.kind is Kind.TRANSFORMATION and obj.name == name:
                        raise DuplicateName(
                            f"transformation {name!r} already registered with different content"
                        )
            obj = CatalogObject(object_id, kind, name, payload, tuples)
            self.db.execute(
                "INSERT INTO catalog_objects (object_id, kind, name, payload, metadata) "
                "VALUES (?, ?, ?, ?, ?)",
                (object_id, kind.value, name, payload, _metadata_json(tuples)),
            )
            self._objects[object_id] = obj
            return obj

    def _check_tuples(self, metadata: list[MetadataTuple]) -> dict[str, MetadataTuple]:
        out: dict[str, MetadataTuple] = {}
        for t in metadata:
            if not isinstance(t, MetadataTuple):
                raise InvalidMetadata(f"not a metadata tuple: {t!r}")
            if t.attribute_name in out:
                raise InvalidMetadata(f"attribute {t.attribute_name!r} listed twice")
            out[t.attribute_name] = t
        return out

    def annotate(self, object_id: str, tuples: list[MetadataTuple]) -> CatalogObject:
        """Upsert tuples by attribute name; value_type changes are refused."""
        with self.db.lock:
            obj = self._objects.get(object_id)
            if obj is None:
                raise UnknownObject(object_id)
            incoming = self._check_tuples(tuples)
            for name, t in incoming.items():
                current = obj.metadata.get(name)
                if current is not None and current.value_type is not t.value_type:
                    raise TypeConflict(
                        f"attribute {name!r} is {current.value_type.value}, "
                        f"cannot re-annotate as {t.value_type.value}"
                    )
            if not incoming:
                return obj
            merged = dict(obj.metadata)
            merged.update(incoming)
            self.db.execute(
                "UPDATE catalog_objects SET metadata = ? WHERE object_id = ?",
                (_metadata_json(merged), object_id),
            )
            obj.metadata = merged
            return obj

    # -- retrieval ----------------------------------------------------------

    def get(self, object_id: str) -> CatalogObject:
        obj = self._objects.get(object_id)
        if obj is None:
            raise UnknownObject(object_id)
        return obj

    def _snapshot(self) -> list[CatalogObject]:
        with self.db.lock:
            return list(self._objects.values())

    def find(self, kind: Kind, name: str) -> CatalogObject | None:
        for obj in self._snapshot():
            if obj.kind is kind and obj.name == name:
                return obj
        return None

    def list_by_kind(self, kind: Kind) -> list[CatalogObject]:
        out = [o for o in self._snapshot() if o.kind is kind]
        out.sort(key=lambda o: o.name)
        return out

    def search(self, q: Query | str, kind: Kind | None = None) -> list[CatalogObject]:
        """Objects whose metadata satisfies q, ordered by (kind, object_id)."""
        if isinstance(q, str):
            q = parse_query(q)
        out = [
            o
            for o in self._snapshot()
            if (kind is None or o.kind is kind) and evaluate(q, o.metadata)
        ]
        out.sort(key=lambda o: (o.kind.value, o.object_id))
        return out

    def __len__(self) -> int:
        return len(self._objects)

    # -- backup format ------------------------------------------------------

    def export_records(self) -> str:
        """One JSON record per line, ordered by (kind, object_id).

        The format is canonical: exporting, importing into an empty catalog
        and exporting again yields byte-identical text.
        """
        lines = []
        for obj in sorted(self._snapshot(), key=lambda o: (o.kind.value, o.object_id)):
            lines.append(
                json.dumps(
                    {
                        "object_id": obj.object_id,
                        "kind": obj.kind.value,
                        "name": obj.name,
                        "payload": obj.payload,
                        "metadata": [_tuple_to_wire(obj.metadata[k]) for k in sorted(obj.metadata)],
                    },
                    ensure_ascii=False,
                    separators=(",", ":"),
                )
            )
        return "".join(line + "\n" for line in lines)

    def import_records(self, text: str) -> int:
        count = 0
        for line in text.splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            try:
                tuples = [_tuple_from_wire(r) for r in rec["metadata"]]
            except MetadataError as exc:
                raise InvalidMetadata(str(exc)) from exc
            self.register(Kind(rec["kind"]), rec["name"], rec["payload"], tuples)
            count += 1
        return count
