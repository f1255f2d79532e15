"""Execution audit log and workflow DAG reconstruction.

Every run of a derivation appends immutable ExecutionRecords: one per
atomic job, plus one summary record per compound derivation. The backward
closure of those records over a logical file is its workflow DAG, a
bipartite graph of file and derivation nodes exportable as DOT text.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from . import dot
from .storage import Database

SUCCEEDED = "succeeded"
FAILED = "failed"


class ProvenanceError(Exception):
    pass


class InvalidRecord(ProvenanceError):
    pass


class UnknownFile(ProvenanceError):
    def __init__(self, lfn: str):
        super().__init__(f"no provenance or catalog entry for {lfn!r}")
        self.lfn = lfn


@dataclass(frozen=True)
class ExecutionRecord:
    record_id: str
    dv_name: str
    tr_name: str
    tr_version: int
    effective_bindings: tuple[tuple[str, object], ...]
    inputs: tuple[tuple[str, str], ...]   # (lfn, digest)
    outputs: tuple[tuple[str, str], ...]  # (lfn, digest); digest "" on failure
    started_at: float
    finished_at: float
    status: str
    failure_detail: str | None = None
    # "job" records are what build_dag links; a compound derivation writes an
    # extra "derivation" summary record used by the result cache.
    level: str = "job"

    def __post_init__(self):
        if self.status not in (SUCCEEDED, FAILED):
            raise InvalidRecord(f"bad status {self.status!r}")
        if self.level not in ("job", "derivation"):
            raise InvalidRecord(f"bad level {self.level!r}")
        if self.finished_at < self.started_at:
            raise InvalidRecord("finished before started")
        if self.status == SUCCEEDED:
            for lfn, digest in self.outputs:
                if not digest:
                    raise InvalidRecord(f"succeeded record lacks digest for output {lfn!r}")

    @property
    def output_lfns(self) -> list[str]:
        return [lfn for lfn, _ in self.outputs]

    @property
    def input_lfns(self) -> list[str]:
        return [lfn for lfn, _ in self.inputs]

    def bindings_dict(self) -> dict[str, object]:
        return dict(self.effective_bindings)


def _record_to_wire(rec: ExecutionRecord) -> str:
    return json.dumps(
        {
            "record_id": rec.record_id,
            "dv_name": rec.dv_name,
            "tr_name": rec.tr_name,
            "tr_version": rec.tr_version,
            "effective_bindings": [[k, v] for k, v in rec.effective_bindings],
            "inputs": [[l, d] for l, d in rec.inputs],
            "outputs": [[l, d] for l, d in rec.outputs],
            "started_at": rec.started_at,
            "finished_at": rec.finished_at,
            "status": rec.status,
            "failure_detail": rec.failure_detail,
            "level": rec.level,
        },
        ensure_ascii=False,
        separators=(",", ":"),
    )


def _record_from_wire(text: str) -> ExecutionRecord:
    d = json.loads(text)
    return ExecutionRecord(
        record_id=d["record_id"],
        dv_name=d["dv_name"],
        tr_name=d["tr_name"],
        tr_version=d["tr_version"],
        effective_bindings=tuple((k, v) for k, v in d["effective_bindings"]),
        inputs=tuple((l, dg) for l, dg in d["inputs"]),
        outputs=tuple((l, dg) for l, dg in d["outputs"]),
        started_at=d["started_at"],
        finished_at=d["finished_at"],
        status=d["status"],
        failure_detail=d["failure_detail"],
        level=d["level"],
    )


class ProvenanceLog:
    """Append-only store of execution records, ordered by insertion."""

    SCHEMA = """
    CREATE TABLE IF NOT EXISTS execution_records (
        seq INTEGER PRIMARY KEY AUTOINCREMENT,
        record_id TEXT UNIQUE NOT NULL,
        data TEXT NOT NULL
    );
    """

    def __init__(self, db: Database):
        self.db = db
        self.db.executescript(self.SCHEMA)
        self._records: list[ExecutionRecord] = []
        self._by_id: dict[str, ExecutionRecord] = {}
        for (data,) in self.db.query("SELECT data FROM execution_records ORDER BY seq"):
            rec = _record_from_wire(data)
            self._records.append(rec)
            self._by_id[rec.record_id] = rec

    def record_execution(self, rec: ExecutionRecord) -> str:
        """Store a record; an empty record_id gets the next sequential id."""
        with self.db.lock:
            if not rec.record_id:
                rec = replace(rec, record_id=f"run-{len(self._records) + 1:06d}")
            if rec.record_id in self._by_id:
                raise InvalidRecord(f"record id {rec.record_id!r} already stored")
            self.db.execute(
                "INSERT INTO execution_records (record_id, data) VALUES (?, ?)",
                (rec.record_id, _record_to_wire(rec)),
            )
            self._records.append(rec)
            self._by_id[rec.record_id] = rec
            return rec.record_id

    def get(self, record_id: str) -> ExecutionRecord:
        rec = self._by_id.get(record_id)
        if rec is None:
            raise ProvenanceError(f"no such record: {record_id}")
        return rec

    def records(self) -> list[ExecutionRecord]:
        return list(self._records)

    def __len__(self) -> int:
        return len(self._records)

    def export_records(self) -> str:
        return "".join(_record_to_wire(r) + "\n" for r in self._records)

    def producer_of(self, lfn: str) -> ExecutionRecord | None:
        """Most recent succeeded job record that lists lfn as an output."""
        for rec in reversed(self._records):
            if rec.level == "job" and rec.status == SUCCEEDED and lfn in rec.output_lfns:
                return rec
        return None

    def succeeded_records_for_tr(self, tr_name: str, tr_version: int) -> list[ExecutionRecord]:
        """Newest first; both job and derivation summary records."""
        return [
            r
            for r in reversed(self._records)
            if r.status == SUCCEEDED and r.tr_name == tr_name and r.tr_version == tr_version
        ]


@dataclass
class WorkflowDag:
    """Bipartite lineage graph: files and the derivation runs between them."""

    file_nodes: set[str] = field(default_factory=set)
    derivation_nodes: set[str] = field(default_factory=set)
    consumed: set[tuple[str, str]] = field(default_factory=set)  # file -> record
    produced: set[tuple[str, str]] = field(default_factory=set)  # record -> file
    labels: dict[str, str] = field(default_factory=dict)         # record -> tr(dv)

    @property
    def edges(self) -> set[tuple[str, str]]:
        return self.consumed | self.produced

    def node_count(self) -> int:
        return len(self.file_nodes) + len(self.derivation_nodes)

    def source_files(self) -> set[str]:
        derived = {lfn for _, lfn in self.produced}
        return self.file_nodes - derived

    def is_bipartite(self) -> bool:
        for src, dst in self.consumed:
            if src not in self.file_nodes or dst not in self.derivation_nodes:
                return False
        for src, dst in self.produced:
            if src not in self.derivation_nodes or dst not in self.file_nodes:
                return False
        return True

    def topological_order(self) -> list[str]:
        """All nodes in dependency order; raises on a cycle."""
        nodes = sorted(self.file_nodes | self.derivation_nodes)
        incoming: dict[str, set[str]] = {n: set() for n in nodes}
        outgoing: dict[str, set[str]] = {n: set() for n in nodes}
        for src, dst in self.edges:
            incoming[dst].add(src)
            outgoing[src].add(dst)
        ready = [n for n in nodes if not incoming[n]]
        order: list[str] = []
        while ready:
            ready.sort()
            node = ready.pop(0)
            order.append(node)
            for nxt in sorted(outgoing[node]):
                incoming[nxt].discard(node)
                if not incoming[nxt]:
                    ready.append(nxt)
        if len(order) != len(nodes):
            raise ProvenanceError("workflow graph contains a cycle")
        return order


def build_dag(lfn: str, log: ProvenanceLog, known_files=None) -> WorkflowDag:
    """Backward closure of lfn over the execution log.

    ``known_files`` is an optional membership test for uploaded source files
    that never ran through a derivation (typically catalog membership); a
    file unknown to both raises UnknownFile.
    """
    dag = WorkflowDag()
    root_producer = log.producer_of(lfn)
    if root_producer is None:
        if known_files is not None and not known_files(lfn):
            raise UnknownFile(lfn)
        dag.file_nodes.add(lfn)
        return dag
    pending = [lfn]
    seen_files: set[str] = set()
    while pending:
        current = pending.pop()
        if current in seen_files:
            continue
        seen_files.add(current)
        dag.file_nodes.add(current)
        rec = log.producer_of(current)
        if rec is None:
            continue
        if rec.record_id not in dag.derivation_nodes:
            dag.derivation_nodes.add(rec.record_id)
            dag.labels[rec.record_id] = f"{rec.tr_name}({rec.dv_name})"
            for input_lfn in rec.input_lfns:
                dag.consumed.add((input_lfn, rec.record_id))
                pending.append(input_lfn)
        for out_lfn in rec.output_lfns:
            if out_lfn == current:
                dag.produced.add((rec.record_id, out_lfn))
    return dag


def export_dot(dag: WorkflowDag) -> str:
    """Deterministic DOT text; equal DAGs serialize to identical bytes."""
    graph = dot.DotGraph(name="provenance")
    for lfn in dag.file_nodes:
        graph.nodes[lfn] = {"shape": "ellipse", "label": lfn}
    for record_id in dag.derivation_nodes:
        graph.nodes[record_id] = {"shape": "box", "label": dag.labels.get(record_id, record_id)}
    graph.edges = sorted(dag.edges)
    return dot.emit(graph)


def parse_dot(text: str) -> WorkflowDag:
    """Rebuild a DAG from exported DOT (shape attributes drive node kinds)."""
    graph = dot.parse(text)
    dag = WorkflowDag()
    for node_id, attrs in graph.nodes.items():
        if attrs.get("shape") == "box":
            dag.derivation_nodes.add(node_id)
            dag.labels[node_id] = attrs.get("label", node_id)
        else:
            dag.file_nodes.add(node_id)
    for src, dst in graph.edges:
        if src in dag.derivation_nodes:
            dag.produced.add((src, dst))
        else:
            dag.consumed.add((src, dst))
    return dag
