"""Everything the portal does, behind one object.

The HTTP layer translates requests into calls here and errors back into
status codes; nothing in this module knows about routes or cookies. All
state lives in the shared database and file store, so request threads and
the analysis workers can use a single Workbench concurrently.
"""

from __future__ import annotations

import json
import re
import time
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime
from pathlib import Path

from ..catalog import Catalog, CatalogObject, InvalidMetadata, Kind, TypeConflict, UnknownObject
from ..cosmic.detector import DetectorDataError, validate_upload
from ..cosmic.transforms import (
    EXECUTABLES,
    ensure_shower_transformation,
    fit_from_json,
    register_standard,
)
from ..executor import ExecutorError, TransformationRegistry, run_derivation
from ..metadata import (
    MetadataError,
    MetadataTuple,
    QuerySyntaxError,
    QueryTypeError,
    ValueType,
    format_date,
    make_tuple,
    parse_query,
    wire_value,
)
from ..provenance import ProvenanceLog, UnknownFile, build_dag, export_dot
from ..storage import Database, FileStore, sha256_hex
from ..vdl import Derivation, Direction, Ref, Transformation, coerce_literal
from .auth import Group, GroupStore, SessionStore
from .config import ServiceConfig
from .errors import BadRequest, Forbidden, NotFound

STUDIES = ("lifetime", "flux", "shower")

_COMMENT_RE = re.compile(r"^comment_(\d{6})$")


def tuple_wire(t: MetadataTuple) -> dict:
    return {
        "attribute_name": t.attribute_name,
        "value_type": t.value_type.value,
        "values": [wire_value(v) for v in t.attribute_values],
    }


def tuples_from_wire(records) -> list[MetadataTuple]:
    if not isinstance(records, list):
        raise BadRequest("metadata must be a list of tuples", field="metadata")
    out = []
    for rec in records:
        try:
            out.append(make_tuple(rec["attribute_name"], rec["value_type"], rec["values"]))
        except (KeyError, TypeError, ValueError, MetadataError) as exc:
            raise BadRequest(f"bad metadata tuple: {exc}", field="metadata")
    return out


def object_wire(obj: CatalogObject) -> dict:
    return {
        "object_id": obj.object_id,
        "kind": obj.kind.value,
        "name": obj.name,
        "payload": obj.payload,
        "metadata": [tuple_wire(obj.metadata[k]) for k in sorted(obj.metadata)],
    }


class Workbench:
    SCHEMA = """
    CREATE TABLE IF NOT EXISTS analyses (
        analysis_id TEXT PRIMARY KEY,
        group_id TEXT NOT NULL,
        study TEXT NOT NULL,
        inputs TEXT NOT NULL,
        scalars TEXT NOT NULL,
        status TEXT NOT NULL,
        detail TEXT NOT NULL DEFAULT '',
        outputs TEXT NOT NULL DEFAULT '{}',
        created_at REAL NOT NULL,
        finished_at REAL
    );
    CREATE TABLE IF NOT EXISTS logbook_entries (
        seq INTEGER PRIMARY KEY AUTOINCREMENT,
        entry_id TEXT UNIQUE NOT NULL,
        group_id TEXT NOT NULL,
        milestone_id TEXT NOT NULL,
        body TEXT NOT NULL,
        author_role TEXT NOT NULL,
        created_at TEXT NOT NULL,
        teacher_comment TEXT NOT NULL DEFAULT ''
    );
    """

    def __init__(
        self,
        root: str | Path,
        config: ServiceConfig | None = None,
        start_workers: bool = True,
    ):
        self.config = config or ServiceConfig()
        self.root = Path(root)
        self.db = Database(self.root / "elab.sqlite")
        self.store = FileStore(self.root)
        self.catalog = Catalog(self.db)
        self.log = ProvenanceLog(self.db)
        self.registry = TransformationRegistry(self.catalog)
        register_standard(self.registry)
        self.groups = GroupStore(self.db)
        self.sessions = SessionStore(
            self.db, self.groups, self.config.session_idle_hours * 3600.0
        )
        self.db.executescript(self.SCHEMA)
        # A restart leaves no worker behind a claimed row.
        self.db.execute(
            "UPDATE analyses SET status = 'failed', detail = 'interrupted' "
            "WHERE status = 'running'"
        )
        self.pool = (
            ThreadPoolExecutor(max_workers=self.config.workers) if start_workers else None
        )
        if self.pool is not None:
            for (analysis_id,) in self.db.query(
                "SELECT analysis_id FROM analyses WHERE status = 'pending'"
            ):
                self.pool.submit(self._run_guarded, analysis_id)

    def close(self) -> None:
        if self.pool is not None:
            self.pool.shutdown(wait=True)
        self.db.close()

    def __enter__(self) -> "Workbench":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # -- data ---------------------------------------------------------------

    def upload_data(
        self, group: Group, raw: bytes, declared: list[MetadataTuple] | None = None
    ) -> dict:
        try:
            ds, auto = validate_upload(raw)
        except DetectorDataError as exc:
            raise BadRequest(
                "invalid detector data",
                errors=[{"line": exc.line, "message": str(exc)}],
            )
        digest = sha256_hex(raw)
        lfn = f"{ds.detector_id}-{digest[:10]}.data"
        merged: dict[str, MetadataTuple] = {t.attribute_name: t for t in declared or []}
        teacher = self.groups.get(group.teacher_id) if group.teacher_id else None
        stamped = [
            MetadataTuple("name", ValueType.STRING, (lfn,)),
            MetadataTuple("group", ValueType.STRING, (group.name,)),
            MetadataTuple("teacher", ValueType.STRING, ((teacher or group).name,)),
            MetadataTuple("date", ValueType.DATE, (datetime.now(),)),
        ]
        # What the file itself says always wins over declared tuples.
        for t in stamped + auto:
            merged[t.attribute_name] = t
        self.store.put_bytes(lfn, raw)
        try:
            obj = self.catalog.register(
                Kind.DATASET_FILE, lfn, f"sha256:{digest}", list(merged.values())
            )
        except (InvalidMetadata, TypeConflict) as exc:
            raise BadRequest(str(exc), field="metadata")
        return {
            "lfn": lfn,
            "object_id": obj.object_id,
            "metadata": object_wire(obj)["metadata"],
        }

    def search_datasets(self, group: Group, q_text: str, page: int = 1) -> dict:
        if page < 1:
            raise BadRequest("page must be a positive integer", field="page")
        if q_text.strip():
            try:
                query = parse_query(q_text)
            except QuerySyntaxError as exc:
                raise BadRequest(f"query syntax: {exc}", position=exc.position)
            except QueryTypeError as exc:
                raise BadRequest(f"query types: {exc}")
            objs = self.catalog.search(query, kind=Kind.DATASET_FILE)
        else:
            objs = self.catalog.list_by_kind(Kind.DATASET_FILE)
        size = self.config.page_size
        total = len(objs)
        start = (page - 1) * size
        return {
            "query": q_text,
            "page": page,
            "page_size": size,
            "total": total,
            "pages": max(1, -(-total // size)),
            "items": [object_wire(o) for o in objs[start : start + size]],
        }

    # -- analyses -----------------------------------------------------------

    def _study_transformation(self, study: str, n_inputs: int) -> Transformation:
        if study == "lifetime":
            return self.registry.require("lifetime_study", 1)
        if study == "flux":
            return self.registry.require("flux_study", 1)
        return ensure_shower_transformation(self.registry, n_inputs)

    def _check_scalars(self, tr: Transformation, params: dict) -> tuple[dict, list[dict]]:
        """Effective scalar map (defaults filled in) plus per-field problems."""
        errors: list[dict] = []
        effective: dict[str, object] = {
            p.name: p.default for p in tr.params if p.direction is Direction.SCALAR
        }
        for key, raw in params.items():
            p = tr.param(key)
            if p is None or p.direction is not Direction.SCALAR:
                errors.append({"field": str(key), "message": "unknown parameter"})
                continue
            value = None
            if isinstance(raw, (bool, int, float, str)):
                value = coerce_literal(raw, p.value_type)
            if value is None:
                item = {"field": key, "message": f"expected {p.value_type.value}"}
                if p.annotation:
                    item["doc"] = p.annotation
                errors.append(item)
                continue
            effective[key] = value
        return effective, errors

    def _study_errors(self, study: str, tr: Transformation, scalars: dict, n_inputs: int) -> list[dict]:
        errors: list[dict] = []

        def bad(field: str, message: str) -> None:
            item = {"field": field, "message": message}
            p = tr.param(field)
            if p is not None and p.annotation:
                item["doc"] = p.annotation
            errors.append(item)

        if study == "lifetime":
            if scalars["coincidence_level"] < 1:
                bad("coincidence_level", "must be at least 1")
            if scalars["bins"] < 2:
                bad("bins", "must be at least 2")
            if scalars["gate_width_s"] <= 0:
                bad("gate_width_s", "must be positive")
            if scalars["trigger_window_ns"] <= 0:
                bad("trigger_window_ns", "must be positive")
            if scalars["energy_threshold_ns"] < 0:
                bad("energy_threshold_ns", "must not be negative")
            if scalars["fit_min_us"] <= 0:
                bad("fit_min_us", "must be positive")
            if scalars["fit_min_us"] >= scalars["fit_max_us"]:
                bad("fit_min_us", "must be below fit_max_us")
                bad("fit_max_us", "must be above fit_min_us")
            if scalars["gate_width_s"] > 0 and scalars["fit_max_us"] > scalars["gate_width_s"] * 1e6:
                bad("fit_max_us", "exceeds the decay gate")
            if scalars["hist_max_us"] <= 0:
                bad("hist_max_us", "must be positive")
        elif study == "flux":
            if scalars["bin_width_s"] <= 0:
                bad("bin_width_s", "must be positive")
            if scalars["coincidence_level"] < 1:
                bad("coincidence_level", "must be at least 1")
        else:
            if scalars["window_s"] <= 0:
                bad("window_s", "must be positive")
            if scalars["min_detectors"] < 2:
                bad("min_detectors", "must be at least 2")
            elif scalars["min_detectors"] > n_inputs:
                bad("min_detectors", f"only {n_inputs} detectors submitted")
        return errors

    def submit_analysis(
        self, group: Group, study: str, inputs: list, params: dict | None = None
    ) -> dict:
        params = params or {}
        if study not in STUDIES:
            raise BadRequest(f"study must be one of: {', '.join(STUDIES)}", field="study")
        if (
            not isinstance(inputs, list)
            or not inputs
            or not all(isinstance(i, str) for i in inputs)
        ):
            raise BadRequest("inputs must be a nonempty list of file names", field="inputs")
        if not isinstance(params, dict):
            raise BadRequest("params must be an object", field="params")
        for lfn in inputs:
            if not self.store.exists(lfn):
                raise NotFound(f"unknown input file: {lfn}")
        if study == "shower":
            if len(inputs) < 2:
                raise BadRequest("shower search needs at least two datasets", field="inputs")
        elif len(inputs) != 1:
            raise BadRequest(f"{study} takes exactly one dataset", field="inputs")
        tr = self._study_transformation(study, len(inputs))
        scalars, errors = self._check_scalars(tr, params)
        if errors:
            raise BadRequest("invalid parameters", errors=errors)
        if study == "lifetime" and "hist_max_us" not in params:
            # The histogram tracks the gate unless the display cap wins.
            scalars["hist_max_us"] = min(scalars["gate_width_s"] * 1e6, 20.0)
        errors = self._study_errors(study, tr, scalars, len(inputs))
        if errors:
            raise BadRequest("invalid parameters", errors=errors)
        key = json.dumps(
            {"study": study, "inputs": inputs, "scalars": scalars, "group": group.group_id},
            sort_keys=True,
            separators=(",", ":"),
        )
        analysis_id = "an_" + sha256_hex(key.encode("utf-8"))[:12]
        now = time.time()
        with self.db.lock:
            rows = self.db.query(
                "SELECT status FROM analyses WHERE analysis_id = ?", (analysis_id,)
            )
            if rows and rows[0][0] in ("pending", "running", "succeeded"):
                return self.get_analysis(group, analysis_id)
            if rows:
                # Earlier attempt failed; run it again.
                self.db.execute(
                    "UPDATE analyses SET status = 'pending', detail = '', outputs = '{}', "
                    "created_at = ?, finished_at = NULL WHERE analysis_id = ?",
                    (now, analysis_id),
                )
            else:
                self.db.execute(
                    "INSERT INTO analyses "
                    "(analysis_id, group_id, study, inputs, scalars, status, created_at) "
                    "VALUES (?, ?, ?, ?, ?, 'pending', ?)",
                    (
                        analysis_id,
                        group.group_id,
                        study,
                        json.dumps(inputs),
                        json.dumps(scalars, sort_keys=True),
                        now,
                    ),
                )
        self._enqueue(analysis_id)
        return self.get_analysis(group, analysis_id)

    def get_analysis(self, group: Group, analysis_id: str) -> dict:
        rows = self.db.query(
            "SELECT analysis_id, group_id, study, inputs, scalars, status, detail, "
            "outputs, created_at, finished_at FROM analyses WHERE analysis_id = ?",
            (analysis_id,),
        )
        if not rows:
            raise NotFound(f"no such analysis: {analysis_id}")
        (aid, group_id, study, inputs, scalars, status, detail, outputs, created, finished) = rows[0]
        out = json.loads(outputs)
        return {
            "analysis_id": aid,
            "group_id": group_id,
            "study": study,
            "status": status,
            "inputs": json.loads(inputs),
            "params": json.loads(scalars),
            "detail": detail,
            "outputs": out,
            "dag_available": status == "succeeded" and bool(out),
            "created_at": created,
            "finished_at": finished,
        }

    # -- analysis workers ---------------------------------------------------

    def _enqueue(self, analysis_id: str) -> None:
        if self.pool is None:
            self._run_analysis(analysis_id)
        else:
            self.pool.submit(self._run_guarded, analysis_id)

    def _run_guarded(self, analysis_id: str) -> None:
        try:
            self._run_analysis(analysis_id)
        except Exception as exc:  # a worker thread must never die silently
            self._finish_analysis(analysis_id, "failed", f"internal error: {exc}", {})

    def _claim(self, analysis_id: str) -> dict | None:
        with self.db.lock:
            rows = self.db.query(
                "SELECT group_id, study, inputs, scalars FROM analyses "
                "WHERE analysis_id = ? AND status = 'pending'",
                (analysis_id,),
            )
            if not rows:
                return None
            self.db.execute(
                "UPDATE analyses SET status = 'running' WHERE analysis_id = ?", (analysis_id,)
            )
        group_id, study, inputs, scalars = rows[0]
        return {
            "group_id": group_id,
            "study": study,
            "inputs": json.loads(inputs),
            "scalars": json.loads(scalars),
        }

    def _finish_analysis(
        self, analysis_id: str, status: str, detail: str, outputs: dict
    ) -> None:
        self.db.execute(
            "UPDATE analyses SET status = ?, detail = ?, outputs = ?, finished_at = ? "
            "WHERE analysis_id = ?",
            (status, detail or "", json.dumps(outputs, sort_keys=True), time.time(), analysis_id),
        )

    def _output_map(self, study: str, analysis_id: str) -> dict[str, str]:
        """Recipe output parameter -> logical file name."""
        if study == "lifetime":
            return {
                "hist": f"{analysis_id}.hist.json",
                "fitres": f"{analysis_id}.fit.json",
                "plot": f"{analysis_id}.plot.svg",
            }
        if study == "flux":
            return {
                "series": f"{analysis_id}.series.tsv",
                "plot": f"{analysis_id}.plot.svg",
            }
        return {"groups": f"{analysis_id}.groups.json"}

    def _build_derivation(
        self, analysis_id: str, study: str, inputs: list[str], scalars: dict
    ) -> Derivation:
        tr = self._study_transformation(study, len(inputs))
        outputs = self._output_map(study, analysis_id)
        files: dict[str, str] = dict(outputs)
        if study == "shower":
            for i, lfn in enumerate(inputs):
                files[f"data{i + 1}"] = lfn
        else:
            files["data"] = inputs[0]
        bindings = []
        for p in tr.params:
            if p.direction is Direction.SCALAR:
                bindings.append((p.name, scalars[p.name]))
            else:
                bindings.append((p.name, Ref(files[p.name])))
        return Derivation(analysis_id, tr.name, tr.version, tuple(bindings))

    _ROLE_SUFFIXES = (
        (".hist.json", "histogram"),
        (".fit.json", "fit"),
        (".plot.svg", "plot"),
        (".series.tsv", "series"),
        (".groups.json", "groups"),
    )

    def _roles(self, lfns) -> dict[str, str]:
        out: dict[str, str] = {}
        for lfn in sorted(lfns):
            for suffix, role in self._ROLE_SUFFIXES:
                if lfn.endswith(suffix):
                    out[role] = lfn
        return out

    def _run_analysis(self, analysis_id: str) -> None:
        claim = self._claim(analysis_id)
        if claim is None:
            return
        dv = self._build_derivation(
            analysis_id, claim["study"], claim["inputs"], claim["scalars"]
        )
        try:
            run = run_derivation(
                dv,
                registry=self.registry,
                executables=EXECUTABLES,
                store=self.store,
                log=self.log,
            )
        except ExecutorError as exc:
            self._finish_analysis(analysis_id, "failed", str(exc), {})
            return
        if not run.succeeded:
            self._finish_analysis(
                analysis_id, "failed", run.failure_detail or "execution failed", {}
            )
            return
        outputs = self._register_outputs(claim, analysis_id, run)
        self._finish_analysis(analysis_id, "succeeded", "", outputs)

    def _register_outputs(self, claim: dict, analysis_id: str, run) -> dict[str, str]:
        roles = self._roles(run.outputs)
        group = self.groups.get(claim["group_id"])
        group_name = group.name if group else claim["group_id"]
        common = [
            MetadataTuple("study", ValueType.STRING, (claim["study"],)),
            MetadataTuple("analysis", ValueType.STRING, (analysis_id,)),
            MetadataTuple("group", ValueType.STRING, (group_name,)),
            MetadataTuple("date", ValueType.DATE, (datetime.now(),)),
        ]
        for role, lfn in roles.items():
            kind = Kind.PLOT if role == "plot" else Kind.DATASET_FILE
            meta = list(common) + [MetadataTuple("name", ValueType.STRING, (lfn,))]
            if role == "plot":
                title = claim["scalars"].get("title") or claim["study"]
                meta.append(MetadataTuple("type", ValueType.STRING, ("Plot",)))
                meta.append(MetadataTuple("title", ValueType.STRING, (str(title),)))
                if "fit" in roles:
                    fit = fit_from_json(self.store.read_bytes(roles["fit"]).decode("utf-8"))
                    meta += [
                        MetadataTuple("tau_us", ValueType.FLOAT, (fit.tau_us,)),
                        MetadataTuple("sigma_tau_us", ValueType.FLOAT, (fit.sigma_tau_us,)),
                        MetadataTuple("fit_A", ValueType.FLOAT, (fit.A,)),
                        MetadataTuple("fit_B", ValueType.FLOAT, (fit.B,)),
                        MetadataTuple("chi2", ValueType.FLOAT, (fit.chi2,)),
                        MetadataTuple("ndf", ValueType.INTEGER, (fit.ndf,)),
                        MetadataTuple("n_candidates", ValueType.INTEGER, (fit.n_candidates,)),
                        MetadataTuple("converged", ValueType.BOOLEAN, (fit.converged,)),
                    ]
            self.catalog.register(kind, lfn, f"sha256:{run.outputs[lfn]}", meta)
        return roles

    # -- plots and provenance -----------------------------------------------

    def get_plot_bytes(self, group: Group, lfn: str) -> bytes:
        if not self.store.exists(lfn):
            raise NotFound(f"no such file: {lfn}")
        return self.store.read_bytes(lfn)

    def get_dag_text(self, group: Group, lfn: str) -> str:
        try:
            dag = build_dag(lfn, self.log, known_files=self.store.exists)
        except UnknownFile:
            raise NotFound(f"no such file: {lfn}")
        return export_dot(dag)

    def save_plot(self, group: Group, lfn: str, tuples: list[MetadataTuple]) -> dict:
        obj = None
        for kind in (Kind.PLOT, Kind.DATASET_FILE):
            obj = self.catalog.find(kind, lfn)
            if obj is not None:
                break
        if obj is None:
            raise NotFound(f"no such plot: {lfn}")
        try:
            obj = self.catalog.annotate(obj.object_id, tuples)
        except (InvalidMetadata, TypeConflict) as exc:
            raise BadRequest(str(exc), field="metadata")
        # Saving a plot also freezes its workflow graph as a figure.
        dot_text = self.get_dag_text(group, lfn)
        dag_lfn = f"{lfn}.dag.dot"
        self.store.put_bytes(dag_lfn, dot_text.encode("utf-8"))
        dag_obj = self.catalog.register(
            Kind.PLOT,
            dag_lfn,
            f"sha256:{sha256_hex(dot_text.encode('utf-8'))}",
            [
                MetadataTuple("name", ValueType.STRING, (dag_lfn,)),
                MetadataTuple("type", ValueType.STRING, ("DAG",)),
                MetadataTuple("source", ValueType.STRING, (lfn,)),
                MetadataTuple("group", ValueType.STRING, (group.name,)),
                MetadataTuple("date", ValueType.DATE, (datetime.now(),)),
            ],
        )
        return {
            "object": object_wire(obj),
            "dag_lfn": dag_lfn,
            "dag_object_id": dag_obj.object_id,
        }

    # -- posters ------------------------------------------------------------

    _SECTIONS = ("abstract", "procedures", "results", "discussion_conclusions")

    def _name_in_catalog(self, name: str) -> bool:
        return any(self.catalog.find(k, name) is not None for k in Kind)

    def create_poster(self, group: Group, body: dict) -> dict:
        title = body.get("title")
        if not isinstance(title, str) or not title.strip():
            raise BadRequest("poster needs a title", field="title")
        authors = body.get("authors") or [group.name]
        if not isinstance(authors, list) or not all(
            isinstance(a, str) and a for a in authors
        ):
            raise BadRequest("authors must be a list of names", field="authors")
        sections = {}
        for s in self._SECTIONS:
            v = body.get(s, "")
            if not isinstance(v, str):
                raise BadRequest(f"{s} must be text", field=s)
            sections[s] = v
        figures = body.get("figures", [])
        if not isinstance(figures, list) or not all(isinstance(f, str) for f in figures):
            raise BadRequest("figures must be a list of file names", field="figures")
        for figure in figures:
            if not self._name_in_catalog(figure):
                raise NotFound(f"figure not in the catalog: {figure}")
        payload = json.dumps(
            {"title": title, "authors": authors, **sections, "figures": figures},
            sort_keys=True,
            separators=(",", ":"),
        )
        teacher = self.groups.get(group.teacher_id) if group.teacher_id else None
        now = datetime.now()
        year = (
            f"{now.year}-{now.year + 1}" if now.month >= 7 else f"{now.year - 1}-{now.year}"
        )
        meta = [
            MetadataTuple("title", ValueType.STRING, (title,)),
            MetadataTuple("author", ValueType.STRING, tuple(authors)),
            MetadataTuple("school", ValueType.STRING, (group.school,)),
            MetadataTuple("city", ValueType.STRING, (group.city,)),
            MetadataTuple("state", ValueType.STRING, (group.state,)),
            MetadataTuple("teacher", ValueType.STRING, ((teacher or group).name,)),
            MetadataTuple("group", ValueType.STRING, (group.name,)),
            MetadataTuple("project", ValueType.STRING, ("cosmic",)),
            MetadataTuple("year", ValueType.STRING, (year,)),
            MetadataTuple("type", ValueType.STRING, ("Poster",)),
            MetadataTuple("date", ValueType.DATE, (now,)),
        ]
        obj = self.catalog.register(Kind.POSTER, title, payload, meta)
        return self._poster_wire(obj)

    def _poster_wire(self, obj: CatalogObject) -> dict:
        data = json.loads(obj.payload)
        out = {"poster_id": obj.object_id, "title": data["title"], "authors": data["authors"]}
        for s in self._SECTIONS:
            out[s] = data[s]
        out["figures"] = data["figures"]
        out["metadata"] = object_wire(obj)["metadata"]
        return out

    def get_poster(self, group: Group, poster_id: str) -> dict:
        try:
            obj = self.catalog.get(poster_id)
        except UnknownObject:
            raise NotFound(f"no such poster: {poster_id}")
        if obj.kind is not Kind.POSTER:
            raise NotFound(f"no such poster: {poster_id}")
        return self._poster_wire(obj)

    # -- comments -----------------------------------------------------------

    def _comment_target(self, target: str):
        """Comments accept an object id or the object's file name."""
        try:
            return self.catalog.get(target)
        except UnknownObject:
            pass
        for kind in (Kind.PLOT, Kind.POSTER, Kind.DATASET_FILE):
            obj = self.catalog.find(kind, target)
            if obj is not None:
                return obj
        raise NotFound(f"no such object: {target}")

    def add_comment(self, group: Group, target: str, body: str) -> dict:
        if not isinstance(body, str) or not body.strip():
            raise BadRequest("comment body must be nonempty", field="body")
        with self.db.lock:
            obj = self._comment_target(target)
            seq = 0
            for name in obj.metadata:
                m = _COMMENT_RE.match(name)
                if m:
                    seq = max(seq, int(m.group(1)))
            attr = f"comment_{seq + 1:06d}"
            created = format_date(datetime.now())
            t = MetadataTuple(attr, ValueType.STRING, (group.name, created, body))
            self.catalog.annotate(obj.object_id, [t])
        return {
            "comment_id": attr,
            "target": target,
            "author": group.name,
            "created_at": created,
            "body": body,
        }

    def list_comments(self, group: Group, target: str) -> dict:
        obj = self._comment_target(target)
        comments = []
        for name in sorted(obj.metadata):
            if not _COMMENT_RE.match(name):
                continue
            author, created_at, body = obj.metadata[name].attribute_values
            comments.append(
                {"comment_id": name, "author": author, "created_at": created_at, "body": body}
            )
        return {"target": target, "comments": comments}

    # -- glossary and reference content --------------------------------------

    _CONTENT_KINDS = {
        "glossary": (Kind.GLOSSARY, "Glossary_"),
        "reference": (Kind.REFERENCE, "Reference_"),
    }

    def _content_kind(self, kind_word: str) -> tuple[Kind, str]:
        if kind_word not in self._CONTENT_KINDS:
            raise NotFound(f"no such content kind: {kind_word}")
        return self._CONTENT_KINDS[kind_word]

    def put_content(
        self, group: Group, kind_word: str, name: str, body: str, description: str = ""
    ) -> dict:
        kind, prefix = self._content_kind(kind_word)
        if group.role not in ("teacher", "admin"):
            raise Forbidden("content editing needs a teacher or admin session")
        if not isinstance(body, str) or not body.strip():
            raise BadRequest("body must be nonempty", field="body")
        if not isinstance(description, str):
            raise BadRequest("description must be text", field="description")
        full = name if name.startswith(prefix) else prefix + name
        tuples = [
            MetadataTuple("body", ValueType.STRING, (body,)),
            MetadataTuple("description", ValueType.STRING, (description,)),
        ]
        obj = self.catalog.find(kind, full)
        if obj is None:
            obj = self.catalog.register(kind, full, "", tuples)
        else:
            obj = self.catalog.annotate(obj.object_id, tuples)
        return self._content_wire(kind_word, obj)

    def _content_wire(self, kind_word: str, obj: CatalogObject) -> dict:
        def text_of(attr: str) -> str:
            t = obj.metadata.get(attr)
            return str(t.attribute_values[0]) if t and t.attribute_values else ""

        return {
            "kind": kind_word,
            "name": obj.name,
            "body": text_of("body"),
            "description": text_of("description"),
            "object_id": obj.object_id,
        }

    def get_content(self, group: Group, kind_word: str, name: str) -> dict:
        kind, prefix = self._content_kind(kind_word)
        full = name if name.startswith(prefix) else prefix + name
        obj = self.catalog.find(kind, full)
        if obj is None:
            raise NotFound(f"no such {kind_word} item: {name}")
        return self._content_wire(kind_word, obj)

    def list_content(self, group: Group, kind_word: str) -> dict:
        kind, _ = self._content_kind(kind_word)
        items = []
        for obj in self.catalog.list_by_kind(kind):
            t = obj.metadata.get("description")
            items.append(
                {
                    "name": obj.name,
                    "description": str(t.attribute_values[0]) if t and t.attribute_values else "",
                }
            )
        return {"kind": kind_word, "items": items}

    # -- logbook ------------------------------------------------------------

    _ENTRY_COLS = "entry_id, group_id, milestone_id, body, author_role, created_at, teacher_comment"

    def write_logbook(self, group: Group, milestone_id: str, body: str) -> dict:
        if self.config.milestone(milestone_id) is None:
            raise BadRequest(f"unknown milestone: {milestone_id}", field="milestone")
        if not isinstance(body, str) or not body.strip():
            raise BadRequest("entry body must be nonempty", field="body")
        with self.db.lock:
            (count,) = self.db.query("SELECT COUNT(*) FROM logbook_entries")[0]
            entry_id = f"lb-{count + 1:06d}"
            self.db.execute(
                "INSERT INTO logbook_entries "
                "(entry_id, group_id, milestone_id, body, author_role, created_at) "
                "VALUES (?, ?, ?, ?, ?, ?)",
                (
                    entry_id,
                    group.group_id,
                    milestone_id,
                    body,
                    group.role,
                    format_date(datetime.now()),
                ),
            )
        return self._entry_wire(entry_id)

    def _entry_wire_row(self, row: tuple) -> dict:
        entry_id, group_id, milestone_id, body, author_role, created_at, teacher_comment = row
        m = self.config.milestone(milestone_id)
        return {
            "entry_id": entry_id,
            "group_id": group_id,
            "milestone": milestone_id,
            "milestone_title": m.title if m else milestone_id,
            "body": body,
            "author_role": author_role,
            "created_at": created_at,
            "teacher_comment": teacher_comment,
        }

    def _entry_wire(self, entry_id: str) -> dict:
        rows = self.db.query(
            f"SELECT {self._ENTRY_COLS} FROM logbook_entries WHERE entry_id = ?", (entry_id,)
        )
        if not rows:
            raise NotFound(f"no such logbook entry: {entry_id}")
        return self._entry_wire_row(rows[0])

    def _may_view_group(self, requester: Group, target: Group) -> bool:
        if requester.role == "admin" or requester.group_id == target.group_id:
            return True
        return requester.role == "teacher" and target.teacher_id == requester.group_id

    def read_logbook_group(self, requester: Group, group_id: str) -> dict:
        target = self.groups.get(group_id)
        if target is None:
            raise NotFound(f"no such group: {group_id}")
        if not self._may_view_group(requester, target):
            raise Forbidden("that logbook belongs to another research group")
        rows = self.db.query(
            f"SELECT {self._ENTRY_COLS} FROM logbook_entries WHERE group_id = ? ORDER BY seq",
            (group_id,),
        )
        return {"group": group_id, "entries": [self._entry_wire_row(r) for r in rows]}

    def logbook_overview(self, requester: Group, milestone_id: str) -> dict:
        if requester.role not in ("teacher", "admin"):
            raise Forbidden("milestone overviews are for teachers")
        if self.config.milestone(milestone_id) is None:
            raise BadRequest(f"unknown milestone: {milestone_id}", field="milestone")
        rows = self.db.query(
            f"SELECT {self._ENTRY_COLS} FROM logbook_entries WHERE milestone_id = ? ORDER BY seq",
            (milestone_id,),
        )
        entries = [self._entry_wire_row(r) for r in rows]
        if requester.role == "teacher":
            mine = {g.group_id for g in self.groups.students_of(requester.group_id)}
            mine.add(requester.group_id)
            entries = [e for e in entries if e["group_id"] in mine]
        return {"milestone": milestone_id, "entries": entries}

    def teacher_comment(self, requester: Group, entry_id: str, body: str) -> dict:
        if not isinstance(body, str) or not body.strip():
            raise BadRequest("comment body must be nonempty", field="body")
        rows = self.db.query(
            "SELECT group_id FROM logbook_entries WHERE entry_id = ?", (entry_id,)
        )
        if not rows:
            raise NotFound(f"no such logbook entry: {entry_id}")
        target = self.groups.get(rows[0][0])
        allowed = requester.role == "admin" or (
            requester.role == "teacher"
            and target is not None
            and target.teacher_id == requester.group_id
        )
        if not allowed:
            raise Forbidden("grading is for the group's own teacher")
        self.db.execute(
            "UPDATE logbook_entries SET teacher_comment = ? WHERE entry_id = ?",
            (body, entry_id),
        )
        return self._entry_wire(entry_id)

    # -- descriptors for clients ---------------------------------------------

    def study_schemas(self) -> dict:
        out = {}
        for study in STUDIES:
            tr = self._study_transformation(study, 2 if study == "shower" else 1)
            fields = []
            for p in tr.params:
                if p.direction is not Direction.SCALAR:
                    continue
                fields.append(
                    {
                        "name": p.name,
                        "type": p.value_type.value,
                        "default": p.default,
                        "doc": p.annotation or "",
                    }
                )
            out[study] = {
                "inputs": "many" if study == "shower" else "one",
                "params": fields,
            }
        return out

    def milestones_wire(self) -> list[dict]:
        return [{"id": m.milestone_id, "title": m.title} for m in self.config.milestones]
