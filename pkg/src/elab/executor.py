"""Local plan execution, derivation runs, result caching, re-derivation.

Transformations execute in-process through a registry keyed by the atomic
body's executable name. Each job gets a fresh working directory under the
storage root with its declared inputs materialized read-only, so undeclared
reads are impossible by construction. Every job leaves an ExecutionRecord
whatever its outcome; failures propagate to transitive dependents, which
are recorded as failed with detail "upstream failure" and never run.
"""

from __future__ import annotations

import shutil
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .catalog import Catalog, CatalogObject, Kind
from .metadata import MetadataTuple, ValueType as MetaType
from .planner import Job, Plan, parse_args, plan as build_plan
from .provenance import (
    FAILED,
    SUCCEEDED,
    ExecutionRecord,
    ProvenanceLog,
    UnknownFile,
)
from .storage import FileStore, digest_file, sha256_hex
from .vdl import (
    Derivation,
    Direction,
    Ref,
    Transformation,
    UnresolvedTransformation,
    ValidationReport,
    coerce_literal,
    expand_compound,
    parse_vdl,
    serialize,
    validate_derivation,
)


class ExecutorError(Exception):
    pass


class UnknownExecutable(ExecutorError):
    def __init__(self, key: str):
        super().__init__(f"no implementation registered for executable {key!r}")
        self.key = key


class DerivationInvalid(ExecutorError):
    def __init__(self, dv_name: str, report: ValidationReport):
        details = "; ".join(p.message for p in report.problems)
        super().__init__(f"derivation {dv_name!r} is invalid: {details}")
        self.report = report


class NotDerived(ExecutorError):
    def __init__(self, lfn: str):
        super().__init__(f"{lfn!r} is an uploaded source file, nothing to rederive")
        self.lfn = lfn


class OverrideTypeMismatch(ExecutorError):
    pass


@dataclass
class JobContext:
    """What a transformation implementation sees: paths in param order."""

    workdir: Path
    inputs: list[Path]
    outputs: list[Path]
    scalars: dict


Executable = Callable[[JobContext], None]


class TransformationRegistry:
    """Catalog-backed store of transformation definitions by (name, version).

    Registering a transformation also registers one catalog object per
    parameter, so parameters are searchable on their own. Compound bodies
    reference callees by bare name; resolution picks the highest registered
    version.
    """

    def __init__(self, catalog: Catalog):
        self.catalog = catalog
        self._cache: dict[tuple[str, int], Transformation] = {}

    def register(self, tr: Transformation) -> CatalogObject:
        payload = serialize([tr])
        meta = [
            MetadataTuple("name", MetaType.STRING, (tr.name,)),
            MetadataTuple("version", MetaType.INTEGER, (tr.version,)),
            MetadataTuple("body", MetaType.STRING, ("atomic" if tr.is_atomic else "compound",)),
        ]
        obj = self.catalog.register(Kind.TRANSFORMATION, tr.key, payload, meta)
        for p in tr.params:
            pmeta = [
                MetadataTuple("transformation", MetaType.STRING, (tr.key,)),
                MetadataTuple("param", MetaType.STRING, (p.name,)),
                MetadataTuple("direction", MetaType.STRING, (p.direction.value,)),
                MetadataTuple("value_type", MetaType.STRING, (p.value_type.value,)),
            ]
            if p.annotation:
                pmeta.append(MetadataTuple("doc", MetaType.STRING, (p.annotation,)))
            self.catalog.register(Kind.PARAMETER, f"{tr.key}.{p.name}", p.name, pmeta)
        self._cache[(tr.name, tr.version)] = tr
        return obj

    def register_derivation(self, dv: Derivation) -> CatalogObject:
        meta = [
            MetadataTuple("name", MetaType.STRING, (dv.name,)),
            MetadataTuple("transformation", MetaType.STRING, (dv.tr_name,)),
            MetadataTuple("version", MetaType.INTEGER, (dv.tr_version,)),
        ]
        return self.catalog.register(Kind.DERIVATION, dv.name, serialize([dv]), meta)

    def get(self, name: str, version: int) -> Transformation | None:
        key = (name, version)
        if key in self._cache:
            return self._cache[key]
        obj = self.catalog.find(Kind.TRANSFORMATION, f"{name}:{version}")
        if obj is None:
            return None
        tr = parse_vdl(obj.payload)[0]
        assert isinstance(tr, Transformation)
        self._cache[key] = tr
        return tr

    def require(self, name: str, version: int) -> Transformation:
        tr = self.get(name, version)
        if tr is None:
            raise UnresolvedTransformation(f"{name}:{version}")
        return tr

    def latest(self, name: str) -> Transformation:
        versions = []
        for obj in self.catalog.list_by_kind(Kind.TRANSFORMATION):
            tr_name, _, version = obj.name.rpartition(":")
            if tr_name == name:
                versions.append(int(version))
        if not versions:
            raise UnresolvedTransformation(name)
        return self.require(name, max(versions))

    def resolver(self, name: str) -> Transformation:
        return self.latest(name)


# ---------------------------------------------------------------------------
# Plan execution


def execute_local(
    p: Plan,
    executables: dict[str, Executable],
    resolve_tr: Callable[[str, int], Transformation],
    store: FileStore,
    log: ProvenanceLog,
    dv_name: str = "",
) -> list[ExecutionRecord]:
    for job in p.jobs:
        if job.executable_key not in executables:
            raise UnknownExecutable(job.executable_key)
    workspace = Path(p.workspace_root) if p.workspace_root else store.root / "work"
    workspace = workspace / p.plan_id
    records: list[ExecutionRecord] = []
    failed: set[str] = set()
    for job in p.jobs:
        started = time.time()
        if any(dep in failed for dep in job.depends_on):
            rec = _finish_job(
                log, job, resolve_tr, dv_name, started,
                inputs=tuple((lfn, "") for lfn in job.inputs),
                outputs=tuple((lfn, "") for lfn in job.outputs),
                detail="upstream failure",
            )
            failed.add(job.job_id)
            records.append(rec)
            continue
        workdir = workspace / job.job_id
        if workdir.exists():
            shutil.rmtree(workdir)
        workdir.mkdir(parents=True)
        tr = resolve_tr(job.tr_name, job.tr_version)
        scalars = parse_args(tr, job.args)
        detail = None
        input_paths: list[Path] = []
        input_digests: list[tuple[str, str]] = []
        materialized: dict[str, Path] = {}
        for lfn in job.inputs:
            if not store.exists(lfn):
                detail = f"missing input file {lfn}"
                break
            if lfn not in materialized:
                materialized[lfn] = store.materialize(lfn, workdir / lfn, read_only=True)
            path = materialized[lfn]
            input_paths.append(path)
            input_digests.append((lfn, digest_file(path)))
        output_paths = [workdir / lfn for lfn in job.outputs]
        if detail is None:
            ctx = JobContext(workdir, input_paths, output_paths, scalars)
            try:
                executables[job.executable_key](ctx)
            except Exception as exc:
                detail = f"{type(exc).__name__}: {exc}"
        if detail is None:
            for lfn, path in zip(job.outputs, output_paths):
                if not path.is_file():
                    detail = f"output not produced: {lfn}"
                    break
        if detail is None:
            outputs = tuple((lfn, store.put_file(lfn, path)) for lfn, path in zip(job.outputs, output_paths))
        else:
            outputs = tuple((lfn, "") for lfn in job.outputs)
        rec = _finish_job(
            log, job, resolve_tr, dv_name, started,
            inputs=tuple(input_digests) + tuple((lfn, "") for lfn in job.inputs[len(input_digests):]),
            outputs=outputs,
            detail=detail,
            scalars=scalars,
        )
        if detail is not None:
            failed.add(job.job_id)
        records.append(rec)
    return records


def _finish_job(
    log: ProvenanceLog,
    job: Job,
    resolve_tr,
    dv_name: str,
    started: float,
    inputs: tuple[tuple[str, str], ...],
    outputs: tuple[tuple[str, str], ...],
    detail: str | None,
    scalars: dict | None = None,
) -> ExecutionRecord:
    tr = resolve_tr(job.tr_name, job.tr_version)
    if scalars is None:
        scalars = parse_args(tr, job.args)
    bindings = _effective_in_param_order(
        tr, [lfn for lfn, _ in inputs], [lfn for lfn, _ in outputs], scalars
    )
    rec = ExecutionRecord(
        record_id="",
        dv_name=dv_name,
        tr_name=job.tr_name,
        tr_version=job.tr_version,
        effective_bindings=bindings,
        inputs=inputs,
        outputs=outputs,
        started_at=started,
        finished_at=time.time(),
        status=SUCCEEDED if detail is None else FAILED,
        failure_detail=detail,
        level="job",
    )
    return log.get(log.record_execution(rec))


def _effective_in_param_order(tr: Transformation, input_lfns: list, output_lfns: list, scalars: dict):
    # lfn lists are positional, matching the declaration order of file params
    out = []
    in_at = out_at = 0
    for p in tr.params:
        if p.direction is Direction.INPUT:
            out.append((p.name, input_lfns[in_at]))
            in_at += 1
        elif p.direction is Direction.OUTPUT:
            out.append((p.name, output_lfns[out_at]))
            out_at += 1
        elif p.name in scalars:
            out.append((p.name, scalars[p.name]))
    return tuple(out)


# ---------------------------------------------------------------------------
# Result cache


def check_cache(
    dv: Derivation,
    tr: Transformation,
    effective_bindings: dict,
    log: ProvenanceLog,
    store: FileStore,
) -> ExecutionRecord | None:
    """A prior succeeded run usable in place of executing dv, if any.

    Usable means: same transformation name and version, same scalar values,
    same input content digests, and every recorded output still present in
    storage with its recorded digest.
    """
    scalars = {
        p.name: effective_bindings[p.name]
        for p in tr.params
        if p.direction is Direction.SCALAR and p.name in effective_bindings
    }
    current: list[tuple[str, str]] = []
    for p in tr.params:
        if p.direction is not Direction.INPUT:
            continue
        lfn = effective_bindings[p.name]
        if not store.exists(lfn):
            return None
        current.append((lfn, digest_file(store.path_for(lfn))))
    want_level = "job" if tr.is_atomic else "derivation"
    for rec in log.succeeded_records_for_tr(tr.name, tr.version):
        if rec.level != want_level:
            continue
        rb = rec.bindings_dict()
        rec_scalars = {
            p.name: rb[p.name]
            for p in tr.params
            if p.direction is Direction.SCALAR and p.name in rb
        }
        if rec_scalars != scalars or rec.inputs != tuple(current):
            continue
        for lfn, digest in rec.outputs:
            if not store.exists(lfn) or digest_file(store.path_for(lfn)) != digest:
                break
        else:
            return rec
    return None


# ---------------------------------------------------------------------------
# Derivation runs


@dataclass
class RunResult:
    dv: Derivation
    status: str
    records: list[ExecutionRecord] = field(default_factory=list)
    outputs: dict[str, str] = field(default_factory=dict)  # lfn -> digest
    plan: Plan | None = None
    cached: bool = False

    @property
    def succeeded(self) -> bool:
        return self.status == SUCCEEDED

    @property
    def failure_detail(self) -> str | None:
        for rec in self.records:
            if rec.status == FAILED and rec.failure_detail != "upstream failure":
                return rec.failure_detail
        for rec in self.records:
            if rec.status == FAILED:
                return rec.failure_detail
        return None


def run_derivation(
    dv: Derivation,
    *,
    registry: TransformationRegistry,
    executables: dict[str, Executable],
    store: FileStore,
    log: ProvenanceLog,
    force: bool = False,
) -> RunResult:
    """Validate, expand, plan and execute one derivation.

    Records the derivation in the catalog, reuses a cached prior run unless
    ``force``, and for compound transformations appends a derivation-level
    summary record alongside the per-job ones.
    """
    tr = registry.require(dv.tr_name, dv.tr_version)
    report = validate_derivation(dv, tr)
    if not report.ok:
        raise DerivationInvalid(dv.name, report)
    registry.register_derivation(dv)
    effective = report.effective_bindings
    if not force:
        hit = check_cache(dv, tr, effective, log, store)
        if hit is not None:
            return RunResult(dv, SUCCEEDED, [hit], dict(hit.outputs), None, cached=True)
    calls = expand_compound(tr, effective, registry.resolver, context=dv.name)
    p = build_plan(calls, have_input=store.exists)
    records = execute_local(p, executables, registry.require, store, log, dv_name=dv.name)
    produced: dict[str, str] = {}
    consumed: dict[str, str] = {}
    for rec in records:
        produced.update({lfn: digest for lfn, digest in rec.outputs})
        consumed.update({lfn: digest for lfn, digest in rec.inputs if digest})
    status = SUCCEEDED if all(r.status == SUCCEEDED for r in records) else FAILED
    outputs = {}
    for p_spec in tr.params:
        if p_spec.direction is Direction.OUTPUT:
            lfn = effective[p_spec.name]
            outputs[lfn] = produced.get(lfn, "")
    result = RunResult(dv, status, records, outputs, p)
    if not tr.is_atomic and records:
        inputs = tuple(
            (effective[p_spec.name], consumed.get(effective[p_spec.name], ""))
            for p_spec in tr.params
            if p_spec.direction is Direction.INPUT
        )
        summary = ExecutionRecord(
            record_id="",
            dv_name=dv.name,
            tr_name=tr.name,
            tr_version=tr.version,
            effective_bindings=_effective_in_param_order(
                tr,
                [effective[p.name] for p in tr.params if p.direction is Direction.INPUT],
                [effective[p.name] for p in tr.params if p.direction is Direction.OUTPUT],
                {k: v for k, v in effective.items() if tr.param(k).direction is Direction.SCALAR},
            ),
            inputs=inputs,
            outputs=tuple((lfn, digest) for lfn, digest in outputs.items()),
            started_at=min(r.started_at for r in records),
            finished_at=max(r.finished_at for r in records),
            status=status,
            failure_detail=result.failure_detail,
            level="derivation",
        )
        result.records.append(log.get(log.record_execution(summary)))
    return result


# ---------------------------------------------------------------------------
# Re-derivation


@dataclass
class RederiveResult:
    run: RunResult
    record: ExecutionRecord
    lfn_map: dict[str, str]  # original output lfn -> (possibly renamed) lfn


def rederive(
    lfn: str,
    overrides: dict | None = None,
    *,
    registry: TransformationRegistry,
    executables: dict[str, Executable],
    store: FileStore,
    log: ProvenanceLog,
) -> RederiveResult:
    """Re-execute the derivation behind lfn, optionally with new scalars.

    Without overrides the same derivation reruns in place and, inputs being
    unchanged, reproduces the original output digests. With overrides a new
    derivation is created whose name and output lfns carry a suffix derived
    from the override values, so existing products stay untouched.
    """
    producer = log.producer_of(lfn)
    if producer is None:
        if store.exists(lfn):
            raise NotDerived(lfn)
        raise UnknownFile(lfn)
    base = producer
    if producer.dv_name:
        for rec in reversed(log.records()):
            if rec.dv_name == producer.dv_name and rec.level == "derivation" and rec.status == SUCCEEDED:
                base = rec
                break
    tr = registry.require(base.tr_name, base.tr_version)
    rb = base.bindings_dict()
    overrides = dict(overrides or {})
    checked: dict[str, object] = {}
    for name, value in overrides.items():
        p = tr.param(name)
        if p is None or p.direction is not Direction.SCALAR:
            raise OverrideTypeMismatch(f"{name!r} is not a scalar parameter of {tr.name!r}")
        coerced = coerce_literal(value, p.value_type)
        if coerced is None:
            raise OverrideTypeMismatch(f"override {name!r} is not a {p.value_type.value}")
        checked[name] = coerced
    suffix = ""
    if checked:
        digest_src = repr(sorted(checked.items()))
        suffix = ".r" + sha256_hex(digest_src.encode())[:8]
    bindings = []
    lfn_map: dict[str, str] = {}
    for p in tr.params:
        if p.name not in rb:
            continue
        value = rb[p.name]
        if p.direction is Direction.OUTPUT:
            renamed = f"{value}{suffix}" if suffix else str(value)
            lfn_map[str(value)] = renamed
            bindings.append((p.name, Ref(renamed)))
        elif p.direction is Direction.INPUT:
            bindings.append((p.name, Ref(str(value))))
        else:
            bindings.append((p.name, checked.get(p.name, value)))
    dv = Derivation(f"{base.dv_name}{suffix}", tr.name, tr.version, tuple(bindings))
    run = run_derivation(
        dv,
        registry=registry,
        executables=executables,
        store=store,
        log=log,
        force=not checked,
    )
    record = run.records[-1] if run.records else base
    return RederiveResult(run=run, record=record, lfn_map=lfn_map)
