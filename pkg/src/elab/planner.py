"""Turn expanded atomic calls into an ordered, serializable plan.

A plan is the unit the local executor runs and the unit a remote scheduler
would accept: jobs with rendered argument lists, declared input/output
logical files, and dependency edges derived purely from producer/consumer
relations between those files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .storage import sha256_hex
from .vdl import AtomicCall, Direction, Transformation, ValueType


class PlanError(Exception):
    pass


class MissingInput(PlanError):
    def __init__(self, lfn: str):
        super().__init__(f"input {lfn!r} is neither cataloged nor produced by the plan")
        self.lfn = lfn


class DuplicateProducer(PlanError):
    def __init__(self, lfn: str):
        super().__init__(f"{lfn!r} is produced by more than one job")
        self.lfn = lfn


@dataclass(frozen=True)
class Job:
    job_id: str
    tr_name: str
    tr_version: int
    executable_key: str
    args: tuple[str, ...]
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    depends_on: tuple[str, ...]

    @property
    def tr_key(self) -> str:
        return f"{self.tr_name}:{self.tr_version}"


@dataclass(frozen=True)
class Plan:
    plan_id: str
    jobs: tuple[Job, ...]
    workspace_root: str | None = None


def render_scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_args(tr: Transformation, bindings: dict) -> tuple[str, ...]:
    """Scalar arguments as --name=value, in parameter declaration order."""
    out = []
    for p in tr.params:
        if p.direction is Direction.SCALAR and p.name in bindings:
            out.append(f"--{p.name}={render_scalar(bindings[p.name])}")
    return tuple(out)


def parse_args(tr: Transformation, args: tuple[str, ...]) -> dict:
    """Inverse of render_args, typed by the transformation's parameters."""
    scalars = {}
    for arg in args:
        if not arg.startswith("--") or "=" not in arg:
            raise PlanError(f"malformed argument {arg!r}")
        name, raw = arg[2:].split("=", 1)
        p = tr.param(name)
        if p is None or p.direction is not Direction.SCALAR:
            raise PlanError(f"argument {name!r} is not a scalar parameter of {tr.name!r}")
        if p.value_type is ValueType.INTEGER:
            scalars[name] = int(raw)
        elif p.value_type is ValueType.FLOAT:
            scalars[name] = float(raw)
        elif p.value_type is ValueType.BOOLEAN:
            if raw not in ("true", "false"):
                raise PlanError(f"argument {name!r}: expected true or false, got {raw!r}")
            scalars[name] = raw == "true"
        else:
            scalars[name] = raw
    return scalars


def _job_files(call: AtomicCall) -> tuple[tuple[str, ...], tuple[str, ...]]:
    tr = call.transformation
    inputs = []
    outputs = []
    for p in tr.params:
        if p.direction is Direction.INPUT:
            inputs.append(str(call.bindings[p.name]))
        elif p.direction is Direction.OUTPUT:
            outputs.append(str(call.bindings[p.name]))
    return tuple(inputs), tuple(outputs)


def plan(atomic_calls: list[AtomicCall], have_input=None, workspace_root: str | None = None) -> Plan:
    """Build a topologically ordered plan from expanded calls.

    ``have_input`` tests whether an lfn already exists outside the plan
    (catalog membership); inputs neither produced in-plan nor satisfying
    have_input raise MissingInput. Order is deterministic: Kahn's algorithm
    with ties broken by original call index.
    """
    jobs: list[Job] = []
    producer: dict[str, str] = {}
    per_job_files = []
    for idx, call in enumerate(atomic_calls):
        inputs, outputs = _job_files(call)
        job_id = f"j{idx:03d}"
        for lfn in outputs:
            if lfn in producer:
                raise DuplicateProducer(lfn)
            producer[lfn] = job_id
        per_job_files.append((job_id, call, inputs, outputs))
    for job_id, call, inputs, outputs in per_job_files:
        deps = set()
        for lfn in inputs:
            if lfn in producer:
                if producer[lfn] != job_id:
                    deps.add(producer[lfn])
            elif have_input is None or not have_input(lfn):
                raise MissingInput(lfn)
        tr = call.transformation
        jobs.append(
            Job(
                job_id=job_id,
                tr_name=tr.name,
                tr_version=tr.version,
                executable_key=tr.body.executable_name,  # type: ignore[union-attr]
                args=render_args(tr, call.bindings),
                inputs=inputs,
                outputs=outputs,
                depends_on=tuple(sorted(deps)),
            )
        )
    ordered = _topological(jobs)
    plan_id = "plan-" + sha256_hex(_manifest_body(ordered).encode())[:12]
    return Plan(plan_id=plan_id, jobs=tuple(ordered), workspace_root=workspace_root)


def _topological(jobs: list[Job]) -> list[Job]:
    index = {job.job_id: i for i, job in enumerate(jobs)}
    remaining_deps = {job.job_id: set(job.depends_on) for job in jobs}
    dependents: dict[str, list[str]] = {job.job_id: [] for job in jobs}
    for job in jobs:
        for dep in job.depends_on:
            if dep not in index:
                raise PlanError(f"job {job.job_id} depends on unknown job {dep}")
            dependents[dep].append(job.job_id)
    ready = sorted((j for j, deps in remaining_deps.items() if not deps), key=index.__getitem__)
    by_id = {job.job_id: job for job in jobs}
    order: list[Job] = []
    while ready:
        job_id = ready.pop(0)
        order.append(by_id[job_id])
        changed = False
        for dep_id in dependents[job_id]:
            remaining_deps[dep_id].discard(job_id)
            if not remaining_deps[dep_id]:
                ready.append(dep_id)
                changed = True
        if changed:
            ready.sort(key=index.__getitem__)
    if len(order) != len(jobs):
        raise PlanError("dependency cycle among jobs")
    return order


def _manifest_body(jobs: list[Job]) -> str:
    entries = []
    for job in jobs:
        entries.append(
            {
                "id": job.job_id,
                "tr": job.tr_key,
                "exe": job.executable_key,
                "args": list(job.args),
                "inputs": list(job.inputs),
                "outputs": list(job.outputs),
                "depends_on": list(job.depends_on),
            }
        )
    return json.dumps(entries, ensure_ascii=False, indent=2)


def manifest(p: Plan) -> str:
    """The grid-submission document; emission is byte-deterministic."""
    doc = {"plan_id": p.plan_id, "jobs": []}
    for job in p.jobs:
        doc["jobs"].append(
            {
                "id": job.job_id,
                "tr": job.tr_key,
                "exe": job.executable_key,
                "args": list(job.args),
                "inputs": list(job.inputs),
                "outputs": list(job.outputs),
                "depends_on": list(job.depends_on),
            }
        )
    return json.dumps(doc, ensure_ascii=False, indent=2) + "\n"


def parse_manifest(text: str) -> Plan:
    doc = json.loads(text)
    jobs = []
    for entry in doc["jobs"]:
        name, _, version = entry["tr"].rpartition(":")
        jobs.append(
            Job(
                job_id=entry["id"],
                tr_name=name,
                tr_version=int(version),
                executable_key=entry["exe"],
                args=tuple(entry["args"]),
                inputs=tuple(entry["inputs"]),
                outputs=tuple(entry["outputs"]),
                depends_on=tuple(entry["depends_on"]),
            )
        )
    return Plan(plan_id=doc["plan_id"], jobs=tuple(jobs))
