"""Plan construction, ordering, and manifest round-trips."""

import random

import pytest

from elab.planner import (
    DuplicateProducer,
    MissingInput,
    Plan,
    PlanError,
    manifest,
    parse_args,
    parse_manifest,
    plan,
    render_args,
    render_scalar,
)
from elab.vdl import (
    AtomicBody,
    AtomicCall,
    Direction,
    ParamSpec,
    Transformation,
    ValueType,
)


def make_tr(name, n_in, n_out, scalars=(), version=1):
    params = []
    for i in range(n_in):
        params.append(ParamSpec(f"in{i}", Direction.INPUT, ValueType.LOGICAL_FILE))
    for i in range(n_out):
        params.append(ParamSpec(f"out{i}", Direction.OUTPUT, ValueType.LOGICAL_FILE))
    for pname, vtype in scalars:
        params.append(ParamSpec(pname, Direction.SCALAR, vtype))
    return Transformation(name, version, tuple(params), AtomicBody(f"{name}.sh"))


def call(tr, **bindings):
    return AtomicCall(tr, bindings)


# ---------------------------------------------------------------- scalars

def test_render_scalar_forms():
    assert render_scalar(True) == "true"
    assert render_scalar(False) == "false"
    assert render_scalar(7) == "7"
    assert render_scalar(0.1) == "0.1"
    assert render_scalar(2.2e-06) == "2.2e-06"
    assert render_scalar("gate") == "gate"


def test_render_scalar_float_survives_round_trip():
    rng = random.Random(11)
    for _ in range(500):
        x = rng.uniform(-1e6, 1e6) * 10 ** rng.randint(-12, 6)
        assert float(render_scalar(x)) == x


def test_render_args_declaration_order():
    tr = make_tr(
        "fit",
        1,
        1,
        scalars=[("bins", ValueType.INTEGER), ("lo", ValueType.FLOAT), ("tag", ValueType.STRING)],
    )
    args = render_args(tr, {"tag": "x", "bins": 60, "lo": 0.2, "in0": "raw", "out0": "fit"})
    assert args == ("--bins=60", "--lo=0.2", "--tag=x")


def test_render_args_skips_unbound():
    tr = make_tr("t", 0, 1, scalars=[("a", ValueType.INTEGER), ("b", ValueType.INTEGER)])
    assert render_args(tr, {"b": 3, "out0": "o"}) == ("--b=3",)


def test_parse_args_inverts_render():
    tr = make_tr(
        "t",
        0,
        1,
        scalars=[
            ("n", ValueType.INTEGER),
            ("x", ValueType.FLOAT),
            ("s", ValueType.STRING),
            ("flag", ValueType.BOOLEAN),
        ],
    )
    rng = random.Random(23)
    for _ in range(200):
        scalars = {
            "n": rng.randint(-10**9, 10**9),
            "x": rng.uniform(-1e3, 1e3) * 10 ** rng.randint(-9, 9),
            "s": "".join(rng.choice("abc=--") for _ in range(rng.randint(0, 6))),
            "flag": rng.random() < 0.5,
        }
        assert parse_args(tr, render_args(tr, scalars)) == scalars


def test_parse_args_rejects_malformed():
    tr = make_tr("t", 0, 1, scalars=[("n", ValueType.INTEGER), ("flag", ValueType.BOOLEAN)])
    with pytest.raises(PlanError):
        parse_args(tr, ("n=3",))
    with pytest.raises(PlanError):
        parse_args(tr, ("--n",))
    with pytest.raises(PlanError):
        parse_args(tr, ("--nope=3",))
    with pytest.raises(PlanError):
        parse_args(tr, ("--out0=f",))
    with pytest.raises(PlanError):
        parse_args(tr, ("--flag=yes",))


# ---------------------------------------------------------------- small plans

def test_two_step_chain():
    gen = make_tr("gen", 0, 1, scalars=[("n", ValueType.INTEGER)])
    fit = make_tr("fit", 1, 1, scalars=[("lo", ValueType.FLOAT)])
    p = plan(
        [
            call(gen, out0="raw", n=100),
            call(fit, in0="raw", out0="result", lo=0.2),
        ]
    )
    assert [j.job_id for j in p.jobs] == ["j000", "j001"]
    assert p.jobs[0].outputs == ("raw",)
    assert p.jobs[0].depends_on == ()
    assert p.jobs[0].executable_key == "gen.sh"
    assert p.jobs[0].args == ("--n=100",)
    assert p.jobs[1].inputs == ("raw",)
    assert p.jobs[1].depends_on == ("j000",)
    assert p.jobs[1].tr_key == "fit:1"
    assert p.plan_id.startswith("plan-")


def test_consumer_listed_first_still_ordered():
    gen = make_tr("gen", 0, 1)
    fit = make_tr("fit", 1, 1)
    p = plan([call(fit, in0="raw", out0="res"), call(gen, out0="raw")])
    # job ids track the original call index; order puts the producer first
    assert [j.job_id for j in p.jobs] == ["j001", "j000"]
    assert p.jobs[1].depends_on == ("j001",)


def test_external_input_needs_have_input():
    fit = make_tr("fit", 1, 1)
    calls = [call(fit, in0="cataloged", out0="res")]
    with pytest.raises(MissingInput) as err:
        plan(calls)
    assert err.value.lfn == "cataloged"
    p = plan(calls, have_input=lambda lfn: lfn == "cataloged")
    assert p.jobs[0].depends_on == ()


def test_duplicate_producer_rejected():
    gen = make_tr("gen", 0, 1)
    with pytest.raises(DuplicateProducer) as err:
        plan([call(gen, out0="same"), call(gen, out0="same")])
    assert err.value.lfn == "same"


def test_file_cycle_rejected():
    swap = make_tr("swap", 1, 1)
    with pytest.raises(PlanError, match="cycle"):
        plan([call(swap, in0="a", out0="b"), call(swap, in0="b", out0="a")])


# ---------------------------------------------------------------- random DAGs

def random_calls(rng):
    """A random job set whose file references form a DAG.

    Each job consumes a mix of externally known files and outputs of
    earlier jobs, then the list is shuffled so the planner cannot rely
    on submission order.
    """
    trs = {}

    def tr_for(n_in, n_out):
        key = (n_in, n_out)
        if key not in trs:
            trs[key] = make_tr(f"t{n_in}x{n_out}", n_in, n_out)
        return trs[key]

    produced = []
    external = [f"ext{i}" for i in range(rng.randint(1, 4))]
    calls = []
    for i in range(rng.randint(1, 30)):
        n_out = rng.randint(1, 2)
        pool = produced + external
        n_in = rng.randint(0, min(3, len(pool)))
        tr = tr_for(n_in, n_out)
        bindings = {}
        for k, src in enumerate(rng.sample(pool, n_in)):
            bindings[f"in{k}"] = src
        for k in range(n_out):
            lfn = f"f{i}_{k}"
            bindings[f"out{k}"] = lfn
            produced.append(lfn)
        calls.append(call(tr, **bindings))
    rng.shuffle(calls)
    return calls, set(external)


def test_plan_order_respects_all_edges():
    rng = random.Random(404)
    for _ in range(100):
        calls, external = random_calls(rng)
        p = plan(calls, have_input=external.__contains__)
        assert len(p.jobs) == len(calls)
        position = {j.job_id: i for i, j in enumerate(p.jobs)}
        producer = {}
        for j in p.jobs:
            for lfn in j.outputs:
                producer[lfn] = j.job_id
        for j in p.jobs:
            for dep in j.depends_on:
                assert position[dep] < position[j.job_id]
            # depends_on is exactly the set of in-plan producers of the inputs
            expect = {producer[lfn] for lfn in j.inputs if lfn in producer}
            assert set(j.depends_on) == expect
            for lfn in j.inputs:
                assert lfn in producer or lfn in external


def test_planning_is_deterministic():
    rng = random.Random(77)
    for _ in range(20):
        calls, external = random_calls(rng)
        a = plan(calls, have_input=external.__contains__)
        b = plan(calls, have_input=external.__contains__)
        assert a == b
        assert manifest(a) == manifest(b)


# ---------------------------------------------------------------- manifests

def test_manifest_round_trip():
    rng = random.Random(98)
    for _ in range(50):
        calls, external = random_calls(rng)
        p = plan(calls, have_input=external.__contains__)
        text = manifest(p)
        again = parse_manifest(text)
        assert again == Plan(plan_id=p.plan_id, jobs=p.jobs)
        assert manifest(again) == text


def test_manifest_carries_args_and_versions():
    tr = make_tr("fit", 1, 1, scalars=[("lo", ValueType.FLOAT)], version=3)
    p = plan([call(tr, in0="raw", out0="res", lo=0.25)], have_input=lambda _: True)
    text = manifest(p)
    parsed = parse_manifest(text)
    job = parsed.jobs[0]
    assert job.tr_name == "fit"
    assert job.tr_version == 3
    assert job.args == ("--lo=0.25",)
    assert text.endswith("\n")
