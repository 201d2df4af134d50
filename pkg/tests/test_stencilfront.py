import copy
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dfhls import fixtures
from dfhls.library import expand_all
from dfhls.sim import ConcurrentResult, DeadlockReport, min_depths_search, run_concurrent, run_reference
from dfhls.stencilfront import (
    SLACK,
    StencilProgramError,
    build_sdfg,
    parse_program,
    plan_delays,
    print_program,
    program_to_dict,
    programs_equal,
)


def three_way(n=16, s=1):
    """Join of three branches whose skews are 0, s and 2s rows."""
    return {
        "dimensions": [n, n],
        "vectorization": 1,
        "outputs": ["join"],
        "inputs": {"a": {"data_type": "float32", "input_dims": ["j", "k"]}},
        "program": {
            "p0": {"data_type": "float32", "boundary": {}, "computation": "p0 = a[j,k]"},
            "p1": {"data_type": "float32", "boundary": {"a": {"type": "constant", "value": 0}}, "computation": f"p1 = a[j,k] + a[j+{s},k]"},
            "p2": {"data_type": "float32", "boundary": {"a": {"type": "constant", "value": 0}}, "computation": f"p2 = a[j,k] + a[j+{2 * s},k]"},
            "join": {"data_type": "float32", "boundary": {}, "computation": "join = p0[j,k] + p1[j,k] + p2[j,k]"},
        },
    }


def identity(n=8, W=2):
    return {
        "dimensions": [n, n],
        "vectorization": W,
        "outputs": ["b"],
        "inputs": {"a": {"data_type": "float32", "input_dims": ["j", "k"]}},
        "program": {"b": {"data_type": "float32", "boundary": {}, "computation": "b = a[j,k]"}},
    }


def stream_caps(s):
    return {n: d.capacity for n, d in s.containers.items() if d.is_stream}


# parsing -------------------------------------------------------------------


def test_parse_diffusion():
    p = parse_program(fixtures.diffusion2d_program(64, 8))
    assert p.shape == (64, 64) and p.W == 8 and p.dims == ("j", "k")
    assert list(p.operators) == ["b", "d"]
    assert p.operators["d"].fields == ["b"]
    assert p.operators["b"].scalars == ["c0", "c1", "c2", "c3", "c4"]


def test_parse_from_text_and_file(tmp_path):
    doc = fixtures.diamond_program()
    path = tmp_path / "p.json"
    path.write_text(json.dumps(doc))
    assert programs_equal(parse_program(path), parse_program(json.dumps(doc)))


def test_print_parse_fixpoint():
    for doc in (fixtures.diffusion2d_program(), fixtures.diamond_program(), three_way()):
        p = parse_program(doc)
        q = parse_program(print_program(p))
        assert programs_equal(p, q)
        assert print_program(q) == print_program(p)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(-2, 2), st.integers(-2, 2)), min_size=1, max_size=6), st.sampled_from([1, 2, 4]))
def test_print_parse_fixpoint_random(offsets, W):
    terms = " + ".join(f"a[j{dj:+d},k{dk:+d}]" for dj, dk in offsets)
    doc = identity(8, W)
    doc["program"]["b"]["computation"] = f"b = {terms}"
    p = parse_program(doc)
    assert programs_equal(parse_program(print_program(p)), p)
    assert program_to_dict(parse_program(program_to_dict(p))) == program_to_dict(p)


def _broken(**changes):
    doc = copy.deepcopy(fixtures.diamond_program())
    for path, value in changes.items():
        d = doc
        keys = path.split("__")
        for k in keys[:-1]:
            d = d[k]
        if value is None:
            del d[keys[-1]]
        else:
            d[keys[-1]] = value
    return doc


@pytest.mark.parametrize(
    "doc,msg",
    [
        (_broken(dimensions=[16, 0]), "positive"),
        (_broken(vectorization=3), "does not divide"),
        (_broken(outputs=["nope"]), "not an operator"),
        (_broken(program__copy__computation="copy = q[j,k]"), "undeclared field 'q'"),
        (_broken(program__copy__computation="copy = a[j*2,k]"), "plus a constant"),
        (_broken(program__smooth__boundary={"a": {"type": "periodic"}}), "unsupported boundary"),
        (_broken(program__copy__boundary={"zz": {"type": "constant", "value": 0}}), "does not read"),
        (_broken(program__copy__computation="copy = out[j,k]"), "cycle"),
        (_broken(inputs__a__input_dims=["j"]), "1 dimensions"),
        (_broken(program=None), "missing 'program'"),
        ("{oops", "invalid JSON"),
    ],
)
def test_parse_errors(doc, msg):
    with pytest.raises(StencilProgramError, match=msg):
        parse_program(doc)


# delay planning ------------------------------------------------------------


def test_chain_has_no_delays():
    plan = plan_delays(parse_program(fixtures.diffusion2d_program(16, 1)))
    assert set(plan.delays.values()) == {0}
    assert plan.skew == {"b": 2 * 16, "d": 2 * 16}


def test_diamond_delays_copy_edge_by_two_rows():
    plan = plan_delays(parse_program(fixtures.diamond_program(16, 1)))
    assert plan.delays[("copy", "out")] == 2 * 16
    assert plan.delays[("smooth", "out")] == 0
    assert plan.capacity("copy", "out") == 32 + SLACK
    assert "copy->out  32  36" in plan.table()


@pytest.mark.parametrize("s", [1, 2])
def test_three_way_join(s):
    plan = plan_delays(parse_program(three_way(16, s)))
    row = 16 * s
    assert [plan.delays[(b, "join")] for b in ("p0", "p1", "p2")] == [2 * row, row, 0]


def test_offsets_outside_domain():
    doc = identity(8, 1)
    doc["program"]["b"]["computation"] = "b = a[j+8,k]"
    with pytest.raises(StencilProgramError, match="outside"):
        plan_delays(parse_program(doc))


def test_plan_must_match_program():
    p = parse_program(fixtures.diamond_program(16, 1))
    with pytest.raises(StencilProgramError, match="does not belong"):
        build_sdfg(p, plan_delays(parse_program(fixtures.diffusion2d_program(16, 1))))
    with pytest.raises(StencilProgramError, match="does not belong"):
        build_sdfg(p, plan_delays(parse_program(fixtures.diamond_program(16, 2))))
    build_sdfg(p, plan_delays(p).zeroed())


def test_zeroed_plan():
    plan = plan_delays(parse_program(fixtures.diamond_program())).zeroed()
    assert set(plan.delays.values()) == {0}
    assert plan.capacity("copy", "out") == SLACK


# construction and simulation -----------------------------------------------


def test_structure():
    s = fixtures.diamond(16, 1)
    st_ = s.state_order()[0]
    assert sorted(n.label for n in st_.nodes_of(__import__("dfhls.ir", fromlist=["LibraryNode"]).LibraryNode)) == ["copy", "out", "smooth"]
    assert stream_caps(s) == {"a_to_copy": 4, "a_to_smooth": 4, "copy_to_out": 36, "out_to_out": 4, "smooth_to_out": 4}


def test_identity_stencil():
    s = build_sdfg(parse_program(identity(8, 2)), target="kernel-per-pe")
    a = np.arange(64, dtype=np.float32).reshape(8, 8)
    np.testing.assert_array_equal(run_reference(s, {"a": a})["b"].reshape(8, 8), a)
    r = run_concurrent(s, None, {"a": a})
    np.testing.assert_array_equal(r.outputs["b"].reshape(8, 8), a)


@pytest.mark.parametrize("target", ["func-dataflow", "kernel-per-pe"])
@pytest.mark.parametrize("doc", [fixtures.diamond_program(16, 1), fixtures.diamond_program(16, 4), three_way(16, 1), fixtures.diffusion2d_program(16, 4)], ids=["diamond", "diamond-W4", "three-way", "diffusion"])
def test_planned_capacities_suffice(target, doc):
    s = build_sdfg(parse_program(doc), target=target)
    a = np.random.default_rng(0).random((16, 16)).astype(np.float32)
    ins = fixtures.random_inputs(s, seed=1)
    ins["a"] = a.reshape(ins["a"].shape)
    r = run_concurrent(s, None, ins)
    assert isinstance(r, ConcurrentResult), str(r)
    ref = run_reference(s, ins)
    for k in ref:
        np.testing.assert_allclose(r.outputs[k], ref[k], rtol=1e-6)


def test_three_way_needs_its_delays():
    s = build_sdfg(parse_program(three_way(16, 1)), plan_delays(parse_program(three_way(16, 1))).zeroed(), target="func-dataflow")
    a = np.ones((16, 16), np.float32)
    assert isinstance(run_concurrent(s, None, {"a": a}), DeadlockReport)


def test_diamond_oracle():
    s = fixtures.diamond(16, 1, "func-dataflow")
    a = np.random.default_rng(2).random((16, 16)).astype(np.float32)
    pad = np.pad(a, 1)
    smooth = 0.2 * (pad[1:-1, 1:-1] + pad[:-2, 1:-1] + pad[2:, 1:-1] + pad[1:-1, :-2] + pad[1:-1, 2:])
    r = run_concurrent(s, None, {"a": a})
    np.testing.assert_allclose(r.outputs["out"].reshape(16, 16), smooth + a, rtol=1e-5)


def test_diamond_minimal_depths():
    s = fixtures.diamond(16, 1, "func-dataflow")
    a = np.ones((16, 16), np.float32)
    got = min_depths_search(s, s.state_order()[0], {"a": a})
    assert got == {"a_to_copy": 1, "a_to_smooth": 1, "copy_to_out": 14, "out_to_out": 1, "smooth_to_out": 1}
    planned = stream_caps(s)
    assert all(planned[k] >= v for k, v in got.items())


@pytest.mark.xfail(
    strict=True,
    reason="the planned delay counts the backward reach of a stencil (2 rows) where one row plus one element "
    "is what the join waits for, and the slack of 4 alone exceeds 2*1+1",
)
def test_planned_capacity_within_twice_minimum():
    s = fixtures.diamond(16, 1, "func-dataflow")
    got = min_depths_search(s, s.state_order()[0], {"a": np.ones((16, 16), np.float32)})
    planned = stream_caps(s)
    assert all(planned[k] <= 2 * v + 1 for k, v in got.items()), (planned, got)
