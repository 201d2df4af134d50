"""Property suites: symbolic canonical forms, simulator determinism and
depth monotonicity, save/load identity."""

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from _support import SIZE, assert_outputs_close, on_device, prepared
from dfhls import fixtures
from dfhls.ir import load, save, to_dict
from dfhls.library import expand_all
from dfhls.sim import ConcurrentResult, DeadlockReport, run_program_concurrent, run_reference
from dfhls.symbolic import evaluate, parse_expr
from dfhls.transforms import auto_pipeline, streaming_composition

C9 = pytest.mark.criterion(9, "property suites: symbolic, simulator, save/load")

# symbolic ------------------------------------------------------------------

NAMES = ("N", "M", "K", "P")


@st.composite
def polynomials(draw, depth=3):
    """Random integer polynomial as text, built from + - * and parentheses."""
    if depth == 0 or draw(st.integers(0, 3)) == 0:
        return draw(st.one_of(st.sampled_from(NAMES), st.integers(-5, 9).map(str)))
    op = draw(st.sampled_from(["+", "-", "*"]))
    a, b = draw(polynomials(depth - 1)), draw(polynomials(depth - 1))
    return f"({a} {op} {b})"


BINDINGS = [dict(zip(NAMES, v)) for v in np.random.default_rng(9).integers(-20, 21, size=(50, len(NAMES))).tolist()]


def py_eval(text, b):
    return eval(text, {"__builtins__": {}}, dict(b))


@C9
@settings(max_examples=150, deadline=None)
@given(polynomials(), polynomials())
def test_symbolic_equivalence_over_50_bindings(p, q):
    e = parse_expr(p)
    for b in BINDINGS:
        assert evaluate(e, b) == py_eval(p, b)
    # equal polynomials have one canonical form
    assert parse_expr(f"({p}) * ({q})") == parse_expr(f"({q}) * ({p})")
    assert parse_expr(f"({p}) + ({q}) - ({q})") == e
    assert parse_expr(f"({p}) * (({q}) + 1)") == parse_expr(f"({p}) * ({q}) + ({p})")
    assert hash(parse_expr(str(e))) == hash(e)
    assert parse_expr(str(e)) == e


@C9
@settings(max_examples=60, deadline=None)
@given(polynomials(2), st.integers(1, 7))
def test_floor_division_identity(p, d):
    e = parse_expr(f"(({p}) / {d}) * {d} + ({p}) % {d}")
    for b in BINDINGS:
        assert evaluate(e, b) == py_eval(p, b)


# simulator -----------------------------------------------------------------


def _variant(name):
    if name == "axpydot-auto":
        s = auto_pipeline(fixtures.axpydot(), "func-dataflow", 4)[0]
        b = {"N": SIZE, "a": 2}
        return s, b, fixtures.random_inputs(s, b, seed=0)
    if name == "gemver-composed":
        s = streaming_composition(expand_all(on_device(fixtures.gemver()), "func-dataflow")).sdfg
        b = {"N": SIZE}
        return s, b, fixtures.random_inputs(s, b, seed=0)
    return prepared(name)


ALL = sorted(fixtures.FIXTURES) + ["axpydot-auto", "gemver-composed"]


@C9
@pytest.mark.parametrize("name", ALL)
def test_simulation_is_deterministic(name):
    s, b, ins = _variant(name)
    runs = [run_program_concurrent(s, ins, b, default_depth=16) for _ in range(2)]
    assert all(isinstance(r, ConcurrentResult) for r in runs), str(runs[0])
    assert runs[0].trace_lines() == runs[1].trace_lines()
    assert runs[0].peaks == runs[1].peaks and runs[0].steps == runs[1].steps
    for k in runs[0].outputs:
        np.testing.assert_array_equal(runs[0].outputs[k], runs[1].outputs[k])
    assert_outputs_close(run_reference(s, ins, b), runs[0].outputs, rtol=1e-4)


@C9
@pytest.mark.parametrize("name", ALL)
def test_uniform_depth_monotonicity(name):
    s, b, ins = _variant(name)
    done = [not isinstance(run_program_concurrent(s, ins, b, default_depth=d), DeadlockReport) for d in range(1, 17)]
    assert done[-1]
    first = done.index(True)
    assert all(done[first:]), done


@C9
@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
@given(st.integers(1, 6), st.dictionaries(st.sampled_from(["direct", "to_late", "late"]), st.integers(0, 5)))
def test_raising_depths_never_introduces_deadlock(skew, extra):
    s = fixtures.fork_join(N=16, skew=skew)
    ins = {"x": np.arange(16, dtype=np.float32)}
    base = {"direct": skew, "to_late": 1, "late": 1}
    raised = {k: v + extra.get(k, 0) for k, v in base.items()}
    for depths in (base, raised):
        r = run_program_concurrent(s, ins, depth_override=depths)
        assert isinstance(r, ConcurrentResult)
        np.testing.assert_array_equal(r.outputs["y"], 2 * ins["x"])


@C9
@pytest.mark.parametrize("skew", [1, 2, 3, 5])
def test_fork_join_minimal_direct_depth(skew):
    ins = {"x": np.arange(16, dtype=np.float32)}
    late = fixtures.fork_join(N=16, skew=skew)
    assert isinstance(run_program_concurrent(late, ins, depth_override={"direct": skew}), ConcurrentResult)
    if skew > 1:
        r = run_program_concurrent(late, ins, depth_override={"direct": skew - 1})
        assert isinstance(r, DeadlockReport)
    # popping the direct branch first parks one element inside the join
    early = fixtures.fork_join(N=16, skew=skew, late_first=False)
    assert isinstance(run_program_concurrent(early, ins, depth_override={"direct": max(1, skew - 1)}), ConcurrentResult)


# save/load -----------------------------------------------------------------
# conftest checks every graph a test builds; these pin the mechanism itself


@C9
@pytest.mark.parametrize("name", ALL)
def test_save_load_identity(name, tmp_path):
    s, _, _ = _variant(name)
    path = tmp_path / "g.json"
    text = save(s, path)
    again = load(path)
    assert to_dict(again) == to_dict(s)
    assert save(again) == text
    assert again == s
