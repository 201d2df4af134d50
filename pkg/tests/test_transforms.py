import numpy as np
import pytest

from _support import assert_outputs_close
from dfhls import fixtures
from dfhls.analysis import connected_components
from dfhls.ir import StorageKind, validate
from dfhls.ir.validate import errors
from dfhls.library import expand_all
from dfhls.sim import run_reference
from dfhls.transforms import (
    PASSES,
    PassError,
    PipelineError,
    auto_pipeline,
    fpga_transform,
    input_to_constant,
    replicate_container,
    run_passes,
    streaming_composition,
    streaming_memory,
    vectorize,
    vectorize_all,
)


@pytest.fixture
def axpydot_device():
    return fpga_transform(fixtures.axpydot()).sdfg


def test_fpga_transform_adds_copy_states():
    s = fixtures.axpydot()
    out, rep = fpga_transform(s)
    assert rep.applied
    assert [st.name for st in out.state_order()] == ["pre_axpydot", "axpydot", "post_axpydot"]
    assert out.containers["fpga_x"].storage is StorageKind.DeviceDram
    # the input graph is left alone
    assert all(d.storage is not StorageKind.DeviceDram for d in s.containers.values())
    assert errors(validate(out)) == []


def test_fpga_transform_is_idempotent(axpydot_device):
    _, rep = fpga_transform(axpydot_device)
    assert not rep.applied and "already present" in rep.reason


def test_vectorize_divisibility():
    g = fpga_transform(fixtures.axpydot(N=10)).sdfg
    rep = vectorize(g, "fpga_x", 4).report
    assert not rep.applied and "not divisible" in rep.reason
    assert vectorize(g, "fpga_x", 2).report.applied


def test_vectorize_rejects_bad_requests(axpydot_device):
    with pytest.raises(PassError):
        vectorize(axpydot_device, "fpga_x", 0)
    with pytest.raises(PassError, match="unknown container"):
        vectorize(axpydot_device, "nope", 2)
    assert not vectorize_all(axpydot_device, 1).report.applied


def test_vectorize_shapes(axpydot_device):
    out = vectorize_all(axpydot_device, 4).sdfg
    d = out.containers["fpga_x"]
    assert d.element.width == 4
    assert str(d.shape[0]) == "N/4"


def test_streaming_memory_needs_tasklet_endpoints(axpydot_device):
    rep = streaming_memory(axpydot_device).report
    assert not rep.applied and "not a tasklet" in rep.reason


def test_streaming_memory_adds_reader_pes(axpydot_device):
    e = expand_all(axpydot_device, "func-dataflow")
    st = e.states["axpydot"]
    before = len(connected_components(st, e))
    out, rep = streaming_memory(e)
    assert rep.applied
    assert {c for _, c in rep.sites} == {"fpga_x_in", "fpga_y_in", "fpga_w_in"}
    assert len(connected_components(out.states["axpydot"], out)) == before + 3


def test_streaming_composition_turns_transient_into_stream(axpydot_device):
    e = expand_all(axpydot_device, "func-dataflow")
    out, rep = streaming_composition(e)
    assert rep.applied and rep.sites == [("axpydot", "z")]
    assert out.containers["z"].is_stream


def test_replicate_container():
    f = fpga_transform(fixtures.gemver()).sdfg
    with pytest.raises(PassError, match="unknown container"):
        replicate_container(f, "nope")
    assert not replicate_container(fpga_transform(fixtures.axpydot()).sdfg, "fpga_x").report.applied
    out, rep = replicate_container(f, "fpga_B")
    assert rep.applied
    assert len(out.containers) > len(f.containers)


def test_input_to_constant_refusals():
    d = fixtures.dense_layer()
    rep = input_to_constant(d, "out", [1, 2, 3]).report
    assert not rep.applied and "written" in rep.reason
    with pytest.raises(PassError, match="12 values"):
        input_to_constant(d, "Wt", [1, 2])


def test_input_to_constant_folds_values():
    d = fixtures.dense_layer(4, 3)
    w = np.arange(12, dtype=np.float32).reshape(3, 4)
    out = input_to_constant(d, "Wt", w).sdfg
    ins = {"x": np.ones(4, np.float32), "bias": np.zeros(3, np.float32), "Wt": w}
    np.testing.assert_allclose(run_reference(out, ins)["out"], w.sum(axis=1))


def test_run_passes_order_and_unknown():
    s = fixtures.axpydot()
    out, reps = run_passes(s, ["fpga-transform", "vectorize"], {"vectorize": {"W": 2}})
    assert [r.pass_id for r in reps] == ["fpga-transform", "vectorize"]
    assert all(r.applied for r in reps)
    with pytest.raises(PassError, match="unknown pass 'bogus'"):
        run_passes(s, ["bogus"])
    assert "auto" in PASSES


@pytest.mark.parametrize("target", ["func-dataflow", "kernel-per-pe"])
@pytest.mark.parametrize("W", [1, 2, 4])
def test_auto_pipeline_preserves_axpydot(target, W):
    s = fixtures.axpydot()
    rng = np.random.default_rng(W)
    ins = {k: rng.uniform(-1, 1, 16).astype(np.float32) for k in "xyw"}
    b = {"N": 16, "a": 2}
    out, reps = auto_pipeline(s, target, W)
    assert [r.pass_id for r in reps] == ["fpga-transform", "vectorize", "expand", "streaming_memory", "streaming_composition"]
    assert_outputs_close(run_reference(s, ins, b), run_reference(out, ins, b), rtol=1e-4)


def test_pipeline_error_keeps_partial_reports():
    s = fixtures.axpydot()
    with pytest.raises(PipelineError) as exc:
        auto_pipeline(s, "no-such-target", 2)
    assert [r.pass_id for r in exc.value.reports] == ["fpga-transform", "vectorize"]


def test_report_rendering():
    rep = fpga_transform(fixtures.axpydot()).report
    assert str(rep).startswith("fpga-transform: applied at")
    assert rep.as_dict()["pass"] == "fpga-transform"
