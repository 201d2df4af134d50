"""Fixture preparation and comparison helpers shared by the test modules."""

import numpy as np

from dfhls import fixtures
from dfhls.library import expand_all
from dfhls.transforms import fpga_transform

# fixture sizes used for simulation; every fixture divides by the systolic P=4
SIZE = 16


def on_device(s):
    if any(d.storage.on_device for d in s.containers.values()):
        return s
    return fpga_transform(s).sdfg


def prepared(name, target="kernel-per-pe"):
    """Fixture ``name`` moved to the device and fully expanded, with a binding and inputs."""
    s = expand_all(on_device(fixtures.build(name)), target)
    binding = {k: SIZE for k in s.symbols if k not in s.constants}
    if name == "axpydot":
        binding["a"] = 2
    return s, binding, fixtures.random_inputs(s, binding, seed=0)


def assert_outputs_close(ref, out, rtol=1e-5, atol=1e-6):
    assert set(ref) <= set(out), f"missing outputs {set(ref) - set(out)}"
    for k, v in ref.items():
        a, b = np.asarray(v), np.asarray(out[k]).reshape(np.shape(v))
        if np.issubdtype(a.dtype, np.integer):
            np.testing.assert_array_equal(b, a, err_msg=k)
        else:
            np.testing.assert_allclose(b, a, rtol=rtol, atol=atol, err_msg=k)
