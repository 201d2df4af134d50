"""Rewrite the systolic GEMM golden sources: ``python3 tests/golden/regenerate.py``."""

import shutil
from pathlib import Path

from dfhls import fixtures
from dfhls.codegen import generate
from dfhls.library import expand_all
from dfhls.transforms import fpga_transform

HERE = Path(__file__).parent

if __name__ == "__main__":
    for dialect, target in (("F", "func-dataflow"), ("K", "kernel-per-pe")):
        s = fixtures.gemm(P=4)
        if not any(d.storage.on_device for d in s.containers.values()):
            s = fpga_transform(s).sdfg
        out = HERE / f"gemm_systolic_{dialect}"
        shutil.rmtree(out, ignore_errors=True)
        for p in generate(expand_all(s, target), dialect).write(out):
            print(f"wrote {p}")
