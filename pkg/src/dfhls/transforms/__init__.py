"""Graph transformations with pass reports."""

from .base import PassError, PassReport, PassResult
from .constants import input_to_constant
from .fpga import fpga_transform
from .pipeline import PipelineError, auto_pipeline, run_passes
from .streaming import replicate_container, streaming_composition, streaming_memory
from .vectorize import vectorize, vectorize_all


def _auto(s, target=None, W=1):
    out, reports = auto_pipeline(s, target, W)
    applied = [r for r in reports if r.applied]
    sites = [(r.pass_id, str(len(r.sites))) for r in applied]
    return PassResult(out, PassReport("auto", bool(applied), sites, None if applied else "nothing applied"))


def _vectorize(s, container=None, W=2):
    return vectorize(s, container, W) if container else vectorize_all(s, W)


PASSES = {
    "fpga-transform": lambda s: fpga_transform(s),
    "vectorize": _vectorize,
    "streaming-memory": lambda s, container=None: streaming_memory(s, container),
    "streaming-composition": lambda s, container=None: streaming_composition(s, container),
    "replicate": lambda s, container: replicate_container(s, container),
    "input-to-constant": lambda s, container, values: input_to_constant(s, container, values),
    "auto": _auto,
}

__all__ = [
    "PASSES",
    "PassError",
    "PassReport",
    "PassResult",
    "PipelineError",
    "auto_pipeline",
    "fpga_transform",
    "input_to_constant",
    "replicate_container",
    "run_passes",
    "streaming_composition",
    "streaming_memory",
    "vectorize",
    "vectorize_all",
]
