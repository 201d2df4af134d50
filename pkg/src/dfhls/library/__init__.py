"""Library nodes, expansion registry and target descriptions."""

from . import blas, stencil  # noqa: F401  (register expansions)
from .registry import (
    CONNECTORS,
    KINDS,
    REGISTRY,
    Expansion,
    ExpansionContext,
    ExpansionError,
    ExpansionLog,
    check_library_node,
    expand_all,
    expand_node,
    expansions_for,
    select_expansion,
)
from .stencil import OffsetTable, StencilSyntaxError, parse_computation, row_major_strides, stencil_offsets
from .targets import FUNC_DATAFLOW, KERNEL_PER_PE, TargetCapabilities, load_target, preset_names

__all__ = [
    "CONNECTORS",
    "KINDS",
    "REGISTRY",
    "Expansion",
    "ExpansionContext",
    "ExpansionError",
    "ExpansionLog",
    "FUNC_DATAFLOW",
    "KERNEL_PER_PE",
    "OffsetTable",
    "StencilSyntaxError",
    "TargetCapabilities",
    "check_library_node",
    "expand_all",
    "expand_node",
    "expansions_for",
    "load_target",
    "parse_computation",
    "preset_names",
    "row_major_strides",
    "select_expansion",
    "stencil_offsets",
]
