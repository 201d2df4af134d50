from .core import (
    DEFAULT_STREAM_CAPACITY,
    AccessNode,
    CycleError,
    DataDescriptor,
    DataKind,
    Edge,
    ElementType,
    InterstateEdge,
    LibraryNode,
    MapEntry,
    MapExit,
    Memlet,
    NestedSdfg,
    Node,
    Range,
    Schedule,
    Sdfg,
    State,
    StorageKind,
    Tasklet,
    f32,
    f64,
    i32,
    i64,
    parse_subset,
    subset_str,
)
from .serialize import SchemaError, from_dict, load, save, to_dict
from .validate import Diagnostic, is_device_kernel_state, validate
