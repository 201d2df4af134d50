"""Source emission in the function-dataflow (F) and kernel-per-PE (K) dialects."""

from .emit import DIALECTS, MANIFEST_VERSION, CodegenError, EmittedProgram, c_type, generate
from .grammar import EmitDiagnostic, EmitSyntaxError, SourceFile, check_emitted, check_pipeline_rule, count_annotations, parse_source

__all__ = [
    "DIALECTS",
    "MANIFEST_VERSION",
    "CodegenError",
    "EmittedProgram",
    "c_type",
    "generate",
    "EmitDiagnostic",
    "EmitSyntaxError",
    "SourceFile",
    "check_emitted",
    "check_pipeline_rule",
    "count_annotations",
    "parse_source",
]
