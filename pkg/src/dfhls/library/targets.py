"""Target capability descriptions and the shipped presets."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path
from typing import Union

PE_STYLES = ("FunctionDataflow", "KernelPerPe")
ENV_VAR = "DFHLS_TARGET"
DEFAULT_PRESET = "func-dataflow"


@dataclass(frozen=True)
class TargetCapabilities:
    name: str
    native_f32_accumulation: bool
    native_f64_accumulation: bool
    shift_registers: bool
    pe_style: str

    def __post_init__(self):
        if self.pe_style not in PE_STYLES:
            raise ValueError(f"pe_style must be one of {PE_STYLES}, got '{self.pe_style}'")

    @property
    def dialect(self) -> str:
        return "F" if self.pe_style == "FunctionDataflow" else "K"

    def native_accumulation(self, base: str) -> bool:
        if base == "f32":
            return self.native_f32_accumulation
        if base == "f64":
            return self.native_f64_accumulation
        return True  # integer adds have no loop-carried latency problem

    def as_dict(self):
        return asdict(self)


def preset_names():
    return sorted(p.name[:-5] for p in resources.files(__package__).joinpath("presets").iterdir() if p.name.endswith(".json"))


def _from_doc(doc) -> TargetCapabilities:
    keys = {"name", "native_f32_accumulation", "native_f64_accumulation", "shift_registers", "pe_style"}
    missing = keys - set(doc)
    if missing:
        raise ValueError(f"target description lacks {sorted(missing)}")
    return TargetCapabilities(**{k: doc[k] for k in keys})


def load_target(target: Union[str, Path, None] = None) -> TargetCapabilities:
    """Load a preset by name or a capabilities JSON file by path.

    ``None`` falls back to the ``DFHLS_TARGET`` environment variable, then to
    the function-dataflow preset.
    """
    if isinstance(target, TargetCapabilities):
        return target
    if target is None:
        target = os.environ.get(ENV_VAR, DEFAULT_PRESET)
    target = str(target)
    if target in preset_names():
        text = resources.files(__package__).joinpath("presets", target + ".json").read_text()
        return _from_doc(json.loads(text))
    path = Path(target)
    if path.is_file():
        return _from_doc(json.loads(path.read_text()))
    raise ValueError(f"unknown target '{target}' (presets: {', '.join(preset_names())})")


FUNC_DATAFLOW = load_target("func-dataflow")
KERNEL_PER_PE = load_target("kernel-per-pe")
