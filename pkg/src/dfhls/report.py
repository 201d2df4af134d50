"""Delimited tables and figures for volume and simulation reports."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Dict, List, Mapping, Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .analysis import GIB, VolumeReport  # noqa: E402

# no timestamps or version strings, so reruns give identical files
_PNG_META = {"Software": None}


def _style(ax, title: str, ylabel: str):
    ax.set_title(title, fontsize=10)
    ax.set_ylabel(ylabel)
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    ax.grid(axis="y", alpha=0.3)


def write_csv(path: Path, header: List[str], rows: List[list]) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def volume_rows(rep: VolumeReport) -> List[list]:
    return [[n, c.storage, c.read_value, c.write_value] for n, c in sorted(rep.containers.items())]


def write_volume_report(rep: VolumeReport, out_dir, stem: str = "volume") -> List[Path]:
    """``<stem>.csv`` with per-container bytes and ``<stem>.png`` as stacked bars in GiB."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = volume_rows(rep)
    paths = [write_csv(out / f"{stem}.csv", ["container", "storage", "read_bytes", "write_bytes"], rows)]
    bounded = [r for r in rows if r[2] is not None and r[3] is not None]
    fig, ax = plt.subplots(figsize=(max(4.0, 0.6 * len(bounded) + 2), 3.2))
    names = [r[0] for r in bounded]
    reads = [r[2] / GIB for r in bounded]
    writes = [r[3] / GIB for r in bounded]
    ax.bar(names, reads, label="read", color="#4c72b0")
    ax.bar(names, writes, bottom=reads, label="written", color="#dd8452")
    total = rep.total_gib
    _style(ax, f"off-chip volume, total {total:.3f} GiB" if total is not None else "off-chip volume", "GiB")
    ax.tick_params(axis="x", rotation=45, labelsize=8)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    png = out / f"{stem}.png"
    fig.savefig(png, dpi=100, metadata=_PNG_META)
    plt.close(fig)
    return paths + [png]


def stream_rows(peaks: Mapping[str, int], capacities: Mapping[str, int], pushes: Mapping[str, int]) -> List[list]:
    return [[k, capacities.get(k), peaks[k], pushes.get(k, 0)] for k in sorted(peaks)]


def write_stream_report(peaks: Mapping[str, int], capacities: Mapping[str, int], pushes: Mapping[str, int], out_dir, stem: str = "fifos") -> List[Path]:
    """``<stem>.csv`` and a bar figure of peak FIFO occupancy against capacity."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = stream_rows(peaks, capacities, pushes)
    paths = [write_csv(out / f"{stem}.csv", ["stream", "capacity", "peak", "pushes"], rows)]
    fig, ax = plt.subplots(figsize=(max(4.0, 0.5 * len(rows) + 2), 3.2))
    names = [r[0] for r in rows]
    x = range(len(rows))
    ax.bar([i - 0.2 for i in x], [r[1] or 0 for r in rows], width=0.4, label="capacity", color="#bbbbbb")
    ax.bar([i + 0.2 for i in x], [r[2] for r in rows], width=0.4, label="peak", color="#4c72b0")
    ax.set_xticks(list(x))
    ax.set_xticklabels(names, rotation=45, ha="right", fontsize=8)
    _style(ax, "FIFO occupancy", "elements")
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    png = out / f"{stem}.png"
    fig.savefig(png, dpi=100, metadata=_PNG_META)
    plt.close(fig)
    return paths + [png]


def capacities_of(s, depth_override: Optional[Dict[str, int]] = None) -> Dict[str, int]:
    """Capacity of every stream slot label as the simulator names them."""
    from .symbolic import evaluate

    out = {}
    env = dict(s.constants)
    for n, d in s.containers.items():
        if not d.is_stream:
            continue
        cap = (depth_override or {}).get(n, d.capacity or 4)
        if not d.shape:
            out[n] = cap
            continue
        try:
            extent = evaluate(d.shape[0], env) if len(d.shape) == 1 else None
        except KeyError:
            extent = None
        if extent is None:
            continue
        for i in range(extent):
            out[f"{n}[{i}]"] = (depth_override or {}).get(f"{n}[{i}]", cap)
    return out
