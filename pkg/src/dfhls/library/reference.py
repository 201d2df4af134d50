"""Direct numpy semantics for every library node kind."""

from __future__ import annotations

from typing import Dict

import numpy as np

from ..symbolic import evaluate, parse_expr
from .stencil import parse_computation


def _scale(node, key, env, default=1):
    v = node.attrs.get(key, default)
    if isinstance(v, str):
        return env[v]
    return v


def _dims(s, node, conn, arr, keys, env):
    """Matrix extents from the attribute names in ``keys`` or the array itself."""
    if all(k in node.attrs for k in keys):
        return tuple(int(evaluate(parse_expr(str(node.attrs[k])), env)) for k in keys)
    if arr.ndim == 2:
        return arr.shape
    raise ValueError(f"'{node.label}': cannot infer the shape of '{conn}'")


def _dtype(*arrs):
    return np.result_type(*arrs)


def execute(s, node, inputs: Dict[str, np.ndarray], env) -> Dict[str, np.ndarray]:
    k = node.kind
    if k == "Axpy":
        x, y = np.ravel(inputs["x"]), np.ravel(inputs["y"])
        a = _scale(node, "alpha", env)
        return {"z": (a * x + y).astype(_dtype(x, y))}
    if k == "Dot":
        x, y = np.ravel(inputs["x"]), np.ravel(inputs["y"])
        return {"r": np.array([np.sum(x * y, dtype=_dtype(x, y))])}
    if k == "Gemv":
        rows, cols = _dims(s, node, "A", inputs["A"], ("rows", "cols"), env)
        A = np.reshape(inputs["A"], (rows, cols))
        x = np.ravel(inputs["x"])
        y = A.T @ x if node.attrs.get("transposed") else A @ x
        return {"y": (_scale(node, "alpha", env) * y).astype(A.dtype)}
    if k == "Ger":
        rows, cols = _dims(s, node, "A", inputs["A"], ("rows", "cols"), env)
        A = np.reshape(inputs["A"], (rows, cols))
        x, y = np.ravel(inputs["x"]), np.ravel(inputs["y"])
        return {"A_out": (A + _scale(node, "alpha", env) * np.outer(x, y)).astype(A.dtype)}
    if k == "Gemm":
        A = np.asarray(inputs["A"])
        B = np.asarray(inputs["B"])
        if A.ndim != 2 or B.ndim != 2:
            N, K = _dims(s, node, "A", A, ("N", "K"), env)
            M = int(evaluate(parse_expr(str(node.attrs["M"])), env))
            A, B = A.reshape(N, K), B.reshape(K, M)
        return {"C": (A @ B).astype(A.dtype)}
    if k == "MatMul":
        A, B = np.asarray(inputs["A"]), np.asarray(inputs["B"])
        if (A.ndim, B.ndim) not in ((2, 2), (2, 1), (1, 1)):
            raise ValueError(f"MatMul '{node.label}': unsupported ranks {A.ndim}-D x {B.ndim}-D")
        out = A @ B
        return {"C": np.atleast_1d(out).astype(A.dtype)}
    if k == "Stencil":
        return {node.outputs[0]: stencil_reference(node.attrs, inputs)}
    raise ValueError(f"no reference semantics for library kind '{k}'")


def stencil_reference(attrs, inputs) -> np.ndarray:
    """Evaluate a stencil with constant boundaries over the whole domain."""
    shape = tuple(int(x) for x in attrs["shape"])
    dims = attrs.get("dims") or [f"d{i}" for i in range(len(shape))]
    comp = parse_computation(attrs["computation"], dims)
    boundary = attrs.get("boundary") or {}
    fields = {f: np.reshape(np.asarray(inputs[f]), shape) for f in comp.accesses}
    dtype = np.result_type(*fields.values()) if fields else np.float32
    names = {}

    def shifted(f, off):
        key = f"__{f}_{len(names)}"
        arr = fields[f]
        fill = float((boundary.get(f) or {}).get("value", 0))
        out = np.full(shape, fill, dtype=arr.dtype)
        dst, src = [], []
        for o, n in zip(off, shape):
            dst.append(slice(max(0, -o), min(n, n - o)))
            src.append(slice(max(0, o), min(n, n + o)))
        out[tuple(dst)] = arr[tuple(src)]
        names[key] = out
        return key

    scalars = {n: np.asarray(inputs[n]).reshape(()).item() for n in comp.scalars}
    text = comp.render(shifted, lambda n: n)
    val = eval(compile(text, "<stencil>", "eval"), {"__builtins__": {}, "min": np.minimum, "max": np.maximum, "abs": np.abs}, {**names, **scalars})
    return np.broadcast_to(np.asarray(val, dtype=dtype), shape).reshape(-1)
