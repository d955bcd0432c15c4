"""Fixed-point primitives shared by the reference evaluator and the lowering."""

from __future__ import annotations

import math
from typing import Callable, Iterable

import numpy as np

DEFAULT_SCALE_BITS = 10


def round_half_away(x: float) -> int:
    return int(math.floor(abs(x) + 0.5)) * (1 if x >= 0 else -1)


def quantize(x, s: int) -> np.ndarray:
    """round(x * 2^s), ties away from zero, as an object array of Python ints."""
    arr = np.asarray(x, dtype=np.float64)
    flat = [round_half_away(v * (1 << s)) for v in arr.reshape(-1).tolist()]
    return np.array(flat, dtype=object).reshape(arr.shape)


def as_int_array(x) -> np.ndarray:
    arr = np.asarray(x)
    if arr.dtype == object:
        return arr
    return np.array([int(v) for v in arr.reshape(-1).tolist()], dtype=object).reshape(arr.shape)


def rescale_int(v: int, shift: int) -> int:
    """v / 2^shift rounded half away from zero, exactly."""
    if shift == 0:
        return v
    half = 1 << (shift - 1)
    return (abs(v) + half) >> shift if v >= 0 else -((abs(v) + half) >> shift)


def rescale(arr: np.ndarray, shift: int) -> np.ndarray:
    if shift == 0:
        return arr
    out = np.empty(arr.shape, dtype=object)
    flat = arr.reshape(-1)
    of = out.reshape(-1)
    for i, v in enumerate(flat):
        of[i] = rescale_int(int(v), shift)
    return out


def dequantize(arr, s: int) -> np.ndarray:
    return np.asarray(arr, dtype=np.float64) / float(1 << s)


def div_round(x: int, d: int, s: int) -> int:
    """x / d at scale s, rounded half up: floor((2^(s+1) x + d) / 2d); needs d > 0."""
    return ((x << (s + 1)) + d) // (2 * d)


def _gelu_erf(x: float) -> float:
    return 0.5 * x * (1.0 + math.erf(x / math.sqrt(2.0)))


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _exp(x: float) -> float:
    return math.exp(min(x, 700.0))


FLOAT_FNS: dict[str, Callable[[float], float]] = {
    "tanh": math.tanh,
    "sigmoid": _sigmoid,
    "exp": _exp,
    "gelu": _gelu_erf,
    "relu": lambda x: max(0.0, x),
}


def table_fn(spec: dict) -> Callable[[int], int]:
    """Integer map of a table spec; every nonlinearity and rescale goes through here."""
    fn = spec["fn"]
    if fn == "relu":
        return lambda x: x if x > 0 else 0
    if fn == "identity":
        return lambda x: x
    if fn == "eq0":
        return lambda x: 1 if x == 0 else 0
    if fn == "rescale":
        shift, relu = spec["shift"], spec.get("relu", False)
        if relu:
            return lambda x: max(0, rescale_int(x, shift))
        return lambda x: rescale_int(x, shift)
    if fn in ("tanh", "sigmoid", "exp", "gelu"):
        s = spec["s"]
        f = FLOAT_FNS[fn]
        scale = float(1 << s)
        return lambda x: round_half_away(f(x / scale) * scale)
    if fn == "subgraph":
        from .reference import subgraph_table_fn

        return subgraph_table_fn(spec)
    raise ValueError(f"unknown table function {fn!r}")


def apply_table(spec: dict, arr: np.ndarray) -> np.ndarray:
    if spec["fn"] == "subgraph":
        from .reference import subgraph_eval

        return subgraph_eval(spec, arr)
    f = table_fn(spec)
    out = np.empty(arr.shape, dtype=object)
    of, flat = out.reshape(-1), arr.reshape(-1)
    for i, v in enumerate(flat):
        of[i] = f(int(v))
    return out


def bits_for(values: Iterable[int]) -> int:
    m = max((abs(int(v)) for v in values), default=0)
    return max(1, m.bit_length())
