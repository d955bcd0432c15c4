"""Small model graphs used by tests, the acceptance run and the CLI examples."""

from __future__ import annotations

import base64
import math
from typing import Optional, Sequence

import numpy as np

from .compiler.graph import ModelGraph, from_json


def tensor(arr, dtype: str = "float32") -> dict:
    a = np.asarray(arr)
    np_dtype = {"float32": "<f4", "int64": "<i8"}[dtype]
    return {"shape": list(a.shape), "data_b64": base64.b64encode(a.astype(np_dtype).tobytes()).decode(),
            "dtype": dtype}


def node(op: str, name: str, inputs: Sequence[str], outputs: Sequence[str], **attrs) -> dict:
    return {"op": op, "name": name, "inputs": list(inputs), "outputs": list(outputs), "attrs": attrs}


def model(nodes, inits, inputs, outputs) -> ModelGraph:
    return from_json({"nodes": nodes, "initializers": inits, "graph_inputs": inputs, "graph_outputs": outputs})


def gin(name: str, shape, lo: float = -1.0, hi: float = 1.0, dtype: str = "float32") -> dict:
    return {"name": name, "shape": list(shape), "range": [lo, hi], "dtype": dtype}


def gelu_json(width: int = 8, lo: float = -2.0, hi: float = 2.0) -> dict:
    """x -> 0.5 * x * (1 + tanh(sqrt(2/pi) * (x + 0.044715 x^3))) as eight arithmetic nodes."""
    inits = {"three": tensor(3.0), "a": tensor(0.044715), "b": tensor(math.sqrt(2 / math.pi)),
             "one": tensor(1.0), "half": tensor(0.5)}
    nodes = [
        node("Pow", "pow", ["x", "three"], ["x3"]),
        node("Mul", "mul_a", ["x3", "a"], ["ax3"]),
        node("Add", "add_x", ["x", "ax3"], ["inner"]),
        node("Mul", "mul_b", ["inner", "b"], ["arg"]),
        node("Tanh", "tanh", ["arg"], ["t"]),
        node("Add", "add_one", ["t", "one"], ["t1"]),
        node("Mul", "mul_x", ["x", "t1"], ["xt"]),
        node("Mul", "mul_half", ["xt", "half"], ["y"]),
    ]
    return {"nodes": nodes, "initializers": inits, "graph_inputs": [gin("x", [1, width], lo, hi)],
            "graph_outputs": ["y"]}


def gelu_fixture(width: int = 8, lo: float = -2.0, hi: float = 2.0) -> ModelGraph:
    return from_json(gelu_json(width, lo, hi))


def _weights(rng, shape, scale):
    return rng.uniform(-scale, scale, size=shape).astype(np.float32)


def mlp_json(seed: int = 0, sizes=(16, 16, 4), wscale: float = 0.25) -> dict:
    rng = np.random.default_rng(seed)
    nodes, inits = [], {}
    cur = "x"
    for k in range(len(sizes) - 1):
        w, b = f"w{k}", f"b{k}"
        inits[w] = tensor(_weights(rng, (sizes[k + 1], sizes[k]), wscale))
        inits[b] = tensor(_weights(rng, (sizes[k + 1],), 0.1))
        out = f"h{k}" if k < len(sizes) - 2 else "y"
        nodes.append(node("Gemm", f"fc{k}", [cur, w, b], [f"z{k}" if out != "y" else "y"], transB=1))
        if out != "y":
            nodes.append(node("Relu", f"relu{k}", [f"z{k}"], [out]))
        cur = out
    return {"nodes": nodes, "initializers": inits, "graph_inputs": [gin("x", [1, sizes[0]])],
            "graph_outputs": ["y"]}


def mlp_fixture(seed: int = 0, sizes=(16, 16, 4)) -> ModelGraph:
    return from_json(mlp_json(seed, sizes))


def cnn_json(seed: int = 0, channels=(1, 2, 4), hw: int = 8, wscale: float = 0.3) -> dict:
    rng = np.random.default_rng(seed)
    nodes, inits = [], {}
    cur = "x"
    for k in range(len(channels) - 1):
        w, b = f"k{k}", f"kb{k}"
        inits[w] = tensor(_weights(rng, (channels[k + 1], channels[k], 3, 3), wscale))
        inits[b] = tensor(_weights(rng, (channels[k + 1],), 0.1))
        nodes.append(node("Conv", f"conv{k}", [cur, w, b], [f"c{k}"]))
        nodes.append(node("Relu", f"relu{k}", [f"c{k}"], [f"r{k}"]))
        cur = f"r{k}"
    nodes.append(node("ArgMax", "argmax", [cur], ["y"], axis=1, keepdims=1))
    return {"nodes": nodes, "initializers": inits, "graph_inputs": [gin("x", [1, channels[0], hw, hw])],
            "graph_outputs": ["y"]}


def cnn_fixture(seed: int = 0) -> ModelGraph:
    return from_json(cnn_json(seed))


def conv_reshape_transpose_json(seed: int = 0) -> dict:
    rng = np.random.default_rng(seed)
    inits = {"k": tensor(_weights(rng, (2, 1, 1, 1), 0.5)), "shape": tensor(np.array([1, 2, 8, 2]), "int64")}
    nodes = [
        node("Conv", "conv", ["x", "k"], ["c"]),
        node("Reshape", "reshape", ["c", "shape"], ["r"]),
        node("Transpose", "transpose", ["r"], ["y"], perm=[0, 1, 3, 2]),
    ]
    return {"nodes": nodes, "initializers": inits, "graph_inputs": [gin("x", [1, 1, 4, 4])],
            "graph_outputs": ["y"]}


def softmax_json(width: int = 4) -> dict:
    return {"nodes": [node("Softmax", "softmax", ["x"], ["y"], axis=-1)], "initializers": {},
            "graph_inputs": [gin("x", [1, width], -2.0, 2.0)], "graph_outputs": ["y"]}


def lstm_json() -> dict:
    return {"nodes": [node("LSTM", "lstm0", ["x"], ["y"]), node("Relu", "relu", ["y"], ["z"])],
            "initializers": {}, "graph_inputs": [gin("x", [1, 4])], "graph_outputs": ["z"]}


def single_op_json(op: str, n_inputs: int, shape, consts: Optional[dict] = None, lo: float = -1.0,
                   hi: float = 1.0, dtype: str = "float32", **attrs) -> dict:
    names = [f"x{i}" for i in range(n_inputs)]
    inits = {k: tensor(v) for k, v in (consts or {}).items()}
    return {"nodes": [node(op, op.lower(), names + list(inits), ["y"], **attrs)], "initializers": inits,
            "graph_inputs": [gin(nm, shape, lo, hi, dtype) for nm in names], "graph_outputs": ["y"]}


def random_inputs(g: ModelGraph, rng: np.random.Generator) -> dict[str, np.ndarray]:
    out = {}
    for gi in g.graph_inputs:
        if gi.dtype == "bool":
            out[gi.name] = rng.integers(0, 2, size=gi.shape)
        else:
            out[gi.name] = rng.uniform(gi.range[0], gi.range[1], size=gi.shape)
    return out
