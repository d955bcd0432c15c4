"""Float and fixed-point reference evaluators over ModelGraph.

The fixed-point evaluator defines the quantized semantics every lowering has
to reproduce exactly. Activations carry a scale; products of two scaled
operands are rescaled back with ties away from zero.
"""

from __future__ import annotations

from typing import Mapping, Optional

import numpy as np

from ..errors import QuantizationOverflowError, ShapeError, UnsupportedOperatorError
from .graph import ModelGraph, Node, _slice_spec, conv_pads, from_json, toposort
from .quant import FLOAT_FNS, apply_table, as_int_array, div_round, quantize, rescale

UNARY_TABLES = {"Relu": "relu", "Tanh": "tanh", "Sigmoid": "sigmoid", "Exp": "exp", "Gelu": "gelu"}


def _axis(a: int, rank: int) -> int:
    return a + rank if a < 0 else a


def _reduce_axes(n: Node, rank: int) -> tuple[int, ...]:
    return tuple(_axis(a, rank) for a in n.attrs.get("axes", range(rank)))


def conv_direct(x: np.ndarray, w: np.ndarray, pads, layout: str = "NCHW") -> np.ndarray:
    """Naive stride-1 convolution; works for float and object (int) arrays."""
    if layout == "NHWC":
        x = x.transpose(0, 3, 1, 2)
    t, l, b, r = pads
    if any(pads):
        N, C, H, W = x.shape
        xp = np.zeros((N, C, H + t + b, W + l + r), dtype=x.dtype)
        if x.dtype == object:
            xp[...] = 0
        xp[:, :, t:t + H, l:l + W] = x
        x = xp
    O, C, kh, kw = w.shape
    N, _, H, W = x.shape
    Ho, Wo = H - kh + 1, W - kw + 1
    out = None
    for p in range(kh):
        for q in range(kw):
            part = np.tensordot(x[:, :, p:p + Ho, q:q + Wo], w[:, :, p, q], axes=([1], [1]))
            out = part if out is None else out + part
    out = out.transpose(0, 3, 1, 2)
    return out.transpose(0, 2, 3, 1) if layout == "NHWC" else out


class _Ctx:
    def __init__(self, g: ModelGraph, s: int):
        self.g, self.s = g, s
        self.vals: dict[str, np.ndarray] = {}
        self.scale: dict[str, int] = {}

    def real_const(self, name: str) -> np.ndarray:
        ini = self.g.initializers[name]
        if ini.scale_bits is not None:
            return np.asarray(ini.data, dtype=np.float64) / float(1 << ini.scale_bits)
        return ini.data

    def const_scale(self, name: str) -> int:
        ini = self.g.initializers[name]
        return self.s if ini.data.dtype.kind == "f" or ini.scale_bits is not None else 0

    def get(self, name: str, scale: Optional[int] = None) -> tuple[np.ndarray, int]:
        if name in self.vals:
            return self.vals[name], self.scale[name]
        if self.g.is_const(name):
            sc = self.const_scale(name) if scale is None else scale
            return quantize(self.real_const(name), sc), sc
        raise ShapeError(f"edge {name} has no value")

    def pair(self, a: str, b: str) -> tuple[np.ndarray, np.ndarray, int]:
        """Two operands at a shared scale (constants adopt the other side's scale)."""
        if self.g.is_const(a) and not self.g.is_const(b):
            y, sc = self.get(b)
            x, _ = self.get(a, sc)
        elif self.g.is_const(b) and not self.g.is_const(a):
            x, sc = self.get(a)
            y, _ = self.get(b, sc)
        else:
            x, sa = self.get(a)
            y, sb = self.get(b)
            if sa != sb:
                raise ShapeError(f"operands {a} and {b} have scales {sa} and {sb}")
            sc = sa
        return x, y, sc


def _product_rescale(acc: np.ndarray, sa: int, sb: int) -> tuple[np.ndarray, int]:
    out = max(sa, sb)
    return rescale(acc, sa + sb - out), out


def _q_node(c: _Ctx, n: Node) -> list[tuple[np.ndarray, int]]:
    op, a = n.op, n.attrs
    I = n.inputs
    if op in ("Add", "Sub"):
        x, y, sc = c.pair(I[0], I[1])
        return [(x + y if op == "Add" else x - y, sc)]
    if op == "Equal":
        x, y, _ = c.pair(I[0], I[1])
        return [(as_int_array((x == y).astype(np.int64)), 0)]
    if op in ("Mul", "And"):
        x, sx = c.get(I[0])
        y, sy = c.get(I[1])
        return [_product_rescale(x * y, sx, sy)]
    if op == "Pow":
        k = int(np.asarray(c.real_const(I[1])).reshape(-1)[0])
        if k < 1:
            raise ShapeError(f"Pow {n.name}: exponent must be a positive integer")
        x, sx = c.get(I[0])
        acc, sc = x, sx
        for _ in range(k - 1):
            acc, sc = _product_rescale(acc * x, sc, sx)
        return [(acc, sc)]
    if op in ("Div", "Mod"):
        x, d, sc = c.pair(I[0], I[1])
        d = np.broadcast_to(d, np.broadcast_shapes(x.shape, d.shape))
        x = np.broadcast_to(x, d.shape)
        if any(int(v) <= 0 for v in d.reshape(-1)):
            raise QuantizationOverflowError(n.outputs[0], "divisor must be positive")
        out = np.empty(d.shape, dtype=object)
        of = out.reshape(-1)
        for i, (u, v) in enumerate(zip(x.reshape(-1), d.reshape(-1))):
            of[i] = div_round(int(u), int(v), sc) if op == "Div" else int(u) % int(v)
        return [(out, sc)]
    if op in UNARY_TABLES:
        x, sx = c.get(I[0])
        spec = {"fn": UNARY_TABLES[op], "s": sx}
        return [(apply_table(spec, x), sx)]
    if op == "GeLU":
        x, sx = c.get(I[0])
        return [(subgraph_eval({**a["table"], "s": sx}, x), sx)]
    if op == "Identity":
        return [c.get(I[0])]
    if op in ("Gemm", "MatMul"):
        x, sx = c.get(I[0])
        w, sw = c.get(I[1])
        if op == "Gemm":
            if a.get("alpha", 1.0) != 1.0 or a.get("beta", 1.0) != 1.0:
                raise ShapeError(f"Gemm {n.name}: alpha/beta must be 1")
            if a.get("transA"):
                x = x.T
            if a.get("transB"):
                w = w.T
        acc = np.matmul(x, w)
        if op == "Gemm" and len(I) > 2 and I[2]:
            bias, _ = c.get(I[2], sx + sw)
            acc = acc + bias
        return [_product_rescale(acc, sx, sw)]
    if op in ("Conv", "CustomConv"):
        x, sx = c.get(I[0])
        w, sw = c.get(I[1])
        layout = "NHWC" if op == "CustomConv" else "NCHW"
        acc = conv_direct(x, w, conv_pads(a), layout)
        if len(I) > 2 and I[2]:
            bias, _ = c.get(I[2], sx + sw)
            acc = acc + (bias.reshape(1, -1, 1, 1) if layout == "NCHW" else bias.reshape(1, 1, 1, -1))
        return [_product_rescale(acc, sx, sw)]
    if op == "Softmax":
        x, sx = c.get(I[0])
        if _axis(a.get("axis", -1), x.ndim) != x.ndim - 1:
            raise ShapeError(f"Softmax {n.name}: only the last axis is supported")
        m = x.max(axis=-1, keepdims=True)
        e = apply_table({"fn": "exp", "s": sx}, x - m)
        tot = e.sum(axis=-1, keepdims=True)
        tot = np.broadcast_to(tot, e.shape)
        out = np.empty(e.shape, dtype=object)
        of = out.reshape(-1)
        for i, (u, v) in enumerate(zip(e.reshape(-1), tot.reshape(-1))):
            of[i] = div_round(int(u), int(v), sx)
        return [(out, sx)]
    if op in _LAYOUT:
        outs, so = _layout(c, n, *c.get(I[0]))
        return [(o, so) for o in outs]
    raise UnsupportedOperatorError(op, n.name)


_LAYOUT = {"Reshape", "Flatten", "Transpose", "ReshapeTrans", "Concat", "Split", "Slice", "MaxPool", "ArgMax",
           "ReduceSum", "ReduceMax"}


def _layout(c, n: Node, x: np.ndarray, sc: int):
    """Ops that only move, select or aggregate values; shared by both evaluators."""
    op, a = n.op, n.attrs
    g = c.g
    if op in ("Reshape", "Flatten", "ReshapeTrans", "Transpose"):
        shape = g.value_info[n.outputs[0]] if op != "Transpose" else None
        if op == "ReshapeTrans":
            return [x.reshape(a["shape"]).transpose(a["perm"])], sc
        if op == "Transpose":
            return [x.transpose(a.get("perm", list(range(x.ndim))[::-1]))], sc
        return [x.reshape(shape)], sc
    if op == "Concat":
        parts = [x] + [c.get(i, sc)[0] for i in n.inputs[1:]]
        return [np.concatenate(parts, axis=a.get("axis", 0))], sc
    if op == "Split":
        ax = _axis(a.get("axis", 0), x.ndim)
        sizes = a.get("split") or [x.shape[ax] // len(n.outputs)] * len(n.outputs)
        cuts = np.cumsum(sizes)[:-1]
        return list(np.split(x, cuts, axis=ax)), sc
    if op == "Slice":
        return [x[_slice_spec(n, x.shape)]], sc
    if op == "MaxPool":
        kh, kw = a["kernel_shape"]
        sh, sw = a.get("strides", [kh, kw])
        N, C, H, W = x.shape
        Ho, Wo = (H - kh) // sh + 1, (W - kw) // sw + 1
        out = np.empty((N, C, Ho, Wo), dtype=x.dtype)
        for i in range(Ho):
            for j in range(Wo):
                out[:, :, i, j] = x[:, :, i * sh:i * sh + kh, j * sw:j * sw + kw].reshape(N, C, -1).max(axis=-1)
        return [out], sc
    keep = bool(a.get("keepdims", 1))
    if op == "ArgMax":
        ax = _axis(a.get("axis", 0), x.ndim)
        idx = np.argmax(x, axis=ax)
        if keep:
            idx = np.expand_dims(idx, ax)
        return [as_int_array(idx) if x.dtype == object else idx.astype(np.float64)], 0
    axes = _reduce_axes(n, x.ndim)
    red = x.sum(axis=axes, keepdims=keep) if op == "ReduceSum" else x.max(axis=axes, keepdims=keep)
    return [np.asarray(red, dtype=x.dtype)], sc


def _f_node(c: _Ctx, n: Node) -> list[np.ndarray]:
    op, a, I = n.op, n.attrs, n.inputs

    def v(k):
        name = I[k]
        return c.vals[name] if name in c.vals else np.asarray(c.real_const(name), dtype=np.float64)

    if op == "Add":
        return [v(0) + v(1)]
    if op == "Sub":
        return [v(0) - v(1)]
    if op in ("Mul", "And"):
        return [v(0) * v(1)]
    if op == "Equal":
        return [(v(0) == v(1)).astype(np.float64)]
    if op == "Div":
        return [v(0) / v(1)]
    if op == "Mod":
        return [np.mod(v(0), v(1))]
    if op == "Pow":
        return [v(0) ** v(1)]
    if op in UNARY_TABLES:
        f = np.vectorize(FLOAT_FNS[UNARY_TABLES[op]], otypes=[np.float64])
        return [f(v(0))]
    if op == "GeLU":
        return [subgraph_eval_float(a["table"], v(0))]
    if op == "Identity":
        return [v(0)]
    if op == "Gemm":
        x, w = v(0), v(1)
        x = x.T if a.get("transA") else x
        w = w.T if a.get("transB") else w
        out = x @ w
        return [out + v(2) if len(I) > 2 and I[2] else out]
    if op == "MatMul":
        return [v(0) @ v(1)]
    if op in ("Conv", "CustomConv"):
        layout = "NHWC" if op == "CustomConv" else "NCHW"
        out = conv_direct(v(0), v(1), conv_pads(a), layout)
        if len(I) > 2 and I[2]:
            b = v(2)
            out = out + (b.reshape(1, -1, 1, 1) if layout == "NCHW" else b.reshape(1, 1, 1, -1))
        return [out]
    if op == "Softmax":
        x = v(0)
        e = np.exp(x - x.max(axis=-1, keepdims=True))
        return [e / e.sum(axis=-1, keepdims=True)]
    if op in _LAYOUT:
        return _layout(c, n, v(0), 0)[0] if op != "Concat" else \
            [np.concatenate([v(k) for k in range(len(I))], axis=a.get("axis", 0))]
    raise UnsupportedOperatorError(op, n.name)


class _FloatCtx(_Ctx):
    def get(self, name, scale=None):
        return (self.vals[name] if name in self.vals else np.asarray(self.real_const(name), np.float64)), 0


def evaluate_float(g: ModelGraph, inputs: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    c = _FloatCtx(g, 0)
    for gi in g.graph_inputs:
        c.vals[gi.name] = np.asarray(inputs[gi.name], dtype=np.float64).reshape(gi.shape)
    for n in toposort(g):
        for o, val in zip(n.outputs, _f_node(c, n)):
            c.vals[o] = np.asarray(val, dtype=np.float64)
    return {o: c.vals[o] if o in c.vals else np.asarray(c.real_const(o)) for o in g.graph_outputs}


def quantize_inputs(g: ModelGraph, inputs: Mapping[str, np.ndarray], s: int) -> dict[str, tuple[np.ndarray, int]]:
    out = {}
    for gi in g.graph_inputs:
        raw = np.asarray(inputs[gi.name]).reshape(gi.shape)
        if gi.dtype in ("bool", "int64", "int32"):
            out[gi.name] = (as_int_array(raw.astype(np.int64)), 0)
        else:
            out[gi.name] = (quantize(raw, s), s)
    return out


def evaluate_quantized(g: ModelGraph, inputs: Mapping[str, np.ndarray], s: int, *, quantized: bool = False,
                       trace: bool = False) -> dict[str, tuple[np.ndarray, int]]:
    """Fixed-point inference. Inputs are real arrays unless ``quantized`` (then (ints, scale) pairs)."""
    c = _Ctx(g, s)
    q = dict(inputs) if quantized else quantize_inputs(g, inputs, s)
    for name, (arr, sc) in q.items():
        c.vals[name], c.scale[name] = as_int_array(arr), sc
    for n in toposort(g):
        for o, (val, sc) in zip(n.outputs, _q_node(c, n)):
            c.vals[o], c.scale[o] = np.asarray(val, dtype=object), sc
    if trace:
        return {k: (c.vals[k], c.scale[k]) for k in c.vals}
    return {o: c.get(o) for o in g.graph_outputs}


def dequantized_outputs(res: Mapping[str, tuple[np.ndarray, int]]) -> dict[str, np.ndarray]:
    return {k: np.asarray(v, dtype=np.float64) / float(1 << sc) for k, (v, sc) in res.items()}


# fused subgraphs (GeLU) ---------------------------------------------------------

_SUBGRAPH_CACHE: dict[str, ModelGraph] = {}


def _subgraph(spec: Mapping) -> ModelGraph:
    import json

    key = json.dumps({k: spec[k] for k in ("model",)}, sort_keys=True)
    g = _SUBGRAPH_CACHE.get(key)
    if g is None:
        g = from_json(spec["model"])
        _SUBGRAPH_CACHE[key] = g
    return g


def _with_shape(g: ModelGraph, shape) -> ModelGraph:
    if g.graph_inputs[0].shape == tuple(shape):
        return g
    g2 = g.copy()
    g2.graph_inputs[0].shape = tuple(shape)
    from .graph import infer_shapes

    return infer_shapes(g2)


def subgraph_eval(spec: Mapping, arr: np.ndarray) -> np.ndarray:
    g = _with_shape(_subgraph(spec), arr.shape)
    name = g.graph_inputs[0].name
    out = evaluate_quantized(g, {name: (as_int_array(arr), spec["s"])}, spec["s"], quantized=True)
    return out[g.graph_outputs[0]][0]


def subgraph_eval_float(spec: Mapping, arr: np.ndarray) -> np.ndarray:
    g = _with_shape(_subgraph(spec), np.shape(arr))
    return evaluate_float(g, {g.graph_inputs[0].name: arr})[g.graph_outputs[0]]


def subgraph_table_fn(spec: Mapping):
    def f(x: int) -> int:
        return int(subgraph_eval(spec, np.array([x], dtype=object))[0])

    return f
