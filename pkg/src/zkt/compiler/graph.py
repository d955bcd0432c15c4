"""Model graph IR, JSON interchange and shape inference.

The interchange format is a JSON object with ``nodes`` (op, name, inputs,
outputs, attrs), ``initializers`` (name -> {shape, data_b64, scale_bits?,
dtype?}), ``graph_inputs`` (list of {name, shape, range?, dtype?}) and
``graph_outputs`` (names). Tensor data is little-endian float32 unless
``dtype`` says otherwise.
"""

from __future__ import annotations

import base64
import copy
import json
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

from ..errors import FormatError, GraphError, ShapeError, UnsupportedOperatorError

# ops accepted on input, plus the fused ops the rewrite rules emit
SOURCE_OPS = frozenset({
    "Gemm", "MatMul", "Conv", "Add", "Sub", "Mul", "Div", "Mod", "And", "Equal", "Relu", "Gelu", "Tanh",
    "Sigmoid", "Exp", "Softmax", "Reshape", "Transpose", "Concat", "Split", "Slice", "MaxPool", "ArgMax",
    "ReduceSum", "ReduceMax", "Pow", "Flatten", "Identity",
})
FUSED_OPS = frozenset({"GeLU", "ReshapeTrans", "CustomConv"})
KNOWN_OPS = SOURCE_OPS | FUSED_OPS

_DTYPES = {"float32": np.float32, "float64": np.float64, "int64": np.int64, "int32": np.int32, "bool": np.bool_}


@dataclass
class Node:
    op: str
    name: str
    inputs: list[str]
    outputs: list[str]
    attrs: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"op": self.op, "name": self.name, "inputs": list(self.inputs), "outputs": list(self.outputs),
                "attrs": _jsonable(self.attrs)}


@dataclass
class Initializer:
    data: np.ndarray
    scale_bits: Optional[int] = None

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)


@dataclass
class GraphInput:
    name: str
    shape: tuple[int, ...]
    range: tuple[float, float] = (-1.0, 1.0)
    dtype: str = "float32"


@dataclass
class ModelGraph:
    nodes: list[Node] = field(default_factory=list)
    initializers: dict[str, Initializer] = field(default_factory=dict)
    graph_inputs: list[GraphInput] = field(default_factory=list)
    graph_outputs: list[str] = field(default_factory=list)
    value_info: dict[str, tuple[int, ...]] = field(default_factory=dict)

    def copy(self) -> "ModelGraph":
        return copy.deepcopy(self)

    def producer(self) -> dict[str, Node]:
        return {o: n for n in self.nodes for o in n.outputs}

    def consumers(self) -> dict[str, list[Node]]:
        out: dict[str, list[Node]] = {}
        for n in self.nodes:
            for i in n.inputs:
                out.setdefault(i, []).append(n)
        return out

    def is_const(self, name: str) -> bool:
        return name in self.initializers

    def const(self, name: str) -> np.ndarray:
        return self.initializers[name].data

    def shape(self, name: str) -> tuple[int, ...]:
        if name in self.initializers:
            return self.initializers[name].shape
        return self.value_info[name]

    def op_counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for n in self.nodes:
            out[n.op] = out.get(n.op, 0) + 1
        return out

    def fresh_name(self, base: str) -> str:
        used = {n.name for n in self.nodes} | set(self.value_info) | set(self.initializers)
        used |= {i.name for i in self.graph_inputs}
        k = 0
        while f"{base}_{k}" in used:
            k += 1
        return f"{base}_{k}"

    def to_json(self) -> dict:
        inits = {}
        for name, ini in self.initializers.items():
            arr = ini.data
            dt = "float32" if arr.dtype.kind == "f" else str(arr.dtype)
            raw = np.ascontiguousarray(arr.astype(_DTYPES.get(dt, np.float32))).astype("<" + arr.dtype.str[1:]
                                                                                        if arr.dtype.kind != "b"
                                                                                        else "|b1")
            if arr.dtype.kind == "f":
                raw = np.ascontiguousarray(arr, dtype="<f4")
            entry = {"shape": list(arr.shape), "data_b64": base64.b64encode(raw.tobytes()).decode(), "dtype": dt}
            if ini.scale_bits is not None:
                entry["scale_bits"] = ini.scale_bits
            inits[name] = entry
        return {
            "nodes": [n.to_json() for n in self.nodes],
            "initializers": inits,
            "graph_inputs": [{"name": i.name, "shape": list(i.shape), "range": list(i.range), "dtype": i.dtype}
                             for i in self.graph_inputs],
            "graph_outputs": list(self.graph_outputs),
        }


def _jsonable(v: Any):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    return v


def _decode_init(name: str, d: dict) -> Initializer:
    try:
        shape = tuple(int(s) for s in d["shape"])
        dt = d.get("dtype", "float32")
        dtype = np.dtype(_DTYPES[dt]).newbyteorder("<") if dt != "bool" else np.dtype(np.bool_)
        raw = base64.b64decode(d["data_b64"], validate=True)
        arr = np.frombuffer(raw, dtype=dtype).copy()
        want = int(np.prod(shape)) if shape else 1
        if arr.size != want:
            raise FormatError(f"initializer {name}: {arr.size} values for shape {shape}")
        arr = arr.reshape(shape)
        if arr.dtype.kind == "f":
            arr = arr.astype(np.float64)
        sb = d.get("scale_bits")
        return Initializer(arr, None if sb is None else int(sb))
    except (KeyError, ValueError, TypeError) as exc:
        raise FormatError(f"bad initializer {name}: {exc}") from None


def from_json(obj: dict) -> ModelGraph:
    if not isinstance(obj, dict):
        raise FormatError("model file must be a JSON object")
    try:
        nodes = [Node(str(n["op"]), str(n.get("name") or f"node{k}"), [str(x) for x in n.get("inputs", [])],
                      [str(x) for x in n.get("outputs", [])], dict(n.get("attrs") or {}))
                 for k, n in enumerate(obj.get("nodes", []))]
        inits = {str(k): _decode_init(k, v) for k, v in (obj.get("initializers") or {}).items()}
        gins = []
        for gi in obj.get("graph_inputs", []):
            if isinstance(gi, str):
                raise FormatError(f"graph input {gi} needs a shape")
            rng = gi.get("range", (-1.0, 1.0))
            gins.append(GraphInput(str(gi["name"]), tuple(int(s) for s in gi["shape"]),
                                   (float(rng[0]), float(rng[1])), str(gi.get("dtype", "float32"))))
        gouts = [str(x) for x in obj.get("graph_outputs", [])]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed model: {exc}") from None
    g = ModelGraph(nodes, inits, gins, gouts)
    validate(g)
    infer_shapes(g)
    return g


def load_model(path) -> ModelGraph:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from None
    return from_json(obj)


def save_model(g: ModelGraph, path) -> None:
    from ..fileio import atomic_write

    atomic_write(path, json.dumps(g.to_json(), indent=1).encode())


def unsupported_nodes(g: ModelGraph) -> list[Node]:
    return [n for n in g.nodes if n.op not in KNOWN_OPS]


def validate(g: ModelGraph) -> None:
    bad = unsupported_nodes(g)
    if bad:
        raise UnsupportedOperatorError(bad[0].op, bad[0].name,
                                       [f"{n.name} ({n.op})" for n in bad])
    toposort(g)


def toposort(g: ModelGraph) -> list[Node]:
    """Topological order; raises FormatError on cycles or dangling edges."""
    avail = {i.name for i in g.graph_inputs} | set(g.initializers)
    prod = {}
    for n in g.nodes:
        for o in n.outputs:
            if o in prod or o in avail:
                raise FormatError(f"edge {o} has more than one producer")
            prod[o] = n
    for n in g.nodes:
        for i in n.inputs:
            if i and i not in avail and i not in prod:
                raise FormatError(f"node {n.name} reads undefined edge {i}")
    order: list[Node] = []
    state: dict[int, int] = {}
    index = {id(n): n for n in g.nodes}

    def visit(n: Node):
        st = state.get(id(n), 0)
        if st == 2:
            return
        if st == 1:
            raise FormatError(f"graph has a cycle through node {n.name}")
        state[id(n)] = 1
        stack = [(n, iter(n.inputs))]
        while stack:
            cur, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                state[id(cur)] = 2
                order.append(cur)
                stack.pop()
                continue
            p = prod.get(nxt)
            if p is None:
                continue
            s = state.get(id(p), 0)
            if s == 1:
                raise FormatError(f"graph has a cycle through node {p.name}")
            if s == 0:
                state[id(p)] = 1
                stack.append((p, iter(p.inputs)))

    for n in g.nodes:
        visit(n)
    del index
    return order


# shape inference --------------------------------------------------------------

def _broadcast(a: Sequence[int], b: Sequence[int]) -> tuple[int, ...]:
    try:
        return tuple(np.broadcast_shapes(tuple(a), tuple(b)))
    except ValueError:
        raise ShapeError(f"shapes {tuple(a)} and {tuple(b)} do not broadcast") from None


def _axis(a: int, rank: int) -> int:
    return a + rank if a < 0 else a


def reshape_target(g: ModelGraph, n: Node, src: tuple[int, ...]) -> tuple[int, ...]:
    if "shape" in n.attrs:
        target = list(n.attrs["shape"])
    elif len(n.inputs) > 1 and g.is_const(n.inputs[1]):
        target = [int(v) for v in g.const(n.inputs[1]).reshape(-1)]
    else:
        raise ShapeError(f"Reshape {n.name}: target shape must be static")
    target = [src[k] if v == 0 else v for k, v in enumerate(target)]
    total = int(np.prod(src))
    if -1 in target:
        known = int(np.prod([v for v in target if v != -1]))
        target[target.index(-1)] = total // known if known else 0
    if int(np.prod(target)) != total:
        raise ShapeError(f"Reshape {n.name}: cannot view {src} as {tuple(target)}")
    return tuple(int(v) for v in target)


def conv_out_shape(x: Sequence[int], w: Sequence[int], pads: Sequence[int], layout: str = "NCHW") -> tuple[int, ...]:
    O, C, kh, kw = w
    if layout == "NCHW":
        N, Cx, H, W = x
    else:
        N, H, W, Cx = x
    if Cx != C:
        raise ShapeError(f"conv expects {C} input channels, got {Cx}")
    t, l, b, r = pads
    Ho, Wo = H + t + b - kh + 1, W + l + r - kw + 1
    if Ho < 1 or Wo < 1:
        raise ShapeError("conv kernel larger than padded input")
    return (N, O, Ho, Wo) if layout == "NCHW" else (N, Ho, Wo, O)


def conv_pads(attrs: dict) -> tuple[int, int, int, int]:
    p = list(attrs.get("pads", [0, 0, 0, 0]))
    if len(p) == 2:
        p = [p[0], p[1], p[0], p[1]]
    # ONNX order is (top, left, bottom, right)
    return tuple(int(v) for v in p)


def _slice_spec(n: Node, shape: tuple[int, ...]):
    starts, ends = list(n.attrs["starts"]), list(n.attrs["ends"])
    axes = list(n.attrs.get("axes", range(len(starts))))
    steps = list(n.attrs.get("steps", [1] * len(starts)))
    out = [slice(None)] * len(shape)
    for s, e, a, st in zip(starts, ends, axes, steps):
        if st != 1:
            raise ShapeError(f"Slice {n.name}: only unit steps are supported")
        a = _axis(a, len(shape))
        dim = shape[a]
        s = max(0, min(dim, s + dim if s < 0 else s))
        e = max(0, min(dim, e + dim if e < 0 else e))
        out[a] = slice(s, e)
    return tuple(out)


def node_output_shapes(g: ModelGraph, n: Node) -> list[tuple[int, ...]]:
    S = [g.shape(i) if i else () for i in n.inputs]
    op, a = n.op, n.attrs
    if op in ("Add", "Sub", "Mul", "Div", "Mod", "And", "Equal"):
        return [_broadcast(S[0], S[1])]
    if op in ("Relu", "Gelu", "GeLU", "Tanh", "Sigmoid", "Exp", "Softmax", "Identity", "Pow"):
        return [S[0]]
    if op == "Gemm":
        M, K = (S[0][1], S[0][0]) if a.get("transA") else S[0]
        Kb, N = (S[1][1], S[1][0]) if a.get("transB") else S[1]
        if K != Kb:
            raise ShapeError(f"Gemm {n.name}: inner dimensions {K} and {Kb} differ")
        return [(M, N)]
    if op == "MatMul":
        if len(S[1]) != 2 or S[0][-1] != S[1][0]:
            raise ShapeError(f"MatMul {n.name}: shapes {S[0]} x {S[1]} unsupported")
        return [tuple(S[0][:-1]) + (S[1][1],)]
    if op == "Conv":
        if a.get("strides", [1, 1]) not in ([1, 1], (1, 1)):
            raise ShapeError(f"Conv {n.name}: only stride 1 is supported")
        return [conv_out_shape(S[0], S[1], conv_pads(a))]
    if op == "CustomConv":
        return [conv_out_shape(S[0], S[1], conv_pads(a), "NHWC")]
    if op == "Reshape":
        return [reshape_target(g, n, S[0])]
    if op == "Flatten":
        ax = _axis(a.get("axis", 1), len(S[0]))
        return [(int(np.prod(S[0][:ax])), int(np.prod(S[0][ax:])))]
    if op == "Transpose":
        perm = a.get("perm", list(range(len(S[0])))[::-1])
        return [tuple(S[0][p] for p in perm)]
    if op == "ReshapeTrans":
        mid = tuple(a["shape"])
        if int(np.prod(mid)) != int(np.prod(S[0])):
            raise ShapeError(f"ReshapeTrans {n.name}: bad shape")
        return [tuple(mid[p] for p in a["perm"])]
    if op == "Concat":
        ax = _axis(a.get("axis", 0), len(S[0]))
        out = list(S[0])
        out[ax] = sum(s[ax] for s in S)
        return [tuple(out)]
    if op == "Split":
        ax = _axis(a.get("axis", 0), len(S[0]))
        sizes = a.get("split") or [S[0][ax] // len(n.outputs)] * len(n.outputs)
        if sum(sizes) != S[0][ax]:
            raise ShapeError(f"Split {n.name}: sizes {sizes} do not cover axis {ax}")
        return [tuple(S[0][:ax]) + (k,) + tuple(S[0][ax + 1:]) for k in sizes]
    if op == "Slice":
        dummy = np.empty(S[0], dtype=np.int8)
        return [dummy[_slice_spec(n, S[0])].shape]
    if op == "MaxPool":
        kh, kw = a["kernel_shape"]
        sh, sw = a.get("strides", [kh, kw])
        N, C, H, W = S[0]
        return [(N, C, (H - kh) // sh + 1, (W - kw) // sw + 1)]
    if op in ("ArgMax", "ReduceMax", "ReduceSum"):
        rank = len(S[0])
        if op == "ArgMax":
            axes = [_axis(a.get("axis", 0), rank)]
        else:
            axes = [_axis(x, rank) for x in a.get("axes", range(rank))]
        keep = a.get("keepdims", 1)
        out = [1 if k in axes else d for k, d in enumerate(S[0])] if keep else \
            [d for k, d in enumerate(S[0]) if k not in axes]
        return [tuple(out)]
    raise UnsupportedOperatorError(op, n.name)


def infer_shapes(g: ModelGraph) -> ModelGraph:
    g.value_info = {i.name: tuple(i.shape) for i in g.graph_inputs}
    for n in toposort(g):
        shapes = node_output_shapes(g, n)
        if len(shapes) != len(n.outputs):
            raise GraphError(f"node {n.name} declares {len(n.outputs)} outputs, op yields {len(shapes)}")
        for o, s in zip(n.outputs, shapes):
            g.value_info[o] = tuple(int(v) for v in s)
    for o in g.graph_outputs:
        if o not in g.value_info and o not in g.initializers:
            raise FormatError(f"graph output {o} is never produced")
    return g
