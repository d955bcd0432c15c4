"""Greedy rule-based graph rewriting.

Each rule has a structural pattern (op types along a chain plus attribute
predicates) and a rewrite that edits the graph in place. ``apply_rules`` scans
rules in list order and restarts after every successful rewrite.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ..errors import RewriteError
from .graph import GraphInput, Initializer, ModelGraph, Node, infer_shapes

UNARY_ELEMENTWISE = frozenset({"Relu", "Tanh", "Sigmoid", "Exp", "Gelu", "GeLU", "Identity"})
_TO_NHWC = [0, 2, 3, 1]
_TO_NCHW = [0, 3, 1, 2]


@dataclass
class RewriteRule:
    name: str
    pattern: tuple[str, ...]
    match: Callable[[ModelGraph], Optional[object]]
    rewrite: Optional[Callable[[ModelGraph, object], None]] = None
    description: str = ""

    def apply_once(self, g: ModelGraph) -> bool:
        if self.rewrite is None:
            return False
        m = self.match(g)
        if m is None:
            return False
        self.rewrite(g, m)
        return True


@dataclass
class RewriteReport:
    nodes_before: int
    nodes_after: int
    applied: list[str] = field(default_factory=list)


# matching helpers ---------------------------------------------------------------

def _scalar(g: ModelGraph, name: str) -> Optional[float]:
    if not g.is_const(name):
        return None
    arr = np.asarray(g.const(name))
    if arr.size != 1:
        return None
    return float(arr.reshape(-1)[0])


def _sole_consumer(g: ModelGraph, edge: str, cons: dict) -> Optional[Node]:
    users = cons.get(edge, [])
    if len(users) != 1 or edge in g.graph_outputs:
        return None
    return users[0]


def _other(n: Node, edge: str) -> Optional[str]:
    if len(n.inputs) != 2 or edge not in n.inputs:
        return None
    a, b = n.inputs
    return b if a == edge else a


def _replace(g: ModelGraph, old: Sequence[Node], new: Sequence[Node]) -> None:
    ids = {id(n) for n in old}
    pos = min(k for k, n in enumerate(g.nodes) if id(n) in ids)
    rest = [n for n in g.nodes if id(n) not in ids]
    before = sum(1 for n in g.nodes[:pos] if id(n) not in ids)
    g.nodes = rest[:before] + list(new) + rest[before:]


def _rewire(g: ModelGraph, old: str, new: str) -> None:
    for n in g.nodes:
        n.inputs = [new if i == old else i for i in n.inputs]


# GeLU ----------------------------------------------------------------------------

GELU_PATTERN = ("Pow", "Mul", "Add", "Mul", "Tanh", "Add", "Mul", "Mul")


def match_gelu(g: ModelGraph):
    cons = g.consumers()
    for p in g.nodes:
        if p.op != "Pow" or len(p.inputs) != 2 or _scalar(g, p.inputs[1]) != 3.0:
            continue
        x = p.inputs[0]
        chain = [p]
        ok = True
        # each step: (op, which operand must be)  'c' constant, 'x' the GeLU input
        for op, other in (("Mul", "c"), ("Add", "x"), ("Mul", "c"), ("Tanh", None), ("Add", "c"), ("Mul", "x"),
                          ("Mul", "c")):
            nxt = _sole_consumer(g, chain[-1].outputs[0], cons)
            if nxt is None or nxt.op != op:
                ok = False
                break
            if other is not None:
                o = _other(nxt, chain[-1].outputs[0])
                if o is None or (other == "c" and _scalar(g, o) is None) or (other == "x" and o != x):
                    ok = False
                    break
            chain.append(nxt)
        if ok:
            return x, chain
    return None


def _subgraph_model(g: ModelGraph, x: str, chain: Sequence[Node]) -> dict:
    consts = {}
    for n in chain:
        for i in n.inputs:
            if g.is_const(i):
                consts[i] = g.initializers[i]
    sub = ModelGraph([Node(n.op, n.name, list(n.inputs), list(n.outputs), dict(n.attrs)) for n in chain],
                     consts, [GraphInput(x, (1,))], [chain[-1].outputs[0]])
    return sub.to_json()


def rewrite_gelu(g: ModelGraph, m) -> None:
    x, chain = m
    table = {"fn": "subgraph", "model": _subgraph_model(g, x, chain)}
    fused = Node("GeLU", g.fresh_name("gelu"), [x], [chain[-1].outputs[0]], {"table": table})
    _replace(g, chain, [fused])


# ReshapeTrans ---------------------------------------------------------------------

def match_reshape_trans(g: ModelGraph):
    cons = g.consumers()
    for r in g.nodes:
        if r.op != "Reshape":
            continue
        t = _sole_consumer(g, r.outputs[0], cons)
        if t is not None and t.op == "Transpose":
            return r, t
    return None


def rewrite_reshape_trans(g: ModelGraph, m) -> None:
    r, t = m
    shape = list(g.value_info[r.outputs[0]])
    perm = list(t.attrs.get("perm", list(range(len(shape)))[::-1]))
    fused = Node("ReshapeTrans", g.fresh_name("reshape_trans"), [r.inputs[0]], [t.outputs[0]],
                 {"shape": shape, "perm": perm})
    _replace(g, [r, t], [fused])


# ConcatConv -----------------------------------------------------------------------

def _static_conv(g: ModelGraph, n: Node) -> bool:
    return (n.op == "Conv" and g.is_const(n.inputs[1]) and (len(n.inputs) < 3 or not n.inputs[2]
                                                              or g.is_const(n.inputs[2]))
            and list(n.attrs.get("strides", [1, 1])) == [1, 1])


def match_concat_conv(g: ModelGraph):
    prod, cons = g.producer(), g.consumers()
    for c in g.nodes:
        if c.op != "Concat" or c.attrs.get("axis", 0) not in (1, -3) or len(c.inputs) < 2:
            continue
        convs = [prod.get(i) for i in c.inputs]
        if any(v is None or not _static_conv(g, v) for v in convs):
            continue
        if len({id(v) for v in convs}) != len(convs):
            continue
        head = convs[0]
        same = all(v.inputs[0] == head.inputs[0] and g.shape(v.inputs[1])[1:] == g.shape(head.inputs[1])[1:]
                   and v.attrs.get("pads") == head.attrs.get("pads") for v in convs)
        if same and all(_sole_consumer(g, v.outputs[0], cons) is c for v in convs):
            return c, convs
    return None


def rewrite_concat_conv(g: ModelGraph, m) -> None:
    c, convs = m
    ws = [g.const(v.inputs[1]) for v in convs]
    bs = [g.const(v.inputs[2]) if len(v.inputs) > 2 and v.inputs[2] else np.zeros(w.shape[0])
          for v, w in zip(convs, ws)]
    wname, bname = g.fresh_name("concat_conv_w"), g.fresh_name("concat_conv_b")
    g.initializers[wname] = Initializer(np.concatenate(ws, axis=0))
    g.initializers[bname] = Initializer(np.concatenate(bs, axis=0))
    conv = Node("Conv", g.fresh_name("concat_conv"), [convs[0].inputs[0], wname, bname], [c.outputs[0]],
                dict(convs[0].attrs))
    _replace(g, [*convs, c], [conv])


# CustomCNN and layout adapters ------------------------------------------------------

def match_custom_cnn(g: ModelGraph):
    for n in g.nodes:
        if _static_conv(g, n):
            return n
    return None


def rewrite_custom_cnn(g: ModelGraph, n: Node) -> None:
    x_nhwc, y_nhwc = g.fresh_name("nhwc_in"), g.fresh_name("nhwc_out")
    pre = Node("Transpose", g.fresh_name("to_nhwc"), [n.inputs[0]], [x_nhwc], {"perm": list(_TO_NHWC)})
    conv = Node("CustomConv", g.fresh_name("custom_conv"), [x_nhwc] + list(n.inputs[1:]), [y_nhwc],
                {"pads": list(n.attrs.get("pads", [0, 0, 0, 0]))})
    post = Node("Transpose", g.fresh_name("to_nchw"), [y_nhwc], [n.outputs[0]], {"perm": list(_TO_NCHW)})
    # placeholder shapes so fresh_name stays unique until the next inference pass
    g.value_info[x_nhwc] = g.value_info[y_nhwc] = ()
    _replace(g, [n], [pre, conv, post])


def _compose(p: Sequence[int], q: Sequence[int]) -> list[int]:
    """Permutation of Transpose(q) applied after Transpose(p)."""
    return [p[i] for i in q]


def match_layout_cancel(g: ModelGraph):
    prod = g.producer()
    for t in g.nodes:
        if t.op != "Transpose":
            continue
        first = prod.get(t.inputs[0])
        if first is None or first.op != "Transpose":
            continue
        rank = len(g.shape(first.inputs[0]))
        p = first.attrs.get("perm", list(range(rank))[::-1])
        q = t.attrs.get("perm", list(range(rank))[::-1])
        if _compose(p, q) == list(range(rank)) and t.outputs[0] not in g.graph_outputs:
            return first, t
    return None


def rewrite_layout_cancel(g: ModelGraph, m) -> None:
    first, t = m
    _rewire(g, t.outputs[0], first.inputs[0])
    g.nodes = [n for n in g.nodes if n is not t]
    if not g.consumers().get(first.outputs[0]) and first.outputs[0] not in g.graph_outputs:
        g.nodes = [n for n in g.nodes if n is not first]


def _sinkable(g: ModelGraph, n: Node, t: Node) -> bool:
    if n.op in UNARY_ELEMENTWISE:
        return True
    if n.op in ("ArgMax", "ReduceMax", "ReduceSum"):
        return bool(n.attrs.get("keepdims", 1)) and (n.op == "ArgMax" or "axes" in n.attrs)
    return False


def match_layout_sink(g: ModelGraph):
    cons = g.consumers()
    for t in g.nodes:
        if t.op != "Transpose":
            continue
        n = _sole_consumer(g, t.outputs[0], cons)
        if n is not None and len(n.inputs) == 1 and len(n.outputs) == 1 and _sinkable(g, n, t):
            return t, n
    return None


def rewrite_layout_sink(g: ModelGraph, m) -> None:
    t, n = m
    rank = len(g.shape(t.inputs[0]))
    perm = list(t.attrs.get("perm", list(range(rank))[::-1]))
    attrs = dict(n.attrs)
    if n.op == "ArgMax":
        ax = attrs.get("axis", 0)
        attrs["axis"] = perm[ax + rank if ax < 0 else ax]
    elif "axes" in attrs:
        attrs["axes"] = sorted(perm[a + rank if a < 0 else a] for a in attrs["axes"])
    mid = g.fresh_name("sunk")
    g.value_info[mid] = ()
    moved = Node(n.op, n.name, [t.inputs[0]], [mid], attrs)
    t2 = Node("Transpose", t.name, [mid], [n.outputs[0]], {"perm": perm})
    _replace(g, [t, n], [moved, t2])


# stubs ---------------------------------------------------------------------------

def _never(g: ModelGraph):
    return None


STUB_RULES = [
    RewriteRule("MultiHeadMatMul", ("Split", "MatMul", "Concat"), _never,
                description="fuse per-head attention products into one batched MatMul"),
    RewriteRule("RoPE", ("Slice", "Mul", "Neg", "Concat", "Add"), _never,
                description="collapse rotary embeddings into a single permutation + MulConst"),
    RewriteRule("MultiHeadConv", ("Split", "Conv", "Concat"), _never,
                description="merge grouped convolutions"),
]

DEFAULT_RULES = [
    RewriteRule("GeLU", GELU_PATTERN, match_gelu, rewrite_gelu, "tanh-approximation chain to one table"),
    RewriteRule("ReshapeTrans", ("Reshape", "Transpose"), match_reshape_trans, rewrite_reshape_trans,
                "one permutation instead of two"),
    RewriteRule("ConcatConv", ("Conv+", "Concat"), match_concat_conv, rewrite_concat_conv,
                "sibling convolutions over one input become one convolution"),
    RewriteRule("CustomCNN", ("Conv",), match_custom_cnn, rewrite_custom_cnn, "channels-last convolution"),
    RewriteRule("LayoutSink", ("Transpose", "Unary"), match_layout_sink, rewrite_layout_sink,
                "push layout adapters towards the graph outputs"),
    RewriteRule("LayoutCancel", ("Transpose", "Transpose"), match_layout_cancel, rewrite_layout_cancel,
                "drop inverse adapter pairs"),
    *STUB_RULES,
]

RULES_BY_NAME = {r.name: r for r in DEFAULT_RULES}


def rules_named(names: Sequence[str]) -> list[RewriteRule]:
    try:
        return [RULES_BY_NAME[n] for n in names]
    except KeyError as exc:
        raise RewriteError(f"unknown rule {exc.args[0]!r}") from None


def _prune(g: ModelGraph) -> None:
    used = {i for n in g.nodes for i in n.inputs} | set(g.graph_outputs)
    g.initializers = {k: v for k, v in g.initializers.items() if k in used}


def rule_custom_cnn(g: ModelGraph) -> ModelGraph:
    return apply_rules(g, [RULES_BY_NAME[k] for k in ("CustomCNN", "LayoutSink", "LayoutCancel")])


def apply_rules(g: ModelGraph, rules: Optional[Sequence[RewriteRule]] = None,
                report: Optional[RewriteReport] = None) -> ModelGraph:
    rules = DEFAULT_RULES if rules is None else list(rules)
    g = g.copy()
    infer_shapes(g)
    out_shapes = {o: g.shape(o) for o in g.graph_outputs}
    cap = 10 * max(1, len(g.nodes))
    rep = report if report is not None else RewriteReport(len(g.nodes), len(g.nodes))
    rep.nodes_before = len(g.nodes)
    steps = 0
    while True:
        for rule in rules:
            if rule.apply_once(g):
                infer_shapes(g)
                rep.applied.append(rule.name)
                steps += 1
                break
        else:
            break
        if steps > cap:
            raise RewriteError(f"rewriting did not reach a fixpoint within {cap} steps")
    _prune(g)
    infer_shapes(g)
    for o, s in out_shapes.items():
        if g.shape(o) != s:
            raise RewriteError(f"rewrite changed the shape of output {o}: {s} -> {g.shape(o)}")
    rep.nodes_after = len(g.nodes)
    return g

