"""Per-layer lowering of a (rewritten) ModelGraph into a BlockDag.

Edges carry interval bounds over all row slots, padding included, so every
table can be sized at compile time. Pure data movement (reshape, transpose,
slice, concat, pooling windows) is lowered by pushing an index tensor through
the op. The resulting map is free when whole rows survive, a Permute when it
is a separable bijection, and a CopyConstraint otherwise.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence, Union

import numpy as np

from ..algebra.field import next_pow2
from ..compiler.graph import ModelGraph, Node, _slice_spec, conv_pads, toposort, validate
from ..compiler.quant import DEFAULT_SCALE_BITS, round_half_away
from ..compiler.reference import UNARY_TABLES, _Ctx, _axis, _q_node, _reduce_axes
from ..errors import GraphError, RangePlanError, ShapeError, UnsupportedOperatorError
from .dag import BlockDag, Edge, rows_to_tensor
from .tables import DEFAULT_MAX_TABLE_BITS, LookupTablePlan, TableSpec

Const = tuple  # (int ndarray, scale)
Value = Union[Edge, Const]

LAYOUT_OPS = ("Reshape", "Flatten", "Transpose", "ReshapeTrans", "Slice", "Split", "Concat", "Identity")


def _mul_iv(a: tuple[int, int], b: tuple[int, int], same: bool = False) -> tuple[int, int]:
    if same:
        lo, hi = a
        sq = (lo * lo, hi * hi)
        return (0 if lo <= 0 <= hi else min(sq)), max(sq)
    c = (a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1])
    return min(c), max(c)


def _floordiv_iv(a: tuple[int, int], b: tuple[int, int]) -> tuple[int, int]:
    c = [x // y for x in a for y in b]
    return min(c), max(c)


class Lowerer:
    def __init__(self, g: ModelGraph, scale_bits: int = DEFAULT_SCALE_BITS,
                 max_table_bits: int = DEFAULT_MAX_TABLE_BITS):
        self.g = g
        self.s = scale_bits
        self.dag = BlockDag(scale_bits, tables=LookupTablePlan(max_table_bits=max_table_bits))
        self.ref = _Ctx(g, scale_bits)
        self.env: dict[str, Edge] = {}
        self.consumers = g.consumers()
        self.fused: set[str] = set()
        self.layer = ""

    # edges -------------------------------------------------------------------

    def _name(self, tag: str) -> str:
        return f"{self.layer}/{tag}" if self.layer else tag

    @staticmethod
    def _with_pad(shape, lo: int, hi: int) -> tuple[int, int]:
        L = shape[-1]
        return (min(lo, 0), max(hi, 0)) if next_pow2(L) > L else (lo, hi)

    def act(self, tag: str, shape, scale: int, lo: int, hi: int) -> Edge:
        shape = tuple(shape) or (1,)
        lo, hi = self._with_pad(shape, lo, hi)
        return self.dag.add_edge(self._name(tag), shape, scale, "activation", lo, hi)

    def const_edge(self, tag: str, arr, scale: int) -> Edge:
        a = np.asarray(arr, dtype=object)
        shape = a.shape or (1,)
        a = a.reshape(shape)
        rows = [[int(v) for v in r] for r in a.reshape(-1, shape[-1])]
        vals = [v for r in rows for v in r]
        lo, hi = self._with_pad(shape, min(vals), max(vals))
        return self.dag.add_edge(self._name(tag), shape, scale, "const", lo, hi, data=rows)

    def derived(self, tag: str, shape, scale: int, terms: list, offset: Optional[list] = None,
                bounds: Optional[tuple[int, int]] = None) -> Edge:
        shape = tuple(shape) or (1,)
        n = next_pow2(shape[-1])
        if bounds is None:
            lo = hi = None
            for r, row in enumerate(terms):
                l = h = 0
                for c, src, _ in row:
                    e = self.dag.edges[src]
                    x, y = c * e.lo, c * e.hi
                    l, h = l + min(x, y), h + max(x, y)
                off = offset[r] if offset else None
                if off:
                    full = list(off) + [0] * (n - len(off))
                    l, h = l + min(full), h + max(full)
                lo = l if lo is None else min(lo, l)
                hi = h if hi is None else max(hi, h)
            bounds = (lo or 0, hi or 0)
        return self.dag.add_edge(self._name(tag), shape, scale, "derived", bounds[0], bounds[1],
                                 terms=terms, offset=offset)

    def broadcast(self, e: Edge, out_shape) -> Edge:
        out = tuple(out_shape) or (1,)
        if e.shape == out:
            return e
        src = (1,) * (len(out) - len(e.shape)) + e.shape
        if len(src) != len(out) or src[-1] not in (1, out[-1]):
            raise ShapeError(f"cannot broadcast {e.shape} to {out}")
        ridx = np.broadcast_to(np.arange(e.rows).reshape(src[:-1]), out[:-1])
        terms = [[(1, e.id, int(k))] for k in ridx.reshape(-1)]
        return self.derived("bcast", out, e.scale, terms, bounds=(e.lo, e.hi))

    # values --------------------------------------------------------------------

    def get(self, name: str, scale: Optional[int] = None) -> Value:
        if name in self.env:
            return self.env[name]
        if self.g.is_const(name):
            return self.ref.get(name, scale)
        raise GraphError(f"edge {name} used before it is produced")

    @staticmethod
    def is_const(v: Value) -> bool:
        return isinstance(v, tuple)

    @staticmethod
    def const_array(v: Value) -> tuple[np.ndarray, int]:
        if isinstance(v, tuple):
            return v
        if v.source == "const":
            return rows_to_tensor(v.data, v.shape), v.scale
        raise ShapeError("not a constant")

    def static(self, v: Value) -> bool:
        return isinstance(v, tuple) or v.source == "const"

    def pair(self, a: str, b: str) -> tuple[Value, Value, int]:
        if self.g.is_const(a) and not self.g.is_const(b):
            y = self.get(b)
            x = self.get(a, self.scale_of(y))
            return x, y, self.scale_of(y)
        if self.g.is_const(b) and not self.g.is_const(a):
            x = self.get(a)
            return x, self.get(b, self.scale_of(x)), self.scale_of(x)
        x, y = self.get(a), self.get(b)
        if self.scale_of(x) != self.scale_of(y):
            raise ShapeError(f"operands {a} and {b} have scales {self.scale_of(x)} and {self.scale_of(y)}")
        return x, y, self.scale_of(x)

    @staticmethod
    def scale_of(v: Value) -> int:
        return v[1] if isinstance(v, tuple) else v.scale

    def as_edge(self, v: Value, shape, scale: Optional[int] = None) -> Edge:
        shape = tuple(shape) or (1,)
        if isinstance(v, tuple):
            arr = np.broadcast_to(np.asarray(v[0], dtype=object), shape)
            return self.const_edge("const", arr, v[1] if scale is None else scale)
        return self.broadcast(v, shape)

    def out_shape(self, n: Node, k: int = 0) -> tuple[int, ...]:
        return tuple(self.g.value_info[n.outputs[k]]) or (1,)

    def bind(self, n: Node, *edges: Edge) -> None:
        for o, e in zip(n.outputs, edges):
            self.env[o] = e

    # arithmetic building blocks ---------------------------------------------------

    def cq2(self, e: Edge, table: TableSpec, tag: str) -> Edge:
        m = table.table_map()
        if e.lo < table.lo or e.hi >= table.hi:
            raise RangePlanError(f"{self._name(tag)}: input range [{e.lo}, {e.hi}] outside table {table.name}")
        if table.fn["fn"] == "rescale":
            lo, hi = m[e.lo], m[e.hi]
        else:
            vals = [m[x] for x in range(e.lo, e.hi + 1)]
            lo, hi = min(vals), max(vals)
        out = self.act(tag, e.shape, table.scale_out, lo, hi)
        self.dag.add_node("CQ2", [e], [out], self.layer, table=table.name)
        return out

    def rescale(self, e: Edge, shift: int, relu: bool = False) -> Edge:
        if shift == 0 and not relu:
            return e
        t = self.dag.tables.rescale(shift, relu, e.lo, e.hi, e.scale, self._name("rescale"))
        return self.cq2(e, t, "rescale")

    def relu_fusable(self, n: Node) -> Optional[Node]:
        out = n.outputs[0]
        cons = self.consumers.get(out, [])
        if len(cons) == 1 and cons[0].op == "Relu" and out not in self.g.graph_outputs:
            return cons[0]
        return None

    def finish_product(self, n: Node, acc: Edge, shift: int, allow_relu: bool = True) -> None:
        relu = self.relu_fusable(n) if allow_relu and shift else None
        out = self.rescale(acc, shift, relu is not None)
        self.bind(n, out)
        if relu is not None:
            self.fused.add(relu.name)
            self.env[relu.outputs[0]] = out

    def mul_edges(self, x: Value, y: Value, shape, tag: str = "prod") -> Edge:
        sx, sy = self.scale_of(x), self.scale_of(y)
        if self.static(x) and not self.static(y):
            x, y = y, x
        arr = self.const_array(y)[0] if self.static(y) else None
        if arr is not None and np.asarray(arr).size == 1:
            c = int(np.asarray(arr).reshape(-1)[0])
            f = self.broadcast(x, shape)
            lo, hi = sorted((c * f.lo, c * f.hi))
            out = self.act(tag, shape, sx + sy, lo, hi)
            self.dag.add_node("MulConst", [f], [out], self.layer, c=c)
            return out
        f = self.as_edge(x, shape)
        h = self.as_edge(y, shape)
        lo, hi = _mul_iv((f.lo, f.hi), (h.lo, h.hi), same=f.id == h.id)
        out = self.act(tag, shape, sx + sy, lo, hi)
        self.dag.add_node("Mul", [f, h], [out], self.layer)
        return out

    def masked(self, e: Edge) -> Edge:
        if e.n == e.L:
            return e
        m = self.const_edge("mask", np.ones(e.shape, dtype=np.int64), 0)
        out = self.act("masked", e.shape, e.scale, e.lo, e.hi)
        self.dag.add_node("Mul", [e, m], [out], self.layer)
        return out

    def cqlin(self, x: Edge, W: np.ndarray, scale: int, tag: str) -> tuple[Edge, list[tuple[int, int]]]:
        W = np.asarray(W, dtype=object)
        O, I = W.shape
        if I != x.L:
            raise ShapeError(f"{self._name(tag)}: matrix has {I} columns, input rows have {x.L}")
        rows = [[int(v) for v in r] for r in W]
        name = self._name(tag)
        self.dag.matrices[name] = rows
        cols = []
        for r in rows:
            lo = sum(min(w * x.lo, w * x.hi) for w in r)
            hi = sum(max(w * x.lo, w * x.hi) for w in r)
            cols.append((lo, hi))
        y = self.act(tag + "_out", x.shape[:-1] + (O,), scale, min(c[0] for c in cols), max(c[1] for c in cols))
        self.dag.add_node("CQLin", [x], [y], self.layer, matrix=name)
        return y, cols

    def matmul_dynamic(self, x: Edge, w: Edge, tag: str = "matmul") -> Edge:
        """x [..., K] times w [K, N] with both operands committed."""
        if len(w.shape) != 2 or w.shape[0] != x.L:
            raise ShapeError(f"{self._name(tag)}: shapes {x.shape} x {w.shape}")
        K, N = w.shape
        bt = self.relayout([w], np.arange(K * N).reshape(K, N).T.copy(), "bt")
        xm = self.masked(x)
        pl, ph = _mul_iv((xm.lo, xm.hi), (bt.lo, bt.hi), same=False)
        out = self.act(tag, x.shape[:-1] + (N,), x.scale + w.scale, K * min(pl, 0), K * max(ph, 0))
        self.dag.add_node("MatMul", [xm, bt], [out], self.layer)
        return out

    def maxproof(self, e: Edge, tag: str = "max") -> Edge:
        bits = max(1, (e.hi - e.lo).bit_length())
        out = self.act(tag, e.shape[:-1] + (1,), e.scale, e.lo, e.hi)
        self.dag.add_node("MaxProof", [e], [out], self.layer, bits=bits)
        return out

    def divide(self, a: Edge, b: Union[int, Edge], scale: int, kind: str = "Div") -> tuple[Edge, Edge]:
        if isinstance(b, int):
            if b <= 0:
                raise RangePlanError(f"{self._name('div')}: divisor {b} is not positive")
            biv, bits = (b, b), max(1, (b - 1).bit_length())
        else:
            if b.lo <= 0:
                raise RangePlanError(f"{self._name('div')}: divisor range [{b.lo}, {b.hi}] is not positive")
            biv, bits = (b.lo, b.hi), max(1, (b.hi - 1).bit_length())
        qlo, qhi = _floordiv_iv((a.lo, a.hi), biv)
        q = self.act("quot", a.shape, scale, qlo, qhi)
        r = self.act("rem", a.shape, scale, 0, biv[1] - 1)
        if bits > self.dag.tables.max_table_bits:
            raise RangePlanError(f"{self._name('div')}: remainder needs 2^{bits} table entries")
        ins = [a] if isinstance(b, int) else [a, b]
        params = {"bits": bits}
        if isinstance(b, int):
            params["divisor"] = b
        self.dag.add_node(kind, ins, [q, r], self.layer, **params)
        return q, r

    # layout ------------------------------------------------------------------------

    def relayout(self, srcs: Sequence[Edge], idx: np.ndarray, tag: str = "layout") -> Edge:
        """Edge whose logical entries are srcs' flat entries picked by idx."""
        idx = np.asarray(idx, dtype=np.int64)
        shape = idx.shape or (1,)
        idx = idx.reshape(shape)
        scale = srcs[0].scale
        if any(e.scale != scale for e in srcs):
            raise ShapeError(f"{self._name(tag)}: inputs have different scales")
        sizes = [e.rows * e.L for e in srcs]
        starts = np.cumsum([0] + sizes)
        if len(srcs) == 1 and srcs[0].shape == shape and (idx.reshape(-1) == np.arange(sizes[0])).all():
            return srcs[0]
        Lo = shape[-1]
        rows = idx.reshape(-1, Lo)

        def locate(pos: int) -> tuple[int, int, int]:
            k = int(np.searchsorted(starts, pos, side="right") - 1)
            off = pos - int(starts[k])
            return k, off // srcs[k].L, off % srcs[k].L

        lo = min(e.lo for e in srcs)
        hi = max(e.hi for e in srcs)
        if all(e.L == Lo for e in srcs):
            refs = []
            ar = np.arange(Lo)
            for r in rows:
                k, row, col = locate(int(r[0]))
                if col != 0 or not (r == r[0] + ar).all():
                    refs = None
                    break
                refs.append((k, row))
            if refs is not None:
                in_order = [(k, i) for k in range(len(srcs)) for i in range(srcs[k].rows)]
                if len(srcs) > 1 and refs == in_order:
                    out = self.act(tag, shape, scale, lo, hi)
                    self.dag.add_node("Concat", list(srcs), [out], self.layer)
                    return out
                terms = [[(1, srcs[k].id, row)] for k, row in refs]
                return self.derived(tag, shape, scale, terms, bounds=(lo, hi))
        flat = idx.reshape(-1)
        if len(srcs) == 1 and flat.size == sizes[0] and (np.sort(flat) == np.arange(sizes[0])).all():
            p0 = rows[:, 0]
            p1 = rows[0] - rows[0, 0]
            if (rows == p0[:, None] + p1[None, :]).all():
                out = self.act(tag, shape, scale, lo, hi)
                self.dag.add_node("Permute", list(srcs), [out], self.layer,
                                  p0=[int(v) for v in p0], p1=[int(v) for v in p1])
                return out
        m = srcs[0].n
        if any(e.n != m for e in srcs):
            raise ShapeError(f"{self._name(tag)}: gathering from rows of different padded lengths")
        rowbase = np.cumsum([0] + [e.rows for e in srcs])
        n_out = next_pow2(Lo)
        sigma: list = []
        for r in rows:
            for j in range(n_out):
                if j < Lo:
                    k, row, col = locate(int(r[j]))
                    sigma.append(int((rowbase[k] + row) * m + col))
                else:
                    sigma.append(None)
        out = self.act(tag, shape, scale, lo, hi)
        self.dag.add_node("CopyConstraint", list(srcs), [out], self.layer, sigma=sigma)
        return out

    @staticmethod
    def index_of(e: Edge) -> np.ndarray:
        return np.arange(e.rows * e.L).reshape(e.shape)

    def transpose(self, e: Edge, perm: Sequence[int], tag: str = "transpose") -> Edge:
        return self.relayout([e], self.index_of(e).transpose(list(perm)), tag)

    def reshape(self, e: Edge, shape, tag: str = "reshape") -> Edge:
        return self.relayout([e], self.index_of(e).reshape(tuple(shape) or (1,)), tag)

    # per-layer lowering --------------------------------------------------------------

    def input_edge(self, gi) -> Edge:
        shape = tuple(gi.shape) or (1,)
        if gi.dtype == "bool":
            sc, lo, hi = 0, 0, 1
        elif gi.dtype in ("int64", "int32"):
            sc, lo, hi = 0, math.floor(gi.range[0]), math.ceil(gi.range[1])
        else:
            sc = self.s
            lo, hi = round_half_away(gi.range[0] * (1 << sc)), round_half_away(gi.range[1] * (1 << sc))
        lo, hi = self._with_pad(shape, lo, hi)
        return self.dag.add_edge(gi.name, shape, sc, "input", lo, hi)

    def lower(self) -> BlockDag:
        validate(self.g)
        for gi in self.g.graph_inputs:
            e = self.input_edge(gi)
            self.env[gi.name] = e
            self.dag.inputs[gi.name] = e.id
        for n in toposort(self.g):
            if n.name in self.fused:
                continue
            self.layer = n.name
            self.lower_node(n)
        self.layer = ""
        for o in self.g.graph_outputs:
            if o not in self.env:
                arr, sc = self.get(o)
                self.env[o] = self.const_edge(o, arr, sc)
            self.dag.outputs[o] = self.env[o].id
        problems = self.dag.lint_rescale()
        if problems:
            raise GraphError("scale discipline violated: " + "; ".join(problems))
        self.dag.validate()
        return self.dag

    def fold(self, n: Node) -> None:
        ctx = _Ctx(self.g, self.s)
        for i in n.inputs:
            if i and i in self.env:
                arr, sc = self.const_array(self.env[i])
                ctx.vals[i], ctx.scale[i] = arr, sc
        for o, (val, sc) in zip(n.outputs, _q_node(ctx, n)):
            self.env[o] = self.const_edge(o, np.asarray(val, dtype=object), sc)

    def lower_node(self, n: Node) -> None:
        op = n.op
        data_inputs = n.inputs[:1] if op in ("Reshape", "Pow") else [i for i in n.inputs if i]
        if all(self.g.is_const(i) or (i in self.env and self.env[i].source == "const") for i in data_inputs):
            return self.fold(n)
        handler = getattr(self, f"lower_{op.lower()}", None)
        if op in UNARY_TABLES or op == "GeLU":
            return self.lower_nonlinearity(n)
        if handler is None:
            raise UnsupportedOperatorError(op, n.name)
        return handler(n)

    def lower_add(self, n: Node) -> None:
        x, y, sc = self.pair(n.inputs[0], n.inputs[1])
        shape = self.out_shape(n)
        f, h = self.as_edge(x, shape), self.as_edge(y, shape)
        if n.op == "Add":
            lo, hi = f.lo + h.lo, f.hi + h.hi
        else:
            lo, hi = f.lo - h.hi, f.hi - h.lo
        out = self.act("out", shape, sc, lo, hi)
        self.dag.add_node(n.op, [f, h], [out], self.layer)
        self.bind(n, out)

    lower_sub = lower_add

    def lower_mul(self, n: Node) -> None:
        x, y = self.get(n.inputs[0]), self.get(n.inputs[1])
        sx, sy = self.scale_of(x), self.scale_of(y)
        shape = self.out_shape(n)
        if n.op == "And":
            return self.lower_and(n)
        acc = self.mul_edges(x, y, shape)
        self.finish_product(n, acc, sx + sy - max(sx, sy))

    def lower_and(self, n: Node) -> None:
        x, y = self.get(n.inputs[0]), self.get(n.inputs[1])
        for v in (x, y):
            if isinstance(v, Edge) and v.source != "const":
                self.dag.add_node("BooleanCheck", [v], [], self.layer)
        acc = self.mul_edges(x, y, self.out_shape(n))
        sx, sy = self.scale_of(x), self.scale_of(y)
        self.finish_product(n, acc, sx + sy - max(sx, sy), allow_relu=False)

    def lower_pow(self, n: Node) -> None:
        k = int(np.asarray(self.ref.real_const(n.inputs[1])).reshape(-1)[0])
        if k < 1:
            raise ShapeError(f"Pow {n.name}: exponent must be a positive integer")
        x = self.get(n.inputs[0])
        shape = self.out_shape(n)
        acc = self.broadcast(x, shape)
        for i in range(k - 1):
            prod = self.mul_edges(acc, x, shape, f"pow{i + 2}")
            acc = self.rescale(prod, acc.scale + x.scale - max(acc.scale, x.scale))
        self.bind(n, acc)

    def lower_div(self, n: Node) -> None:
        x, d, sc = self.pair(n.inputs[0], n.inputs[1])
        shape = self.out_shape(n)
        f = self.as_edge(x, shape)
        if self.static(d):
            arr = np.broadcast_to(np.asarray(self.const_array(d)[0], dtype=object), shape)
            vals = {int(v) for v in arr.reshape(-1)}
            if len(vals) == 1:
                dq = vals.pop()
                if dq <= 0:
                    raise RangePlanError(f"{n.name}: divisor must be positive")
                if n.op == "Mod":
                    _, r = self.divide(f, dq, sc, "Mod")
                    return self.bind(n, r)
                terms = [[(1 << (sc + 1), f.id, r)] for r in range(f.rows)]
                a = self.derived("num", shape, sc, terms, [[dq] * f.n for _ in range(f.rows)])
                q, _ = self.divide(a, 2 * dq, sc, "Div")
                return self.bind(n, q)
        g = self.as_edge(d, shape)
        pad = [[0] * g.L + [1] * (g.n - g.L) for _ in range(g.rows)] if g.n > g.L else None
        glo, ghi = g.lo, g.hi
        if self.static(d):
            flat = [v for r in g.data for v in r]
            glo, ghi = min(flat), max(flat)
        k = 1 if n.op == "Mod" else 2
        blo, bhi = k * glo, k * ghi
        if pad:
            blo, bhi = min(blo, 1), max(bhi, 1)
        b = self.derived("den", shape, sc, [[(k, g.id, r)] for r in range(g.rows)], pad, bounds=(blo, bhi))
        if n.op == "Mod":
            _, r = self.divide(f, b, sc, "Mod")
            return self.bind(n, r)
        a = self.derived("num", shape, sc, [[(1 << (sc + 1), f.id, r), (1, g.id, r)] for r in range(f.rows)])
        q, _ = self.divide(a, b, sc, "Div")
        self.bind(n, q)

    lower_mod = lower_div

    def lower_equal(self, n: Node) -> None:
        x, y, sc = self.pair(n.inputs[0], n.inputs[1])
        shape = self.out_shape(n)
        if self.static(x):
            x, y = y, x
        f = self.broadcast(x, shape)
        if self.static(y):
            arr = np.broadcast_to(np.asarray(self.const_array(y)[0], dtype=object), shape).reshape(-1, shape[-1])
            terms = [[(1, f.id, r)] for r in range(f.rows)]
            d = self.derived("diff", shape, sc, terms, [[-int(v) for v in row] for row in arr])
        else:
            h = self.broadcast(y, shape)
            d = self.derived("diff", shape, sc, [[(1, f.id, r), (-1, h.id, r)] for r in range(f.rows)])
        t = self.dag.tables.mapping({"fn": "eq0"}, d.lo, d.hi, sc, 0, self._name("eq"))
        self.bind(n, self.cq2(d, t, "eq"))

    def lower_nonlinearity(self, n: Node) -> None:
        x = self.get(n.inputs[0])
        if n.op == "GeLU":
            fn = {**n.attrs["table"], "s": x.scale}
        else:
            fn = {"fn": UNARY_TABLES[n.op], "s": x.scale}
        t = self.dag.tables.nonlinearity(fn, x.scale, x.lo, x.hi, self.layer)
        self.bind(n, self.cq2(x, t, fn["fn"] if fn["fn"] != "subgraph" else "gelu"))

    def lower_identity(self, n: Node) -> None:
        self.bind(n, self.get(n.inputs[0]))

    def _weights(self, name: str) -> Optional[tuple[np.ndarray, int]]:
        v = self.get(name)
        return self.const_array(v) if self.static(v) else None

    def lower_gemm(self, n: Node) -> None:
        a, I = n.attrs, n.inputs
        if n.op == "Gemm" and (a.get("alpha", 1.0) != 1.0 or a.get("beta", 1.0) != 1.0):
            raise ShapeError(f"Gemm {n.name}: alpha/beta must be 1")
        x = self.get(I[0])
        if n.op == "Gemm" and a.get("transA"):
            x = self.transpose(x, [1, 0], "xT")
        sx = x.scale
        wc = self._weights(I[1])
        trans_b = n.op == "Gemm" and a.get("transB")
        if wc is not None:
            w, sw = wc
            W = w if trans_b else w.T
            acc, cols = self.cqlin(x, W, sx + sw, "W")
        else:
            w = self.get(I[1])
            sw = w.scale
            if trans_b:
                w = self.transpose(w, [1, 0], "wT")
            acc = self.matmul_dynamic(x, w)
            cols = None
        if n.op == "Gemm" and len(I) > 2 and I[2]:
            bias = self.get(I[2], sx + sw)
            bedge = self.as_edge(bias, acc.shape, sx + sw)
            if cols is not None and self.static(bias):
                barr = np.broadcast_to(np.asarray(self.const_array(bias)[0], dtype=object), acc.shape)
                bl = [int(v) for v in barr.reshape(-1, acc.L)[0]]
                lo = min(c[0] + b for c, b in zip(cols, bl))
                hi = max(c[1] + b for c, b in zip(cols, bl))
            else:
                lo, hi = acc.lo + bedge.lo, acc.hi + bedge.hi
            out = self.act("biased", acc.shape, acc.scale, lo, hi)
            self.dag.add_node("Add", [acc, bedge], [out], self.layer)
            acc = out
        self.finish_product(n, acc, sx + sw - max(sx, sw))

    lower_matmul = lower_gemm

    def conv_core(self, x: Edge, w: Value, bias: Optional[str], pads, n: Node) -> Edge:
        """Stride-1 convolution on an NHWC edge; returns the rescaled output before fusion."""
        B, H, W_, C = x.shape
        t, l, b, r = pads
        Hp, Wp = H + t + b, W_ + l + r
        if any(pads):
            rows = []
            for bb in range(B):
                for i in range(Hp):
                    for j in range(Wp):
                        ii, jj = i - t, j - l
                        inside = 0 <= ii < H and 0 <= jj < W_
                        rows.append([(1, x.id, (bb * H + ii) * W_ + jj)] if inside else [])
            xp = self.derived("padded", (B, Hp, Wp, C), x.scale, rows, bounds=(min(x.lo, 0), max(x.hi, 0)))
        else:
            xp = x
        sx = x.scale
        if self.static(w):
            warr, sw = self.const_array(w)
        else:
            warr, sw = None, w.scale
        O, Cw, kh, kw = (warr.shape if warr is not None else w.shape)
        if Cw != C:
            raise ShapeError(f"{n.name}: kernel has {Cw} input channels, input has {C}")
        Ho, Wo = Hp - kh + 1, Wp - kw + 1
        if Ho < 1 or Wo < 1:
            raise ShapeError(f"{n.name}: kernel larger than input")
        parts: list[Edge] = []
        col_iv = [(0, 0)] * O
        wperm = None
        if warr is None:
            # dynamic kernel: W_pq rows are slices of w laid out as [kh, kw, O, C]
            wperm = self.transpose(w, [2, 3, 0, 1], "kernel")
        for p in range(kh):
            for q in range(kw):
                terms = [[(1, xp.id, (bb * Hp + i + p) * Wp + j + q)]
                         for bb in range(B) for i in range(Ho) for j in range(Wo)]
                xs = self.derived(f"x{p}{q}", (B, Ho, Wo, C), sx, terms, bounds=(xp.lo, xp.hi))
                if warr is not None:
                    y, cols = self.cqlin(xs, warr[:, :, p, q], sx + sw, f"W{p}{q}")
                    col_iv = [(a[0] + c[0], a[1] + c[1]) for a, c in zip(col_iv, cols)]
                else:
                    base = (p * kw + q) * O
                    wpq = self.derived(f"w{p}{q}", (O, C), sw, [[(1, wperm.id, base + o)] for o in range(O)],
                                       bounds=(wperm.lo, wperm.hi))
                    wt = self.transpose(wpq, [1, 0], f"w{p}{q}T")
                    y = self.matmul_dynamic(xs, wt, f"mm{p}{q}")
                parts.append(y)
        npad = next_pow2(O)
        offset = None
        bl = [0] * O
        if bias:
            barr, _ = self.const_array(self.get(bias, sx + sw))
            bl = [int(v) for v in np.asarray(barr, dtype=object).reshape(-1)]
            offset = [bl + [0] * (npad - O) for _ in range(B * Ho * Wo)]
        terms = [[(1, y.id, rr) for y in parts] for rr in range(B * Ho * Wo)]
        if warr is not None:
            lo = min(c[0] + bv for c, bv in zip(col_iv, bl))
            hi = max(c[1] + bv for c, bv in zip(col_iv, bl))
            lo, hi = self._with_pad((O,), lo, hi)
            acc = self.derived("conv", (B, Ho, Wo, O), sx + sw, terms, offset, bounds=(lo, hi))
        else:
            acc = self.derived("conv", (B, Ho, Wo, O), sx + sw, terms, offset)
        return acc

    def lower_customconv(self, n: Node) -> None:
        if n.attrs.get("strides", [1, 1]) not in ([1, 1], (1, 1)):
            raise ShapeError(f"{n.name}: only stride 1 is supported")
        x = self.get(n.inputs[0])
        w = self.get(n.inputs[1])
        bias = n.inputs[2] if len(n.inputs) > 2 and n.inputs[2] else None
        acc = self.conv_core(x, w, bias, conv_pads(n.attrs), n)
        sw = self.scale_of(w)
        self.finish_product(n, acc, x.scale + sw - max(x.scale, sw))

    def lower_conv(self, n: Node) -> None:
        if n.attrs.get("strides", [1, 1]) not in ([1, 1], (1, 1)):
            raise ShapeError(f"{n.name}: only stride 1 is supported")
        x = self.transpose(self.get(n.inputs[0]), [0, 2, 3, 1], "nhwc")
        w = self.get(n.inputs[1])
        bias = n.inputs[2] if len(n.inputs) > 2 and n.inputs[2] else None
        acc = self.conv_core(x, w, bias, conv_pads(n.attrs), n)
        sw = self.scale_of(w)
        shift = x.scale + sw - max(x.scale, sw)
        relu = self.relu_fusable(n) if shift else None
        out = self.transpose(self.rescale(acc, shift, relu is not None), [0, 3, 1, 2], "nchw")
        self.bind(n, out)
        if relu is not None:
            self.fused.add(relu.name)
            self.env[relu.outputs[0]] = out

    def lower_softmax(self, n: Node) -> None:
        x = self.get(n.inputs[0])
        if _axis(n.attrs.get("axis", -1), len(x.shape)) != len(x.shape) - 1:
            raise ShapeError(f"Softmax {n.name}: only the last axis is supported")
        sc = x.scale
        m = self.maxproof(x, "max")
        mb = self.broadcast(m, x.shape)
        t = self.act("shifted", x.shape, sc, x.lo - m.hi, x.hi - m.lo)
        self.dag.add_node("Sub", [x, mb], [t], self.layer)
        table = self.dag.tables.nonlinearity({"fn": "exp", "s": sc}, sc, t.lo, t.hi, self._name("exp"))
        e = self.cq2(t, table, "exp")
        em = self.masked(e)
        one = table.table_map()[0]
        S = self.act("sum", x.shape[:-1] + (1,), sc, max(x.L * em.lo, one), x.L * em.hi)
        self.dag.add_node("Sum", [em], [S], self.layer)
        rows = e.rows
        a = self.derived("num", x.shape, sc, [[(1 << (sc + 1), e.id, r), (1, S.id, r)] for r in range(rows)])
        b = self.derived("den", x.shape, sc, [[(2, S.id, r)] for r in range(rows)], bounds=(2 * S.lo, 2 * S.hi))
        q, _ = self.divide(a, b, sc, "Div")
        self.bind(n, q)

    def argmax_rows(self, v: Edge) -> Edge:
        """Index of the first maximum of every row, as a [..., 1] edge at scale 0."""
        L = v.L
        if L == 1:
            return self.const_edge("argmax", np.zeros(v.shape, dtype=np.int64), 0)
        b = max(1, (L - 1).bit_length())
        B = 1 << b
        terms = [[(B, v.id, r)] for r in range(v.rows)]
        off = [[B - 1 - j for j in range(L)] for _ in range(v.rows)]
        key = self.derived("key", v.shape, v.scale, terms, off,
                           bounds=self._with_pad(v.shape, B * v.lo, B * v.hi + B - 1))
        kmax = self.maxproof(key, "keymax")
        _, r = self.divide(kmax, B, v.scale, "Div")
        return self.derived("argmax", kmax.shape, 0, [[(-1, r.id, i)] for i in range(r.rows)],
                            [[B - 1] for _ in range(r.rows)], bounds=(0, B - 1))

    def _group_last(self, x: Edge, axes: Sequence[int]) -> tuple[Edge, tuple[int, ...]]:
        """Move the reduced axes to the end and merge them into one row per group."""
        rank = len(x.shape)
        kept = [k for k in range(rank) if k not in axes]
        idx = self.index_of(x).transpose(kept + list(axes))
        kept_shape = tuple(x.shape[k] for k in kept)
        red = int(np.prod([x.shape[k] for k in axes]))
        return self.relayout([x], idx.reshape(kept_shape + (red,)), "group"), kept_shape

    def _reduced_out(self, n: Node, core: Edge) -> Edge:
        return self.reshape(core, self.out_shape(n), "out")

    def lower_argmax(self, n: Node) -> None:
        x = self.get(n.inputs[0])
        ax = _axis(n.attrs.get("axis", 0), len(x.shape))
        grouped, _ = self._group_last(x, [ax])
        self.bind(n, self._reduced_out(n, self.argmax_rows(grouped)))

    def lower_reducemax(self, n: Node) -> None:
        x = self.get(n.inputs[0])
        axes = sorted(set(_reduce_axes(n, len(x.shape))))
        grouped, _ = self._group_last(x, axes)
        self.bind(n, self._reduced_out(n, self.maxproof(grouped)))

    def lower_reducesum(self, n: Node) -> None:
        x = self.get(n.inputs[0])
        rank = len(x.shape)
        axes = sorted(set(_reduce_axes(n, rank)))
        if rank - 1 not in axes:
            keep_shape = tuple(1 if k in axes else d for k, d in enumerate(x.shape))
            ridx = np.arange(x.rows).reshape(x.shape[:-1])
            groups: dict[tuple, list] = {}
            for pos in np.ndindex(*x.shape[:-1]):
                key = tuple(0 if k in axes else p for k, p in enumerate(pos))
                groups.setdefault(key, []).append(int(ridx[pos]))
            order = list(np.ndindex(*keep_shape[:-1]))
            terms = [[(1, x.id, r) for r in groups[k]] for k in order]
            cnt = max(len(v) for v in groups.values())
            acc = self.derived("sum", keep_shape, x.scale, terms, bounds=(cnt * min(x.lo, 0), cnt * max(x.hi, 0)))
            return self.bind(n, self.reshape(acc, self.out_shape(n), "out"))
        grouped, _ = self._group_last(x, axes)
        gm = self.masked(grouped)
        S = self.act("sum", grouped.shape[:-1] + (1,), x.scale, grouped.L * min(gm.lo, 0),
                     grouped.L * max(gm.hi, 0))
        self.dag.add_node("Sum", [gm], [S], self.layer)
        self.bind(n, self._reduced_out(n, S))

    def lower_maxpool(self, n: Node) -> None:
        x = self.get(n.inputs[0])
        kh, kw = n.attrs["kernel_shape"]
        sh, sw = n.attrs.get("strides", [kh, kw])
        N, C, H, W = x.shape
        Ho, Wo = (H - kh) // sh + 1, (W - kw) // sw + 1
        idx = self.index_of(x)
        win = np.empty((N, C, Ho, Wo, kh * kw), dtype=np.int64)
        for i in range(Ho):
            for j in range(Wo):
                win[:, :, i, j, :] = idx[:, :, i * sh:i * sh + kh, j * sw:j * sw + kw].reshape(N, C, -1)
        windows = self.relayout([x], win, "windows")
        self.bind(n, self.reshape(self.maxproof(windows), (N, C, Ho, Wo), "out"))

    # layout layers

    def lower_reshape(self, n: Node) -> None:
        x = self.get(n.inputs[0])
        self.bind(n, self.reshape(x, self.out_shape(n)))

    lower_flatten = lower_reshape

    def lower_transpose(self, n: Node) -> None:
        x = self.get(n.inputs[0])
        perm = n.attrs.get("perm", list(range(len(x.shape)))[::-1])
        self.bind(n, self.transpose(x, perm))

    def lower_reshapetrans(self, n: Node) -> None:
        x = self.get(n.inputs[0])
        idx = self.index_of(x).reshape(n.attrs["shape"]).transpose(n.attrs["perm"])
        self.bind(n, self.relayout([x], idx, "reshape_trans"))

    def lower_slice(self, n: Node) -> None:
        x = self.get(n.inputs[0])
        self.bind(n, self.relayout([x], self.index_of(x)[_slice_spec(n, x.shape)], "slice"))

    def lower_split(self, n: Node) -> None:
        x = self.get(n.inputs[0])
        ax = _axis(n.attrs.get("axis", 0), len(x.shape))
        sizes = n.attrs.get("split") or [x.shape[ax] // len(n.outputs)] * len(n.outputs)
        parts = np.split(self.index_of(x), np.cumsum(sizes)[:-1], axis=ax)
        self.bind(n, *[self.relayout([x], p, f"split{k}") for k, p in enumerate(parts)])

    def lower_concat(self, n: Node) -> None:
        first = self.get(n.inputs[0])
        sc = self.scale_of(first)
        srcs = []
        for i in n.inputs:
            v = self.get(i, sc)
            srcs.append(self.as_edge(v, self.g.shape(i)) if isinstance(v, tuple) else v)
        ax = _axis(n.attrs.get("axis", 0), len(srcs[0].shape))
        idx, off = [], 0
        for e in srcs:
            idx.append(self.index_of(e) + off)
            off += e.rows * e.L
        self.bind(n, self.relayout(srcs, np.concatenate(idx, axis=ax), "concat"))


def lower(g: ModelGraph, scale_bits: int = DEFAULT_SCALE_BITS,
          max_table_bits: int = DEFAULT_MAX_TABLE_BITS) -> tuple[BlockDag, LookupTablePlan]:
    """Lower every layer of g; raises UnsupportedOperatorError naming offending nodes."""
    dag = Lowerer(g, scale_bits, max_table_bits).lower()
    return dag, dag.tables


def lower_custom_conv(g: ModelGraph, scale_bits: int = DEFAULT_SCALE_BITS) -> BlockDag:
    """Lower a graph whose layers include CustomConv (fragment view of ``lower``)."""
    return lower(g, scale_bits)[0]


lower_nonlinearity = lower_argmax = lower_and = lower_custom_conv
