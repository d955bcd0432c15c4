"""BlockDag: basic-block instances wired by tensor edges.

Every edge is a tensor whose last axis is laid out as committed rows of length
``n = next_pow2(L)``. Edges come in four flavours: ``input`` and ``activation``
rows are committed by the prover; ``const`` rows are public data; ``derived``
rows are integer linear combinations of other rows plus a public offset, so
their commitments follow homomorphically and cost nothing to prove.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np

from ..algebra.field import next_pow2
from ..errors import FormatError, QuantizationOverflowError, ShapeError, WitnessInvalidError
from .tables import LookupTablePlan

COMMITTED = ("input", "activation")
FIELD_BITS = 254
SAFETY_MARGIN = 8

# block kinds a DAG node may carry
NODE_KINDS = frozenset({
    "Add", "Sub", "Eq", "Concat", "Mul", "MulConst", "Sum", "MatMul", "Permute", "CQ", "CQ2", "CQLin",
    "Div", "Mod", "BooleanCheck", "MaxProof", "CopyConstraint",
})
RESCALE_KINDS = ("Mul", "MulConst", "MatMul", "CQLin")


def safe_bits(scale_bits: int) -> int:
    return FIELD_BITS - 2 * scale_bits - SAFETY_MARGIN


@dataclass
class Edge:
    id: int
    name: str
    shape: tuple[int, ...]
    scale: int
    source: str
    lo: int = 0
    hi: int = 0
    data: Optional[list[list[int]]] = None
    terms: Optional[list[list[tuple[int, int, int]]]] = None
    offset: Optional[list[Optional[list[int]]]] = None

    @property
    def L(self) -> int:
        return self.shape[-1]

    @property
    def n(self) -> int:
        return next_pow2(self.L)

    @property
    def rows(self) -> int:
        return int(np.prod(self.shape[:-1])) if len(self.shape) > 1 else 1

    @property
    def committed(self) -> bool:
        return self.source in COMMITTED

    def to_json(self) -> dict:
        d: dict[str, Any] = {"id": self.id, "name": self.name, "shape": list(self.shape), "scale": self.scale,
                             "source": self.source, "lo": self.lo, "hi": self.hi}
        if self.data is not None:
            d["data"] = self.data
        if self.terms is not None:
            d["terms"] = [[list(t) for t in row] for row in self.terms]
            d["offset"] = self.offset
        return d

    @classmethod
    def from_json(cls, d: dict) -> "Edge":
        terms = None
        if d.get("terms") is not None:
            terms = [[(int(c), int(e), int(r)) for c, e, r in row] for row in d["terms"]]
        return cls(int(d["id"]), str(d["name"]), tuple(int(s) for s in d["shape"]), int(d["scale"]),
                   str(d["source"]), int(d["lo"]), int(d["hi"]), d.get("data"), terms, d.get("offset"))


@dataclass
class DagNode:
    id: int
    kind: str
    params: dict
    inputs: list[int]
    outputs: list[int]
    layer: str = ""

    def to_json(self) -> dict:
        return {"id": self.id, "kind": self.kind, "params": self.params, "inputs": self.inputs,
                "outputs": self.outputs, "layer": self.layer}

    @classmethod
    def from_json(cls, d: dict) -> "DagNode":
        if d["kind"] not in NODE_KINDS:
            raise FormatError(f"unknown DAG node kind {d['kind']!r}")
        return cls(int(d["id"]), str(d["kind"]), dict(d.get("params") or {}), [int(x) for x in d["inputs"]],
                   [int(x) for x in d["outputs"]], str(d.get("layer", "")))


@dataclass
class BlockDag:
    scale_bits: int
    edges: list[Edge] = field(default_factory=list)
    nodes: list[DagNode] = field(default_factory=list)
    matrices: dict[str, list[list[int]]] = field(default_factory=dict)
    inputs: dict[str, int] = field(default_factory=dict)
    outputs: dict[str, int] = field(default_factory=dict)
    tables: LookupTablePlan = field(default_factory=LookupTablePlan)

    # construction -------------------------------------------------------------

    def add_edge(self, name: str, shape: Sequence[int], scale: int, source: str, lo: int, hi: int,
                 **kw) -> Edge:
        shape = tuple(int(s) for s in shape) or (1,)
        e = Edge(len(self.edges), name, shape, scale, source, int(lo), int(hi), **kw)
        self.edges.append(e)
        return e

    def add_node(self, kind: str, inputs: Sequence[Edge], outputs: Sequence[Edge], layer: str = "",
                 **params) -> DagNode:
        if kind not in NODE_KINDS:
            raise ShapeError(f"unknown block kind {kind}")
        nd = DagNode(len(self.nodes), kind, params, [e.id for e in inputs], [e.id for e in outputs], layer)
        self.nodes.append(nd)
        return nd

    def edge(self, i: int) -> Edge:
        return self.edges[i]

    def producers(self) -> dict[int, DagNode]:
        return {o: nd for nd in self.nodes for o in nd.outputs}

    def kind_counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for nd in self.nodes:
            out[nd.kind] = out.get(nd.kind, 0) + 1
        return out

    def committed_edges(self) -> list[Edge]:
        return [e for e in self.edges if e.committed]

    # serialization ------------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "scale_bits": self.scale_bits,
            "edges": [e.to_json() for e in self.edges],
            "nodes": [nd.to_json() for nd in self.nodes],
            "matrices": self.matrices,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "tables": self.tables.to_json(),
        }

    @classmethod
    def from_json(cls, d: dict) -> "BlockDag":
        try:
            dag = cls(int(d["scale_bits"]), [Edge.from_json(e) for e in d["edges"]],
                      [DagNode.from_json(nd) for nd in d["nodes"]],
                      {k: [[int(v) for v in r] for r in m] for k, m in d.get("matrices", {}).items()},
                      {k: int(v) for k, v in d["inputs"].items()}, {k: int(v) for k, v in d["outputs"].items()},
                      LookupTablePlan.from_json(d.get("tables", {})))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed BlockDag: {exc}") from None
        dag.validate()
        return dag

    def digest(self) -> bytes:
        blob = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(b"zkt/dag" + blob).digest()

    # invariants ---------------------------------------------------------------

    def validate(self) -> None:
        made = {e.id for e in self.edges if e.source in ("input", "const")}
        for e in self.edges:
            if e.id != self.edges.index(e):
                raise FormatError("edge ids must be positional")
        for nd in self.nodes:
            for i in nd.inputs:
                if i not in made and self.edges[i].source != "derived":
                    raise FormatError(f"node {nd.id} ({nd.kind}) reads edge {i} before it is produced")
            for o in nd.outputs:
                if self.edges[o].source != "activation" or o in made:
                    raise FormatError(f"node {nd.id} writes edge {o}, which is not a fresh activation")
                made.add(o)
        for e in self.edges:
            if e.source == "activation" and e.id not in made:
                raise FormatError(f"activation edge {e.id} has no producer")
            if e.source == "derived":
                for row in e.terms or []:
                    for _, src, _ in row:
                        if src >= e.id:
                            raise FormatError(f"derived edge {e.id} refers forward to edge {src}")

    def lint_rescale(self) -> list[str]:
        """Every Mul/MulConst/MatMul/CQLin output whose scale exceeds the model
        scale must reach a rescale CQ2 before any other table lookup."""
        problems = []
        s = self.scale_bits
        consumers: dict[int, list[DagNode]] = {}
        for nd in self.nodes:
            for i in nd.inputs:
                consumers.setdefault(i, []).append(nd)
        derived_users: dict[int, list[Edge]] = {}
        for e in self.edges:
            if e.source == "derived":
                for row in e.terms or []:
                    for _, src, _ in row:
                        derived_users.setdefault(src, []).append(e)
        for nd in self.nodes:
            if nd.kind not in RESCALE_KINDS:
                continue
            for o in nd.outputs:
                if self.edges[o].scale <= s:
                    continue
                stack, seen, ok = [o], set(), False
                while stack:
                    cur = stack.pop()
                    if cur in seen:
                        continue
                    seen.add(cur)
                    for c in consumers.get(cur, []):
                        if c.kind == "CQ2":
                            spec = self.tables.get(c.params["table"]).fn
                            if spec["fn"] == "rescale":
                                ok = True
                            else:
                                problems.append(f"edge {o} reaches table {c.params['table']} unrescaled")
                        elif c.kind in ("Add", "Sub", "Concat", "Permute", "CopyConstraint"):
                            stack.extend(c.outputs)
                    stack.extend(d.id for d in derived_users.get(cur, []))
                if not ok and o not in self.outputs.values():
                    problems.append(f"edge {o} ({self.edges[o].name}) is never rescaled")
        return problems


# evaluation -----------------------------------------------------------------------

def _derived_rows(dag: BlockDag, e: Edge, vals: dict[int, list[list[int]]]) -> list[list[int]]:
    n = e.n
    out = []
    for r, row in enumerate(e.terms or []):
        acc = [0] * n
        for coef, src, sr in row:
            sv = vals[src][sr]
            if len(sv) == 1 and n > 1:
                acc = [a + coef * sv[0] for a in acc]
            elif len(sv) != n:
                raise ShapeError(f"derived edge {e.id}: row {r} mixes lengths {len(sv)} and {n}")
            else:
                acc = [a + coef * v for a, v in zip(acc, sv)]
        off = e.offset[r] if e.offset else None
        if off:
            acc = [a + (off[j] if j < len(off) else 0) for j, a in enumerate(acc)]
        out.append(acc)
    return out


def _const_rows(e: Edge) -> list[list[int]]:
    n = e.n
    return [list(r) + [0] * (n - len(r)) for r in e.data]


def tensor_to_rows(arr: np.ndarray, shape: Sequence[int]) -> list[list[int]]:
    a = np.asarray(arr, dtype=object).reshape(tuple(shape) or (1,))
    L = a.shape[-1]
    n = next_pow2(L)
    flat = a.reshape(-1, L)
    return [[int(v) for v in r] + [0] * (n - L) for r in flat]


def rows_to_tensor(rows: Sequence[Sequence[int]], shape: Sequence[int]) -> np.ndarray:
    shape = tuple(shape) or (1,)
    L = shape[-1]
    return np.array([int(v) for r in rows for v in r[:L]], dtype=object).reshape(shape)


def _lookup(dag: BlockDag, name: str):
    return dag.tables.get(name).table_map()


def _eval_node(dag: BlockDag, nd: DagNode, vals: dict[int, list[list[int]]]) -> list[list[list[int]]]:
    k, p = nd.kind, nd.params
    I = [vals[i] for i in nd.inputs]
    outs = [dag.edges[o] for o in nd.outputs]
    if k in ("Add", "Sub"):
        sg = 1 if k == "Add" else -1
        return [[[a + sg * b for a, b in zip(ra, rb)] for ra, rb in zip(I[0], I[1])]]
    if k == "Mul":
        return [[[a * b for a, b in zip(ra, rb)] for ra, rb in zip(I[0], I[1])]]
    if k == "MulConst":
        c = p["c"]
        return [[[c * a for a in r] for r in I[0]]]
    if k == "Concat":
        return [[list(r) for src in I for r in src]]
    if k == "Sum":
        return [[[sum(r)] for r in I[0]]]
    if k == "MatMul":
        A, B = I
        m = outs[0].n
        return [[[sum(a * b for a, b in zip(ra, B[j])) if j < len(B) else 0 for j in range(m)] for ra in A]]
    if k == "Permute":
        src = dag.edges[nd.inputs[0]]
        flat = [v for r in I[0] for v in r[:src.L]]
        o = outs[0]
        return [[[flat[p0 + p["p1"][j]] if j < o.L else 0 for j in range(o.n)] for p0 in p["p0"]]]
    if k == "CopyConstraint":
        srcs = [dag.edges[i] for i in nd.inputs]
        m = srcs[0].n
        flat = [v for src in I for r in src for v in r[:m]]
        o = outs[0]
        sigma = p["sigma"]
        rows = []
        for i in range(o.rows):
            row = []
            for j in range(o.n):
                s = sigma[i * o.n + j]
                row.append(0 if s is None or s == -1 else (s[1] if isinstance(s, (list, tuple)) else flat[s]))
            rows.append(row)
        return [rows]
    if k == "CQ2":
        t = _lookup(dag, p["table"])
        try:
            return [[[t[v] for v in r] for r in I[0]]]
        except KeyError as exc:
            raise QuantizationOverflowError(outs[0].name, f"value {exc.args[0]} outside table {p['table']}") from None
    if k == "CQ":
        t = _lookup(dag, p["table"])
        for r in I[0]:
            for v in r:
                if v not in t:
                    raise WitnessInvalidError(f"node {nd.id}: value {v} outside range table {p['table']}")
        return []
    if k == "CQLin":
        W = dag.matrices[p["matrix"]]
        o = outs[0]
        return [[[sum(w * v for w, v in zip(W[q], x)) if q < len(W) else 0 for q in range(o.n)] for x in I[0]]]
    if k in ("Div", "Mod"):
        a = I[0]
        b = I[1] if len(I) > 1 else [[p["divisor"]] * len(r) for r in a]
        qs, rs = [], []
        for ra, rb in zip(a, b):
            if any(v <= 0 for v in rb):
                raise QuantizationOverflowError(outs[0].name, "divisor must be positive")
            qs.append([x // y for x, y in zip(ra, rb)])
            rs.append([x % y for x, y in zip(ra, rb)])
        return [qs, rs]
    if k == "MaxProof":
        L = dag.edges[nd.inputs[0]].L
        return [[[max(r[:L])] for r in I[0]]]
    if k == "BooleanCheck":
        L = dag.edges[nd.inputs[0]].L
        for r in I[0]:
            if any(v not in (0, 1) for v in r[:L]):
                raise WitnessInvalidError(f"node {nd.id}: non-Boolean value")
        return []
    if k == "Eq":
        return []
    raise ShapeError(f"cannot evaluate node kind {k}")


def evaluate_dag(dag: BlockDag, inputs: dict[int, list[list[int]]], check_bounds: bool = True
                 ) -> dict[int, list[list[int]]]:
    """Signed-integer values of every edge (full padded rows)."""
    vals: dict[int, list[list[int]]] = {}
    limit = 1 << safe_bits(dag.scale_bits)
    producers = dag.producers()
    pending = {nd.id: nd for nd in dag.nodes}
    node_order = list(dag.nodes)
    ni = 0
    for e in dag.edges:
        if e.source == "input":
            rows = inputs[e.id]
            if len(rows) != e.rows or any(len(r) != e.n for r in rows):
                raise ShapeError(f"input edge {e.name}: expected {e.rows} rows of {e.n}")
            vals[e.id] = [list(r) for r in rows]
        elif e.source == "const":
            vals[e.id] = _const_rows(e)
        elif e.source == "derived":
            vals[e.id] = _derived_rows(dag, e, vals)
        else:
            nd = producers[e.id]
            while ni < len(node_order) and node_order[ni].id <= nd.id:
                cur = node_order[ni]
                ni += 1
                res = _eval_node(dag, cur, vals)
                for o, rows in zip(cur.outputs, res):
                    vals[o] = rows
                pending.pop(cur.id, None)
        if check_bounds and e.id in vals:
            for r in vals[e.id]:
                for v in r:
                    if abs(v) >= limit:
                        raise QuantizationOverflowError(e.name, f"|{v}| exceeds 2^{safe_bits(dag.scale_bits)}")
    for nd in node_order[ni:]:
        for o, rows in zip(nd.outputs, _eval_node(dag, nd, vals)):
            vals[o] = rows
    return vals
