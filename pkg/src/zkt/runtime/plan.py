"""Block instances of a DAG and the public facts each one must be bound to.

The prover and the verifier walk the same item list. For every item the
verifier knows, from the DAG and the edge commitments alone, the block kind,
its static parameters, its public inputs and the commitments that must sit in
particular instance slots; :func:`expect` computes exactly that.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from ..algebra.curve import G1
from ..algebra.field import MODULUS as P
from ..blocks.aurora import SharedRandomness, matmul_derived, permute_derived
from ..blocks.base import BlockKind, Static, make_static
from ..blocks.cqlin import FixedMatrix, cqlin_static, preprocess_matrix
from ..blocks.lookup import LookupTable, public_cq_static
from ..iop.protocols import PermutationMap, _sigma_encode
from ..pcs.kzg import Srs
from ..transpiler.dag import BlockDag, DagNode

WHOLE_NODE = frozenset({"Concat", "MatMul", "Permute", "CopyConstraint"})


@dataclass(frozen=True)
class Item:
    node: int
    row: int  # -1 when one proof covers the whole node
    kind: BlockKind

    @property
    def label(self) -> str:
        return f"node {self.node} ({self.kind.value})" + (f" row {self.row}" if self.row >= 0 else "")


def node_rows(dag: BlockDag, nd: DagNode) -> int:
    return max(dag.edges[i].rows for i in nd.inputs)


def plan_items(dag: BlockDag) -> list[Item]:
    out = []
    for nd in dag.nodes:
        kind = BlockKind(nd.kind)
        if nd.kind in WHOLE_NODE:
            out.append(Item(nd.id, -1, kind))
        else:
            out.extend(Item(nd.id, r, kind) for r in range(node_rows(dag, nd)))
    return out


def shared_randomness(dag_digest: bytes, committed: Mapping[int, Sequence[G1]]) -> SharedRandomness:
    flat = [c for eid in sorted(committed) for c in committed[eid]]
    return SharedRandomness.derive([dag_digest] + flat)


def permutation_map(dag: BlockDag, nd: DagNode) -> PermutationMap:
    srcs = [dag.edges[i] for i in nd.inputs]
    out = dag.edges[nd.outputs[0]]
    sigma = [tuple(s) if isinstance(s, list) else s for s in nd.params["sigma"]]
    sigma = [None if (isinstance(s, int) and s < 0) else s for s in sigma]
    return PermutationMap.build(sum(e.rows for e in srcs), srcs[0].n, out.rows, out.n, sigma)


@dataclass
class Context:
    """Public model data shared by proving and verification."""

    dag: BlockDag
    srs: Srs
    coms: dict[int, list[G1]]
    rand: SharedRandomness
    _tables: dict = field(default_factory=dict)
    _matrices: dict = field(default_factory=dict)

    def table(self, name: str) -> LookupTable:
        if name not in self._tables:
            self._tables[name] = self.dag.tables.get(name).build()
        return self._tables[name]

    def matrix(self, name: str) -> FixedMatrix:
        if name not in self._matrices:
            self._matrices[name] = FixedMatrix.from_ints(self.dag.matrices[name], name)
        return self._matrices[name]

    def com(self, eid: int, r: int) -> G1:
        cs = self.coms[eid]
        return cs[r if len(cs) > 1 else 0]


@dataclass(frozen=True)
class Expect:
    kind: BlockKind
    static: Static
    pi: tuple[int, ...] = ()
    g1: dict = field(default_factory=dict)   # slot index -> required G1
    g2: dict = field(default_factory=dict)   # slot index -> required G2

    def mismatch(self, kind, static, pi, g1, g2) -> Optional[str]:
        """Why a proof or leaf does not match this expectation (None when it does)."""
        if kind is not self.kind:
            return f"kind {getattr(kind, 'value', kind)} != {self.kind.value}"
        if static != self.static:
            return "static parameters differ"
        if tuple(pi) != tuple(v % P for v in self.pi):
            return "public inputs differ"
        for slots, want in ((g1, self.g1), (g2, self.g2)):
            for i, v in want.items():
                if i >= len(slots) or slots[i] != v:
                    return f"slot {i} is not bound to the expected commitment"
        return None


def expect(ctx: Context, item: Item) -> Expect:
    dag, srs = ctx.dag, ctx.srs
    nd = dag.nodes[item.node]
    k, r = nd.kind, item.row
    ins = [dag.edges[i] for i in nd.inputs]
    outs = [dag.edges[o] for o in nd.outputs]
    c = ctx.com
    kind = item.kind
    if k in ("Add", "Sub"):
        return Expect(kind, make_static(), (), {0: c(ins[0].id, r), 1: c(ins[1].id, r), 2: c(outs[0].id, r)})
    if k == "Eq":
        return Expect(kind, make_static(), (), {0: c(ins[0].id, r), 1: c(ins[1].id, r)})
    if k == "Mul":
        return Expect(kind, make_static(n=outs[0].n), (),
                      {0: c(ins[0].id, r), 1: c(ins[1].id, r), 2: c(outs[0].id, r)})
    if k == "MulConst":
        return Expect(kind, make_static(c=nd.params["c"] % P), (), {0: c(ins[0].id, r), 1: c(outs[0].id, r)})
    if k == "Sum":
        return Expect(kind, make_static(n=ins[0].n), (), {0: c(ins[0].id, r), 1: c(outs[0].id, r)})
    if k == "CQ2":
        st = public_cq_static(srs, ctx.table(nd.params["table"]), ins[0].n, True)
        return Expect(kind, st, (), {0: c(ins[0].id, r), 1: c(outs[0].id, r)})
    if k == "CQ":
        st = public_cq_static(srs, ctx.table(nd.params["table"]), ins[0].n, False)
        return Expect(kind, st, (), {0: c(ins[0].id, r)})
    if k == "CQLin":
        W = ctx.matrix(nd.params["matrix"])
        preprocess_matrix(srs, W)
        return Expect(kind, cqlin_static(srs, W, ctx.rand.alpha), (), {0: c(ins[0].id, r), 1: c(outs[0].id, r)})
    if k == "Concat":
        coms = [x for e in ins for x in ctx.coms[e.id]] + list(ctx.coms[outs[0].id])
        return Expect(kind, make_static(k=sum(e.rows for e in ins), parts=len(ins)),
                      tuple(e.rows for e in ins), dict(enumerate(coms)))
    if k == "MatMul":
        A, B = ins
        C = outs[0]
        a, b, cc, d = matmul_derived(srs, ctx.coms[A.id], ctx.coms[B.id], ctx.coms[C.id], ctx.rand, B.rows, C.n)
        return Expect(kind, make_static(n=A.n, m=C.n), (), {0: a, 1: b, 2: cc}, {1: d})
    if k == "Permute":
        A, B = ins[0], outs[0]
        a, b, cd, dd = permute_derived(srs, ctx.coms[A.id], ctx.coms[B.id], ctx.rand, A.L, A.n,
                                       nd.params["p0"], nd.params["p1"], B.L, B.n)
        return Expect(kind, make_static(n=A.n, n2=B.n), (), {0: a, 1: b}, {0: cd, 1: dd})
    if k in ("Div", "Mod"):
        bits, divisor = nd.params["bits"], nd.params.get("divisor", 0)
        g1 = {0: c(ins[0].id, r), 1: c(outs[0].id, r), 2: c(outs[1].id, r)}
        if not divisor:
            g1[3] = c(ins[1].id, r)
        return Expect(kind, make_static(n=ins[0].n, bits=bits, divisor=divisor), (), g1)
    if k == "BooleanCheck":
        return Expect(kind, make_static(n=ins[0].n, n_log=ins[0].L), (), {0: c(ins[0].id, r)})
    if k == "MaxProof":
        st = make_static(n=ins[0].n, m=outs[0].n, n_log=ins[0].L, bits=nd.params["bits"])
        return Expect(kind, st, (), {0: c(ins[0].id, r), 1: c(outs[0].id, r)})
    if k == "CopyConstraint":
        pm = permutation_map(dag, nd)
        coms = [x for e in ins for x in ctx.coms[e.id]] + list(ctx.coms[outs[0].id])
        st = make_static(p1=pm.p1, m=pm.m, p2=pm.p2, n=pm.n, sigma=_sigma_encode(pm.sigma))
        return Expect(kind, st, (), dict(enumerate(coms)))
    raise ValueError(f"no expectation for node kind {k}")
