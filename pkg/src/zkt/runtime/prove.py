"""prove_model: per-block proofs, grouped by (kind, static) and folded."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional, Sequence

from ..accumulation.tree import fold_tree
from ..blocks.base import BlockProof
from ..blocks.cqlin import preprocess_matrix, prove_cqlin
from ..blocks.linear import prove_add, prove_concat, prove_eq, prove_sub
from ..blocks.lookup import preprocess_table, prove_cq, prove_cq2
from ..blocks.aurora import prove_matmul, prove_permute, prove_sum
from ..blocks.mul import prove_mul, prove_mulconst
from ..errors import ArgumentError, DegreeError, ShapeError, WitnessInvalidError
from ..iop.divmod import div_mod_prove
from ..iop.protocols import boolean_check, copy_constraint, max_proof
from ..pcs.kzg import Srs
from ..transpiler.dag import BlockDag
from .bundle import FoldGroup, ProofBundle, PublicIO, group_key
from .plan import Context, Item, permutation_map, plan_items, shared_randomness
from .witness import WitnessStore

log = logging.getLogger(__name__)


def _map(pool: Optional[ThreadPoolExecutor], fn: Callable, xs: Sequence) -> list:
    return list(pool.map(fn, xs)) if pool else [fn(x) for x in xs]


def _materialize(store: WitnessStore, items: Sequence[Item]) -> None:
    """Commit const/derived rows up front so the store is read-only while proving."""
    dag = store.dag
    need = []
    for it in items:
        nd = dag.nodes[it.node]
        for eid in list(nd.inputs) + list(nd.outputs):
            if eid not in store.rows and eid not in need:
                need.append(eid)
    for eid in sorted(need):
        store.edge_rows(eid)


def prove_item(ctx: Context, store: WitnessStore, item: Item, seed: bytes = b"") -> BlockProof:
    dag, srs = ctx.dag, ctx.srs
    nd = dag.nodes[item.node]
    k, r, p = nd.kind, item.row, nd.params
    row = store.row
    I, O = nd.inputs, nd.outputs
    sub_seed = seed + f"/{nd.id}/{r}".encode()
    if k == "Add":
        return prove_add(row(I[0], r), row(I[1], r), row(O[0], r))
    if k == "Sub":
        return prove_sub(row(I[0], r), row(I[1], r), row(O[0], r))
    if k == "Eq":
        return prove_eq(row(I[0], r), row(I[1], r))
    if k == "Mul":
        return prove_mul(srs, row(I[0], r), row(I[1], r), row(O[0], r))
    if k == "MulConst":
        return prove_mulconst(row(I[0], r), row(O[0], r), p["c"])
    if k == "Sum":
        return prove_sum(srs, row(I[0], r), row(O[0], r))
    if k == "CQ2":
        return prove_cq2(srs, row(I[0], r), row(O[0], r), ctx.table(p["table"]))
    if k == "CQ":
        return prove_cq(srs, row(I[0], r), ctx.table(p["table"]))
    if k == "CQLin":
        return prove_cqlin(srs, row(I[0], r), row(O[0], r), ctx.matrix(p["matrix"]), ctx.rand.alpha)
    if k == "Concat":
        ins = [x for e in I for x in store.edge_rows(e)]
        return prove_concat(ins, store.edge_rows(O[0]), [dag.edges[e].rows for e in I])
    if k == "MatMul":
        return prove_matmul(srs, store.edge_rows(I[0]), store.edge_rows(I[1]), store.edge_rows(O[0]), ctx.rand)
    if k == "Permute":
        A, B = dag.edges[I[0]], dag.edges[O[0]]
        return prove_permute(srs, store.edge_rows(A.id), store.edge_rows(B.id), p["p0"], p["p1"], ctx.rand,
                             A.L, B.L)
    if k in ("Div", "Mod"):
        b = p["divisor"] if p.get("divisor") else row(I[1], r)
        return div_mod_prove(srs, row(I[0], r), b, row(O[0], r), row(O[1], r), p["bits"], k)
    if k == "BooleanCheck":
        return boolean_check(srs, row(I[0], r), dag.edges[I[0]].L, sub_seed)
    if k == "MaxProof":
        return max_proof(srs, row(I[0], r), row(O[0], r), dag.edges[I[0]].L, p["bits"], sub_seed)
    if k == "CopyConstraint":
        ins = [x for e in I for x in store.edge_rows(e)]
        return copy_constraint(srs, ins, store.edge_rows(O[0]), permutation_map(dag, nd), sub_seed)
    raise ArgumentError(f"cannot prove node kind {k}")


def preprocess_model(dag: BlockDag, srs: Srs, pool: Optional[ThreadPoolExecutor] = None) -> None:
    """Lookup tables and CQLin matrices the DAG uses, cached on the SRS."""
    ctx = Context(dag, srs, {}, None)
    tables = sorted({nd.params["table"] for nd in dag.nodes if nd.kind in ("CQ", "CQ2")})
    mats = sorted({nd.params["matrix"] for nd in dag.nodes if nd.kind == "CQLin"})
    _map(pool, lambda t: preprocess_table(srs, ctx.table(t)), tables)
    for m in mats:
        preprocess_matrix(srs, ctx.matrix(m))


def prove_model(dag: BlockDag, store: WitnessStore, srs: Srs, workers: int = 1, seed: bytes = b"",
                schedule: str = "tree", timings: Optional[dict] = None) -> ProofBundle:
    if workers < 1:
        raise ArgumentError("workers must be >= 1")
    t0 = time.perf_counter()
    digest = dag.digest()
    items = plan_items(dag)
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        preprocess_model(dag, srs, pool)
        t_pre = time.perf_counter()
        _materialize(store, items)
        committed = store.committed_commitments()
        rand = shared_randomness(digest, committed)
        ctx = Context(dag, srs, {e.id: store.commitments(e.id) for e in dag.edges if e.id in store.rows}, rand)

        def one(it: Item) -> BlockProof:
            try:
                return prove_item(ctx, store, it, seed)
            except (WitnessInvalidError, ShapeError, DegreeError) as exc:
                nd = dag.nodes[it.node]
                raise type(exc)(f"block {it.label} [{nd.layer}]: {exc}") from exc

        proofs = _map(pool, one, items)
    finally:
        if pool:
            pool.shutdown()
    t_blocks = time.perf_counter()
    groups: dict[bytes, list[BlockProof]] = {}
    standalone = []
    for it, pf in zip(items, proofs):
        if it.kind.foldable:
            groups.setdefault(group_key(pf.kind, pf.static), []).append(pf)
        else:
            standalone.append(pf)
    folded = []
    for pfs in groups.values():
        _, tree = fold_tree(pfs, srs, workers, schedule)
        folded.append(FoldGroup(pfs[0].kind, pfs[0].static, tree))
    t_fold = time.perf_counter()
    io = PublicIO.from_store(dag, store)
    if timings is not None:
        timings.update(preprocess=t_pre - t0, blocks=t_blocks - t_pre, fold=t_fold - t_blocks,
                       total=t_fold - t0)
    log.info("proved %d blocks (%d fold groups, %d standalone) in %.2fs", len(items), len(folded),
             len(standalone), t_fold - t0)
    return ProofBundle(digest, srs.digest(), dag.scale_bits, committed, folded, standalone, io)

