"""Fold schedules: balanced tree (parallel per level) and left/right chains."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from ..algebra.curve import GT
from ..blocks.base import BlockProof, testset_for
from ..errors import ArgumentError, FoldError
from ..pcs.kzg import Srs
from .accumulator import AccInstance, Accumulator, fold, fold_verify, relax_proof

SCHEDULES = ("tree", "left", "right")


@dataclass(frozen=True)
class FoldNode:
    """One fold: refs index the tree's item list (leaves first, then node results in order)."""

    left: int
    right: int
    pf: tuple[tuple[GT, ...], ...]
    result: AccInstance


@dataclass
class FoldTree:
    leaves: list[AccInstance]
    nodes: list[FoldNode] = field(default_factory=list)

    def item(self, ref: int) -> AccInstance:
        n = len(self.leaves)
        return self.leaves[ref] if ref < n else self.nodes[ref - n].result

    @property
    def root(self) -> AccInstance:
        if not self.leaves:
            raise ArgumentError("empty fold tree")
        return self.nodes[-1].result if self.nodes else self.leaves[0]

    @property
    def depth(self) -> int:
        n = len(self.leaves)
        depth = [0] * (n + len(self.nodes))
        for k, node in enumerate(self.nodes):
            depth[n + k] = 1 + max(depth[node.left], depth[node.right])
        return depth[-1] if depth else 0

    def triples(self):
        """(left x, right x, pf, result x) for every internal node."""
        for node in self.nodes:
            yield self.item(node.left), self.item(node.right), node.pf, node.result

    def replay(self, srs: Srs) -> list[bool]:
        """fold_verify on every node; also checks the refs form a tree over all leaves."""
        if not self.leaves:
            return [False]
        n = len(self.leaves)
        used = set()
        out = []
        for k, node in enumerate(self.nodes):
            ok = 0 <= node.left < n + k and 0 <= node.right < n + k and node.left != node.right
            ok = ok and node.left not in used and node.right not in used
            used.update((node.left, node.right))
            if ok:
                deg = testset_for(node.result.kind, node.result.static, srs).degree
                ok = fold_verify(self.item(node.left), self.item(node.right), node.pf, node.result, degree=deg)
            out.append(ok)
        # every leaf and every non-root node result is consumed exactly once
        if len(used) != n + len(self.nodes) - 1:
            out.append(False)
        return out


def _pairs_tree(refs: list[int]) -> tuple[list[tuple[int, int]], Optional[int]]:
    pairs = [(refs[i], refs[i + 1]) for i in range(0, len(refs) - 1, 2)]
    return pairs, (refs[-1] if len(refs) % 2 else None)


def fold_accumulators(leaves: Sequence[Accumulator], srs: Srs, workers: int = 1,
                      schedule: str = "tree") -> tuple[Accumulator, FoldTree]:
    if not leaves:
        raise ArgumentError("fold_tree needs at least one proof")
    if schedule not in SCHEDULES:
        raise ArgumentError(f"unknown schedule {schedule!r}")
    k0 = leaves[0].x
    for a in leaves[1:]:
        if a.x.kind != k0.kind or a.x.static != k0.static:
            raise FoldError("fold_tree: mixed block kinds or static parameters")
    tree = FoldTree([a.x for a in leaves])
    accs: list[Accumulator] = list(leaves)

    def add(left: int, right: int, res: tuple[Accumulator, list]) -> int:
        acc, pf = res
        tree.nodes.append(FoldNode(left, right, tuple(tuple(v) for v in pf), acc.x))
        accs.append(acc)
        return len(accs) - 1

    if schedule == "tree":
        refs = list(range(len(leaves)))
        pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
        try:
            while len(refs) > 1:
                pairs, carry = _pairs_tree(refs)
                job: Callable = lambda p: fold(accs[p[0]], accs[p[1]], srs)
                results = list(pool.map(job, pairs)) if pool else [job(p) for p in pairs]
                refs = [add(l, r, res) for (l, r), res in zip(pairs, results)]
                if carry is not None:
                    refs.append(carry)
        finally:
            if pool:
                pool.shutdown()
        root = accs[refs[0]]
    elif schedule == "left":
        cur = 0
        for i in range(1, len(leaves)):
            cur = add(cur, i, fold(accs[cur], accs[i], srs))
        root = accs[cur]
    else:
        cur = len(leaves) - 1
        for i in range(len(leaves) - 2, -1, -1):
            cur = add(i, cur, fold(accs[i], accs[cur], srs))
        root = accs[cur]
    return root, tree


def fold_tree(proofs: Sequence[BlockProof], srs: Srs, workers: int = 1,
              schedule: str = "tree") -> tuple[Accumulator, FoldTree]:
    """Fold same-kind proofs; the balanced schedule pairs items 2i and 2i+1 per level."""
    if not proofs:
        raise ArgumentError("fold_tree needs at least one proof")
    return fold_accumulators([relax_proof(p, srs)[1] for p in proofs], srs, workers, schedule)


def expected_depth(n: int) -> int:
    return math.ceil(math.log2(n)) if n > 1 else 0
