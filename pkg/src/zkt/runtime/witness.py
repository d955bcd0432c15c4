"""Witness generation: fixed-point evaluation plus row commitments.

Input and activation rows are committed by the prover. Const rows commit to
public data and derived rows follow homomorphically from their sources, so the
verifier recomputes both with :func:`public_commitments`.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from ..algebra.curve import G1, msm
from ..algebra.field import MODULUS as P
from ..blocks.common import Row, commit_values
from ..pcs.kzg import Srs
from ..transpiler.dag import BlockDag, Edge, evaluate_dag
from ..transpiler.evaluate import input_rows


def _field_row(vals) -> list[int]:
    return [int(v) % P for v in vals]


@dataclass
class WitnessStore:
    """Edge values (signed, padded rows) and committed rows; write-once per edge."""

    dag: BlockDag
    srs: Srs
    values: dict[int, list[list[int]]] = field(default_factory=dict)
    rows: dict[int, list[Row]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.rows)

    def put(self, eid: int, rows: list[Row]) -> None:
        if eid in self.rows:
            raise ValueError(f"edge {eid} already materialized")
        self.rows[eid] = rows

    def edge_rows(self, eid: int) -> list[Row]:
        """Rows of any edge; const and derived rows are committed on first use."""
        if eid not in self.rows:
            self.put(eid, [commit_values(self.srs, _field_row(v)) for v in self.values[eid]])
        return self.rows[eid]

    def row(self, eid: int, r: int) -> Row:
        rows = self.edge_rows(eid)
        return rows[r if len(rows) > 1 else 0]

    def commitments(self, eid: int) -> list[G1]:
        return [r.com for r in self.edge_rows(eid)]

    def committed_commitments(self) -> dict[int, list[G1]]:
        return {e.id: self.commitments(e.id) for e in self.dag.committed_edges()}


def generate_witness(dag: BlockDag, inputs: Mapping, srs: Srs, workers: int = 1, quantized: bool = False,
                     check_bounds: bool = True) -> WitnessStore:
    """Evaluate the DAG and commit every input/activation row.

    ``inputs`` maps graph input names to real (or, with ``quantized``, already
    scaled integer) arrays; integer keys are taken as edge ids with ready rows.
    """
    store = WitnessStore(dag, srs)
    if not dag.edges:
        return store
    if inputs and all(isinstance(k, int) for k in inputs):
        rows_in = {int(k): [list(map(int, r)) for r in v] for k, v in inputs.items()}
    else:
        rows_in = input_rows(dag, {k: np.asarray(v) for k, v in inputs.items()}, quantized)
    store.values = evaluate_dag(dag, rows_in, check_bounds)
    jobs = [(e.id, r) for e in dag.committed_edges() for r in range(len(store.values[e.id]))]

    def commit(job):
        eid, r = job
        return commit_values(srs, _field_row(store.values[eid][r]))

    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(commit, jobs))
    else:
        done = [commit(j) for j in jobs]
    grouped: dict[int, list[Row]] = {}
    for (eid, _), row in zip(jobs, done):
        grouped.setdefault(eid, []).append(row)
    for eid, rows in grouped.items():
        store.put(eid, rows)
    return store


def _derived_commitments(srs: Srs, e: Edge, coms: Mapping[int, list[G1]]) -> list[G1]:
    out = []
    for r, row in enumerate(e.terms or []):
        pts = [coms[src][sr] for _, src, sr in row]
        cs = [c % P for c, _, _ in row]
        acc = msm(pts, cs) if pts else G1.zero()
        off = e.offset[r] if e.offset else None
        if off:
            acc = acc + commit_values(srs, _field_row(list(off) + [0] * (e.n - len(off)))).com
        out.append(acc)
    return out


def public_commitments(dag: BlockDag, srs: Srs, committed: Mapping[int, list[G1]],
                       cache: Optional[dict] = None) -> dict[int, list[G1]]:
    """Commitments for every edge, from the prover's input/activation commitments."""
    coms: dict[int, list[G1]] = {}
    for e in dag.edges:
        if e.committed:
            coms[e.id] = list(committed[e.id])
        elif e.source == "const":
            key = ("const-edge", e.id)
            if cache is not None and key in cache:
                coms[e.id] = cache[key]
            else:
                n = e.n
                coms[e.id] = [commit_values(srs, _field_row(list(r) + [0] * (n - len(r)))).com for r in e.data]
                if cache is not None:
                    cache[key] = coms[e.id]
        else:
            coms[e.id] = _derived_commitments(srs, e, coms)
    return coms
