"""verify_model: re-derive every block instance, replay folds, decide, check standalone proofs."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

from ..accumulation.accumulator import decide
from ..algebra.field import MODULUS as P
from ..blocks.common import commit_values
from ..errors import FormatError, MismatchError
from ..iop.dispatch import verify_standalone_report
from ..pcs.kzg import Srs
from ..transpiler.dag import BlockDag
from .bundle import ProofBundle, PublicIO, group_key
from .plan import Context, Expect, Item, expect, plan_items, shared_randomness
from .witness import public_commitments


@dataclass
class Component:
    name: str
    ok: bool
    detail: str = ""


@dataclass
class VerifierReport:
    ok: bool = True
    components: list[Component] = field(default_factory=list)
    timing: dict[str, float] = field(default_factory=dict)

    def record(self, name: str, ok: bool, detail: str = "") -> bool:
        self.components.append(Component(name, bool(ok), detail))
        if not ok:
            self.ok = False
        return bool(ok)

    @property
    def first_failure(self) -> Optional[Component]:
        return next((c for c in self.components if not c.ok), None)

    def by_prefix(self, prefix: str) -> list[Component]:
        return [c for c in self.components if c.name.startswith(prefix)]

    def summary(self) -> str:
        if self.ok:
            return f"accept ({len(self.components)} components)"
        c = self.first_failure
        return f"reject at {c.name}" + (f": {c.detail}" if c.detail else "")


class _Stop(Exception):
    pass


def check_header(dag: BlockDag, bundle: ProofBundle, srs: Srs) -> None:
    if bundle.dag_digest != dag.digest():
        raise MismatchError("proof bundle was produced for a different compiled model")
    if bundle.srs_digest != srs.digest():
        raise MismatchError("proof bundle was produced with a different SRS")
    if bundle.scale_bits != dag.scale_bits:
        raise MismatchError(f"bundle scale_bits {bundle.scale_bits} != model scale_bits {dag.scale_bits}")


def _check_io(dag: BlockDag, srs: Srs, bundle: ProofBundle, coms: dict, io: Optional[PublicIO], rep, stop):
    bio = bundle.io
    sources = [("bundle", bio)] + ([("io", io)] if io is not None else [])
    for tag, pio in sources:
        ok = set(pio.inputs) == set(dag.inputs) and set(pio.outputs) == set(dag.outputs)
        stop(rep.record(f"io/{tag}/names", ok, "" if ok else "input/output names differ from the model"))
        for name, eid in sorted(dag.inputs.items()):
            ok = list(pio.inputs[name]) == list(coms[eid])
            stop(rep.record(f"io/{tag}/input {name}", ok, "" if ok else "input commitment mismatch"))
        for name, eid in sorted(dag.outputs.items()):
            e = dag.edges[eid]
            rows = pio.output_rows.get(name, [])
            ok = list(pio.outputs[name]) == list(coms[eid]) and len(rows) == len(coms[eid])
            ok = ok and all(len(r) == e.n for r in rows) and pio.output_scales.get(name) == e.scale
            if ok:
                ok = all(commit_values(srs, [v % P for v in r]).com == c for r, c in zip(rows, coms[eid]))
            stop(rep.record(f"io/{tag}/output {name}", ok, "" if ok else "output values do not open the commitment"))
    if io is not None:
        ok = io.output_rows == bio.output_rows
        stop(rep.record("io/outputs-agree", ok, "" if ok else "io file and bundle disagree on outputs"))


def verify_model(dag: BlockDag, bundle: ProofBundle, srs: Srs, io: Optional[PublicIO] = None,
                 fail_fast: bool = True) -> VerifierReport:
    """Accept iff every component accepts; the first failure is recorded in the report."""
    rep = VerifierReport()
    t0 = time.perf_counter()
    check_header(dag, bundle, srs)

    def stop(ok: bool) -> None:
        if not ok and fail_fast:
            raise _Stop

    try:
        _verify(dag, bundle, srs, io, rep, stop)
    except _Stop:
        pass
    except FormatError as exc:
        rep.record("format", False, str(exc))
    rep.timing["total"] = time.perf_counter() - t0
    return rep


def _verify(dag, bundle, srs, io, rep, stop) -> None:
    t0 = time.perf_counter()
    want_ids = [e.id for e in dag.committed_edges()]
    ok = sorted(bundle.commitments) == want_ids and all(
        len(bundle.commitments[e]) == dag.edges[e].rows for e in want_ids)
    stop(rep.record("commitments/shape", ok, "" if ok else "edge commitment table does not match the model"))
    if not ok:
        return
    coms = public_commitments(dag, srs, bundle.commitments, srs._cache.setdefault(("zkt-const", dag.digest()), {}))
    _check_io(dag, srs, bundle, coms, io, rep, stop)
    ctx = Context(dag, srs, coms, shared_randomness(dag.digest(), bundle.commitments))
    items = plan_items(dag)
    expects: list[tuple[Item, Expect]] = [(it, expect(ctx, it)) for it in items]
    rep.timing["instances"] = time.perf_counter() - t0

    # fold groups ------------------------------------------------------------------
    t1 = time.perf_counter()
    groups: dict[bytes, list[tuple[Item, Expect]]] = {}
    for it, ex in expects:
        if it.kind.foldable:
            groups.setdefault(group_key(ex.kind, ex.static), []).append((it, ex))
    ok = len(groups) == len(bundle.groups)
    stop(rep.record("fold/groups", ok, "" if ok else f"expected {len(groups)} fold groups, got {len(bundle.groups)}"))
    for gi, (members, g) in enumerate(zip(groups.values(), bundle.groups)):
        name = f"fold[{gi}:{members[0][1].kind.value}]"
        ex0 = members[0][1]
        ok = g.kind is ex0.kind and g.static == ex0.static and len(g.tree.leaves) == len(members)
        stop(rep.record(f"{name}/shape", ok, "" if ok else "group kind, parameters or leaf count differ"))
        if not ok:
            continue
        for (it, ex), leaf in zip(members, g.tree.leaves):
            why = ex.mismatch(leaf.kind, leaf.static, leaf.pi, leaf.g1, leaf.g2)
            if why is None and (leaf.b != 1 or leaf.mu != 1):
                why = "leaf is not a fresh proof instance"
            stop(rep.record(f"{name}/leaf {it.label}", why is None, why or ""))
        res = g.tree.replay(srs)
        bad = [k for k, v in enumerate(res) if not v]
        stop(rep.record(f"{name}/replay", not bad, "" if not bad else f"fold step {bad[0]} fails fold_verify"))
        ok = decide(g.accumulator, srs)
        stop(rep.record(f"{name}/decide", ok, "" if ok else "decider rejects the final accumulator"))
    rep.timing["fold"] = time.perf_counter() - t1

    # standalone proofs ------------------------------------------------------------
    t2 = time.perf_counter()
    alone = [(it, ex) for it, ex in expects if not it.kind.foldable]
    ok = len(alone) == len(bundle.standalone)
    stop(rep.record("standalone/count", ok, "" if ok else f"expected {len(alone)} standalone proofs"))
    for (it, ex), pf in zip(alone, bundle.standalone):
        name = f"standalone/{it.label}"
        why = ex.mismatch(pf.kind, pf.static, pf.pi, pf.g1, pf.g2)
        if why is None:
            try:
                v = verify_standalone_report(pf, srs)
            except FormatError as exc:
                why = f"malformed proof: {exc}"
            else:
                why = None if v.ok else f"component {v.component or '?'} rejects"
        stop(rep.record(name, why is None, why or ""))
    rep.timing["standalone"] = time.perf_counter() - t2
