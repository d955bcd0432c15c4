"""ProofBundle and its versioned binary format ("ZKTPRF01")."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

from ..accumulation.accumulator import AccInstance, Accumulator
from ..accumulation.tree import FoldNode, FoldTree
from ..algebra.curve import G1, GT
from ..blocks.base import BlockKind, BlockProof, Static
from ..errors import FormatError
from ..transpiler.dag import BlockDag
from .codec import Reader, encode

MAGIC = b"ZKTPRF01"


def group_key(kind: BlockKind, static: Static) -> bytes:
    return encode([kind.value, static])


@dataclass
class FoldGroup:
    kind: BlockKind
    static: Static
    tree: FoldTree

    @property
    def accumulator(self) -> Accumulator:
        # identity commitment: the decider input is read off the root instance
        return Accumulator.from_instance(self.tree.root)

    @property
    def leaves(self) -> int:
        return len(self.tree.leaves)


@dataclass
class PublicIO:
    """Input commitments plus the revealed output rows (and their commitments)."""

    inputs: dict[str, list[G1]] = field(default_factory=dict)
    outputs: dict[str, list[G1]] = field(default_factory=dict)
    output_rows: dict[str, list[list[int]]] = field(default_factory=dict)
    output_scales: dict[str, int] = field(default_factory=dict)

    @classmethod
    def from_store(cls, dag: BlockDag, store) -> "PublicIO":
        io = cls()
        for name, eid in sorted(dag.inputs.items()):
            io.inputs[name] = store.commitments(eid)
        for name, eid in sorted(dag.outputs.items()):
            io.outputs[name] = store.commitments(eid)
            io.output_rows[name] = [list(r) for r in store.values[eid]]
            io.output_scales[name] = dag.edges[eid].scale
        return io

    def to_item(self) -> dict:
        return {"inputs": self.inputs, "outputs": self.outputs, "output_rows": self.output_rows,
                "output_scales": self.output_scales}

    @classmethod
    def from_item(cls, d: Any) -> "PublicIO":
        if not isinstance(d, dict) or set(d) != {"inputs", "outputs", "output_rows", "output_scales"}:
            raise FormatError("malformed public I/O section")
        for k in ("inputs", "outputs"):
            if any(not isinstance(v, tuple) or any(not isinstance(c, G1) for c in v) for v in d[k].values()):
                raise FormatError(f"public I/O {k} must be lists of G1 commitments")
        rows = {}
        for name, rs in d["output_rows"].items():
            if not isinstance(rs, tuple) or any(not isinstance(r, tuple) for r in rs):
                raise FormatError("output rows must be lists of integer lists")
            if any(not isinstance(v, int) or isinstance(v, bool) for r in rs for v in r):
                raise FormatError("output rows must hold integers")
            rows[name] = [list(r) for r in rs]
        return cls({k: list(v) for k, v in d["inputs"].items()}, {k: list(v) for k, v in d["outputs"].items()},
                   rows, {k: int(v) for k, v in d["output_scales"].items()})

    # JSON form written next to the proof ---------------------------------------

    def to_json(self) -> dict:
        return {
            "inputs": {k: [c.to_bytes().hex() for c in v] for k, v in self.inputs.items()},
            "outputs": {k: {"commitments": [c.to_bytes().hex() for c in v], "rows": self.output_rows[k],
                            "scale": self.output_scales[k]} for k, v in self.outputs.items()},
        }

    @classmethod
    def from_json(cls, d: dict) -> "PublicIO":
        try:
            io = cls()
            for k, v in d["inputs"].items():
                io.inputs[k] = [G1.from_bytes(bytes.fromhex(c)) for c in v]
            for k, v in d["outputs"].items():
                io.outputs[k] = [G1.from_bytes(bytes.fromhex(c)) for c in v["commitments"]]
                io.output_rows[k] = [[int(x) for x in r] for r in v["rows"]]
                io.output_scales[k] = int(v["scale"])
            return io
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise FormatError(f"malformed io file: {exc}") from None


@dataclass
class ProofBundle:
    dag_digest: bytes
    srs_digest: bytes
    scale_bits: int
    commitments: dict[int, list[G1]]
    groups: list[FoldGroup]
    standalone: list[BlockProof]
    io: PublicIO

    def group(self, kind: BlockKind) -> list[FoldGroup]:
        return [g for g in self.groups if g.kind is kind]

    def size_report(self) -> list[dict]:
        out = []
        for g in self.groups:
            acc = len(encode(g.tree.root))
            total = len(encode(_tree_item(g)))
            out.append({"kind": g.kind.value, "leaves": g.leaves, "depth": g.tree.depth,
                        "accumulator_elements": g.accumulator.x.group_element_count,
                        "accumulator_bytes": acc, "tree_bytes": total - acc})
        return out


def _tree_item(g: FoldGroup) -> list:
    nodes = [[nd.left, nd.right, nd.pf, nd.result] for nd in g.tree.nodes]
    return [g.kind.value, g.static, g.tree.leaves, nodes]


def serialize_bundle(b: ProofBundle) -> bytes:
    body = [
        b.dag_digest, b.srs_digest, b.scale_bits,
        [[eid, b.commitments[eid]] for eid in sorted(b.commitments)],
        [_tree_item(g) for g in b.groups],
        list(b.standalone),
        b.io.to_item(),
    ]
    return MAGIC + encode(body)


def _expect(cond: bool, what: str) -> None:
    if not cond:
        raise FormatError(what)


def _group(item) -> FoldGroup:
    _expect(isinstance(item, tuple) and len(item) == 4, "malformed fold group")
    kind, static, leaves, nodes = item
    try:
        kind = BlockKind(kind)
    except ValueError:
        raise FormatError(f"unknown block kind {kind!r}") from None
    _expect(isinstance(leaves, tuple) and leaves and all(isinstance(x, AccInstance) for x in leaves),
            "fold group leaves must be accumulator instances")
    _expect(isinstance(nodes, tuple), "fold nodes must be a list")
    out = []
    for nd in nodes:
        _expect(isinstance(nd, tuple) and len(nd) == 4, "malformed fold node")
        left, right, pf, res = nd
        _expect(isinstance(left, int) and isinstance(right, int) and not isinstance(left, bool)
                and not isinstance(right, bool), "fold node refs must be integers")
        _expect(isinstance(pf, tuple) and all(isinstance(v, tuple) and all(isinstance(e, GT) for e in v) for v in pf),
                "fold node pf must be lists of GT elements")
        _expect(isinstance(res, AccInstance), "fold node result must be an accumulator instance")
        out.append(FoldNode(left, right, pf, res))
    return FoldGroup(kind, static, FoldTree(list(leaves), out))


def deserialize_bundle(data: bytes) -> ProofBundle:
    if not isinstance(data, (bytes, bytearray)) or len(data) < len(MAGIC):
        raise FormatError("truncated proof bundle")
    if bytes(data[:len(MAGIC)]) != MAGIC:
        raise FormatError(f"bad bundle header {bytes(data[:len(MAGIC)])!r} (expected {MAGIC!r})")
    r = Reader(bytes(data), len(MAGIC))
    body = r.item()
    r.done()
    _expect(isinstance(body, tuple) and len(body) == 7, "malformed bundle body")
    dag_d, srs_d, scale, coms, groups, standalone, io = body
    _expect(isinstance(dag_d, bytes) and len(dag_d) == 32 and isinstance(srs_d, bytes) and len(srs_d) == 32,
            "bundle header digests must be 32 bytes")
    _expect(isinstance(scale, int) and not isinstance(scale, bool), "scale_bits must be an integer")
    _expect(isinstance(coms, tuple), "commitment section must be a list")
    commitments: dict[int, list[G1]] = {}
    prev: Optional[int] = None
    for ent in coms:
        _expect(isinstance(ent, tuple) and len(ent) == 2 and isinstance(ent[0], int), "malformed commitment entry")
        eid, cs = ent
        _expect(prev is None or eid > prev, "commitment entries must be sorted by edge id")
        _expect(isinstance(cs, tuple) and all(isinstance(c, G1) for c in cs), "edge commitments must be G1")
        prev = eid
        commitments[eid] = list(cs)
    _expect(isinstance(groups, tuple) and isinstance(standalone, tuple), "malformed proof sections")
    _expect(all(isinstance(p, BlockProof) for p in standalone), "standalone entries must be block proofs")
    return ProofBundle(dag_d, srs_d, scale, commitments, [_group(g) for g in groups], list(standalone),
                       PublicIO.from_item(io))
