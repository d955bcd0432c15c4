import dataclasses

import numpy as np
import pytest

from zkt import fixtures as F
from zkt.accumulation import FoldTree
from zkt.compiler import apply_rules, evaluate_quantized, from_json
from zkt.errors import FormatError, MismatchError
from zkt.pcs import setup
from zkt.runtime import (MAGIC, PublicIO, deserialize_bundle, generate_witness, prove_model, serialize_bundle,
                         verify_model)
from zkt.transpiler import BlockDag, lower

S = 3  # small tables so that everything fits the 1024-degree test SRS


def build(j, srs, seed=0, s=S, **kw):
    g = apply_rules(from_json(j))
    dag, _ = lower(g, s)
    x = F.random_inputs(g, np.random.default_rng(seed))
    store = generate_witness(dag, x, srs)
    return g, dag, x, prove_model(dag, store, srs, seed=b"runtime", **kw)


@pytest.fixture(scope="module")
def relu16(srs):
    return build(F.single_op_json("Relu", 1, [16, 8]), srs)


def test_empty_dag(srs):
    dag = BlockDag(S)
    store = generate_witness(dag, {}, srs)
    b = prove_model(dag, store, srs)
    assert b.groups == [] and b.standalone == []
    assert verify_model(dag, deserialize_bundle(serialize_bundle(b)), srs).ok


def test_single_add(srs):
    j = F.single_op_json("Add", 2, [1, 2])
    g = from_json(j)
    dag, _ = lower(g, 6)
    store = generate_witness(dag, {"x0": np.array([[1.0, 2.0]]), "x1": np.array([[3.0, 4.0]])}, srs)
    b = prove_model(dag, store, srs)
    assert verify_model(dag, b, srs).ok
    rows = b.io.output_rows["y"]
    assert rows == [[4 << 6, 6 << 6]]
    assert [g_.kind.value for g_ in b.groups] == ["Add"]


def test_mlp_outputs_match_reference(srs):
    g, dag, x, b = build(F.mlp_json(), srs, seed=1)
    assert verify_model(dag, b, srs).ok
    ref, sc = evaluate_quantized(g, x, S)["y"]
    assert b.io.output_scales["y"] == sc
    assert b.io.output_rows["y"][0][:4] == [int(v) for v in np.asarray(ref).ravel()]


def test_sixteen_cq2_depth(relu16):
    _, dag, _, b = relu16
    (rep,) = b.size_report()
    assert rep["kind"] == "CQ2" and rep["leaves"] == 16 and rep["depth"] == 4
    assert rep["accumulator_bytes"] > 0 and rep["tree_bytes"] > rep["accumulator_bytes"]


def test_cnn_verifies(srs):
    g, dag, x, b = build(F.cnn_json(), srs, seed=2)
    rep = verify_model(dag, b, srs)
    assert rep.ok, rep.summary()
    ref, _ = evaluate_quantized(g, x, S)["y"]
    got = [r[:dag.edges[dag.outputs["y"]].L] for r in b.io.output_rows["y"]]
    assert np.array_equal(np.asarray(got).ravel(), np.asarray(ref).ravel())


def test_concat_model(srs):
    j = {"nodes": [F.node("Relu", "ra", ["a"], ["ya"]), F.node("Relu", "rb", ["b"], ["yb"]),
                   F.node("Concat", "cat", ["ya", "yb"], ["y"], axis=-1)],
         "initializers": {}, "graph_inputs": [F.gin("a", [2, 4]), F.gin("b", [2, 4])], "graph_outputs": ["y"]}
    g, dag, x, b = build(j, srs, seed=3)
    assert verify_model(dag, b, srs).ok
    ref, _ = evaluate_quantized(g, x, S)["y"]
    assert np.array_equal(np.asarray(b.io.output_rows["y"]), np.asarray(ref))


def test_commitment_swap_rejected(srs, relu16):
    _, dag, _, b = relu16
    eid = dag.inputs["x0"]
    coms = dict(b.commitments)
    row = list(coms[eid])
    row[0], row[1] = row[1], row[0]
    coms[eid] = row
    rep = verify_model(dag, dataclasses.replace(b, commitments=coms), srs)
    assert not rep.ok


def test_dropped_fold_step_rejected(srs, relu16):
    _, dag, _, b = relu16
    grp = b.groups[0]
    tree = FoldTree(grp.tree.leaves, grp.tree.nodes[:-1])
    bad = dataclasses.replace(b, groups=[dataclasses.replace(grp, tree=tree)])
    rep = verify_model(dag, bad, srs)
    assert not rep.ok and "replay" in rep.first_failure.name


def test_forged_pf_rejected(srs, relu16):
    _, dag, _, b = relu16
    grp = b.groups[0]
    nodes = list(grp.tree.nodes)
    pf = [list(v) for v in nodes[0].pf]
    pf[0][0] = pf[0][0] + pf[0][0]
    nodes[0] = dataclasses.replace(nodes[0], pf=tuple(tuple(v) for v in pf))
    bad = dataclasses.replace(b, groups=[dataclasses.replace(grp, tree=FoldTree(grp.tree.leaves, nodes))])
    assert not verify_model(dag, bad, srs).ok


def test_wrong_output_rejected(srs, relu16):
    _, dag, _, b = relu16
    rows = [list(r) for r in b.io.output_rows["y"]]
    rows[0][0] += 1
    io = dataclasses.replace(b.io, output_rows={"y": rows})
    assert not verify_model(dag, dataclasses.replace(b, io=io), srs).ok
    assert not verify_model(dag, b, srs, io=io).ok
    assert verify_model(dag, b, srs, io=PublicIO.from_json(b.io.to_json())).ok


def test_fail_fast_off_collects_all(srs, relu16):
    _, dag, _, b = relu16
    rows = [list(r) for r in b.io.output_rows["y"]]
    rows[0][0] += 1
    io = dataclasses.replace(b.io, output_rows={"y": rows})
    rep = verify_model(dag, dataclasses.replace(b, io=io), srs, fail_fast=False)
    assert not rep.ok
    assert any(c.name.endswith("/decide") and c.ok for c in rep.components)
    assert "output" in rep.summary()


def test_roundtrip_byte_identical(relu16):
    b = relu16[3]
    data = serialize_bundle(b)
    assert data.startswith(MAGIC)
    assert serialize_bundle(deserialize_bundle(data)) == data


@pytest.mark.parametrize("cut", [0, 4, 8, 100, -1])
def test_truncated_bundle(relu16, cut):
    data = serialize_bundle(relu16[3])
    with pytest.raises(FormatError):
        deserialize_bundle(data[:cut])


def test_bad_magic(relu16):
    data = serialize_bundle(relu16[3])
    with pytest.raises(FormatError):
        deserialize_bundle(b"XXXXXXXX" + data[8:])


def test_deterministic(srs):
    a = build(F.single_op_json("Relu", 1, [4, 8]), srs)[3]
    b = build(F.single_op_json("Relu", 1, [4, 8]), srs)[3]
    assert serialize_bundle(a) == serialize_bundle(b)


def test_workers_give_same_bundle(srs):
    a = build(F.single_op_json("Relu", 1, [4, 8]), srs)[3]
    b = build(F.single_op_json("Relu", 1, [4, 8]), srs, workers=3)[3]
    assert serialize_bundle(a) == serialize_bundle(b)


def test_other_model_or_srs_mismatch(srs, relu16):
    _, dag, _, b = relu16
    other, _ = lower(apply_rules(from_json(F.single_op_json("Relu", 1, [16, 8], lo=-2.0, hi=2.0))), S)
    with pytest.raises(MismatchError):
        verify_model(other, b, srs)
    with pytest.raises(MismatchError):
        verify_model(dag, b, setup(b"another", 1024))


def test_timings_reported(srs):
    t = {}
    build(F.single_op_json("Relu", 1, [2, 8]), srs, timings=t)
    assert set(t) == {"preprocess", "blocks", "fold", "total"}
    assert t["total"] >= t["fold"] >= 0
