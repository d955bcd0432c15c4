import json

import numpy as np
import pytest

from zkt import fixtures as F
from zkt.compiler import apply_rules, evaluate_float, evaluate_quantized, from_json
from zkt.compiler.quant import dequantize
from zkt.errors import FormatError, RangePlanError, UnsupportedOperatorError
from zkt.transpiler import BlockDag, lower, rows_to_tensor, run_dag, tensor_to_rows


def lowered(j, s=6, rules=True):
    g = from_json(j)
    if rules:
        g = apply_rules(g)
    return g, lower(g, s)[0]


def conv_json(cin, cout, kh, kw, hw, seed=0):
    rng = np.random.default_rng(seed)
    w = np.round(rng.uniform(-0.5, 0.5, size=(cout, cin, kh, kw)) * 64) / 64
    return {"nodes": [F.node("Conv", "conv", ["x", "k"], ["y"])], "initializers": {"k": F.tensor(w)},
            "graph_inputs": [F.gin("x", [1, cin, hw, hw])], "graph_outputs": ["y"]}


def test_gemm_lowering():
    _, dag = lowered(F.mlp_json(sizes=(4, 2)))
    assert dag.kind_counts() == {"CQLin": 1, "Add": 1, "CQ2": 1}
    assert [nd.kind for nd in dag.nodes] == ["CQLin", "Add", "CQ2"]


def test_gemm_matches_reference():
    g, dag = lowered(F.mlp_json(sizes=(4, 2)))
    rng = np.random.default_rng(1)
    for _ in range(5):
        x = F.random_inputs(g, rng)
        got, ref = run_dag(dag, x)["y"], evaluate_quantized(g, x, 6)["y"]
        assert got[1] == ref[1] and np.array_equal(got[0], ref[0])


def test_transpose_is_one_permute():
    _, dag = lowered(F.single_op_json("Transpose", 1, [2, 4], perm=[1, 0]))
    assert dag.kind_counts() == {"Permute": 1}
    x = np.arange(8).reshape(2, 4) / 8
    got, sc = run_dag(dag, {"x0": x})["y"]
    np.testing.assert_array_equal(dequantize(got, sc), x.T)


def test_reshape_keeping_rows_costs_nothing():
    j = {"nodes": [F.node("Reshape", "r", ["x", "shape"], ["y"])],
         "initializers": {"shape": F.tensor(np.array([1, 2, 4]), "int64")},
         "graph_inputs": [F.gin("x", [2, 4])], "graph_outputs": ["y"]}
    _, dag = lowered(j)
    assert dag.nodes == []


def test_reshape_changing_rows_is_one_permute():
    j = {"nodes": [F.node("Reshape", "r", ["x", "shape"], ["y"])],
         "initializers": {"shape": F.tensor(np.array([2, 4]), "int64")},
         "graph_inputs": [F.gin("x", [1, 8])], "graph_outputs": ["y"]}
    _, dag = lowered(j)
    assert dag.kind_counts() == {"Permute": 1}
    x = np.arange(8).reshape(1, 8) / 16
    got, sc = run_dag(dag, {"x": x})["y"]
    np.testing.assert_array_equal(dequantize(got, sc), x.reshape(2, 4))


def test_softmax_close_to_float():
    g, dag = lowered(F.softmax_json())
    assert dag.kind_counts()["MaxProof"] == 1 and dag.kind_counts()["Div"] == 1
    rng = np.random.default_rng(2)
    for _ in range(10):
        x = F.random_inputs(g, rng)
        got, sc = run_dag(dag, x)["y"]
        ref = evaluate_float(g, x)["y"]
        assert np.abs(dequantize(got, sc) - ref).max() <= 2 ** -4


def test_relu_table():
    g, dag = lowered(F.single_op_json("Relu", 1, [1, 8]))
    assert dag.kind_counts() == {"CQ2": 1}
    spec = dag.tables.get(dag.nodes[0].params["table"])
    m = spec.table_map()
    assert all(m[x] == max(x, 0) for x in range(spec.lo, spec.hi))
    x = np.array([[-1.0, -0.5, 0.0, 0.25, 0.5, 0.75, 1.0, -0.125]])
    got, sc = run_dag(dag, {"x0": x})["y"]
    np.testing.assert_array_equal(dequantize(got, sc), np.maximum(x, 0))


def test_gelu_table_error():
    g, dag = lowered(F.gelu_json())
    assert dag.kind_counts() == {"CQ2": 1}
    spec = dag.tables.get(dag.nodes[0].params["table"])
    xs = np.arange(-2 * 64, 2 * 64 + 1)
    real = xs / 64
    want = 0.5 * real * (1 + np.tanh(np.sqrt(2 / np.pi) * (real + 0.044715 * real ** 3)))
    m = spec.table_map()
    got = np.array([m[int(v)] for v in xs]) / (1 << spec.scale_out)
    assert np.abs(got - want).max() <= 2 ** -5


def test_argmax_examples():
    g, dag = lowered(F.single_op_json("ArgMax", 1, [1, 3], axis=1, keepdims=1))
    assert dag.kind_counts()["MaxProof"] == 1
    for vals, want in (([0.2, 0.9, 0.5], 1), ([0.5, 0.5, 0.1], 0), ([-0.1, -0.3, 0.7], 2), ([0.4, 0.1, 0.4], 0)):
        got, sc = run_dag(dag, {"x0": np.array([vals])})["y"]
        assert sc == 0 and int(np.asarray(got).ravel()[0]) == want


def test_and_matches_bitwise():
    g, dag = lowered(F.single_op_json("And", 2, [1, 4], dtype="bool"))
    assert dag.kind_counts() == {"BooleanCheck": 2, "Mul": 1}
    a, b = np.array([[0, 1, 0, 1]]), np.array([[0, 0, 1, 1]])
    got, _ = run_dag(dag, {"x0": a, "x1": b})["y"]
    np.testing.assert_array_equal(np.asarray(got, dtype=np.int64), a & b)


def test_conv_three_by_three_uses_nine_matrices():
    _, dag = lowered(conv_json(1, 2, 3, 3, 6))
    assert dag.kind_counts()["CQLin"] == 9
    assert "CopyConstraint" not in dag.kind_counts()


@pytest.mark.parametrize("cin,cout,kh,kw,hw", [(1, 1, 1, 1, 3), (2, 3, 2, 2, 5), (3, 2, 3, 1, 4), (1, 4, 2, 3, 6)])
def test_conv_matches_reference(cin, cout, kh, kw, hw):
    j = conv_json(cin, cout, kh, kw, hw, seed=kh * 10 + kw)
    g = from_json(j)
    _, dag = lowered(j)
    assert dag.kind_counts()["CQLin"] == kh * kw
    rng = np.random.default_rng(3)
    x = np.round(rng.uniform(-1, 1, size=(1, cin, hw, hw)) * 64) / 64
    got, sc = run_dag(dag, {"x": x})["y"]
    ref, rsc = evaluate_quantized(g, {"x": x}, 6)["y"]
    assert sc == rsc and np.array_equal(np.asarray(got), np.asarray(ref))


def test_no_copy_constraint_in_linear_paths():
    for j in (F.mlp_json(), F.cnn_json()):
        _, dag = lowered(j)
        assert "CopyConstraint" not in dag.kind_counts()


def test_cnn_lowering_counts():
    _, dag = lowered(F.cnn_json())
    k = dag.kind_counts()
    assert k["CQLin"] == 18 and k["CQ2"] == 2 and k["MaxProof"] == 1


def test_lint_rescale_clean_and_dirty():
    for j in (F.mlp_json(), F.cnn_json(), F.gelu_json(), F.softmax_json()):
        assert lowered(j)[1].lint_rescale() == []
    _, dag = lowered(F.mlp_json(sizes=(4, 4, 2)))
    # drop the first rescale and feed the unrescaled sum to the next layer
    first = next(nd for nd in dag.nodes if nd.kind == "CQ2")
    nxt = next(nd for nd in dag.nodes if first.outputs[0] in nd.inputs)
    nxt.inputs = [first.inputs[0] if i == first.outputs[0] else i for i in nxt.inputs]
    dag.nodes = [nd for nd in dag.nodes if nd is not first]
    assert any("never rescaled" in p for p in dag.lint_rescale())


def test_unsupported_operator():
    with pytest.raises(UnsupportedOperatorError):
        lower(from_json(F.lstm_json()), 6)


def test_table_window_cap():
    g = apply_rules(from_json(F.single_op_json("Relu", 1, [1, 8], lo=-1000.0, hi=1000.0)))
    with pytest.raises(RangePlanError):
        lower(g, 6, max_table_bits=8)


def test_dag_json_roundtrip():
    _, dag = lowered(F.cnn_json())
    blob = json.loads(json.dumps(dag.to_json()))
    back = BlockDag.from_json(blob)
    assert back.digest() == dag.digest()
    blob["nodes"][0]["kind"] = "Frobnicate"
    with pytest.raises(FormatError):
        BlockDag.from_json(blob)


def test_rows_roundtrip():
    arr = np.arange(12).reshape(3, 4)
    rows = tensor_to_rows(arr, (3, 4))
    assert len(rows) == 3 and len(rows[0]) == 4
    np.testing.assert_array_equal(rows_to_tensor(rows, (3, 4)), arr)
    rows = tensor_to_rows(np.arange(6).reshape(2, 3), (2, 3))
    assert len(rows[0]) == 4 and rows[0][3] == 0
