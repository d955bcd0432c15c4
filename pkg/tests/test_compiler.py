import numpy as np
import pytest

from zkt import fixtures as F
from zkt.compiler import (DEFAULT_RULES, RewriteReport, apply_rules, evaluate_float, evaluate_quantized, from_json,
                          infer_shapes, load_model, rule_custom_cnn, rules_named, save_model, toposort)
from zkt.compiler.graph import validate
from zkt.compiler.quant import dequantize, quantize, rescale_int, round_half_away
from zkt.errors import FormatError, RewriteError, UnsupportedOperatorError


def ops(g):
    return [n.op for n in g.nodes]


def test_gelu_fixture_shape():
    g = F.gelu_fixture()
    assert len(g.nodes) == 8
    infer_shapes(g)
    assert g.shape("y") == (1, 8)


def test_gelu_rule_fuses_chain():
    rep = RewriteReport(0, 0)
    g = apply_rules(F.gelu_fixture(), report=rep)
    assert ops(g) == ["GeLU"]
    assert (rep.nodes_before, rep.nodes_after) == (8, 1)
    assert rep.applied == ["GeLU"]
    # the fused node drops the now-unused constants
    assert not g.initializers


def test_gelu_rule_preserves_float_semantics():
    raw = F.gelu_fixture()
    opt = apply_rules(raw)
    rng = np.random.default_rng(0)
    for _ in range(5):
        x = F.random_inputs(raw, rng)
        np.testing.assert_allclose(evaluate_float(raw, x)["y"], evaluate_float(opt, x)["y"], atol=1e-9)


def test_gelu_not_fused_when_intermediate_escapes():
    j = F.gelu_json()
    j["graph_outputs"] = ["y", "t"]
    assert "GeLU" not in ops(apply_rules(from_json(j)))


def test_empty_graph():
    g = from_json({"nodes": [], "initializers": {}, "graph_inputs": [F.gin("x", [1, 4])], "graph_outputs": ["x"]})
    out = apply_rules(g)
    assert out.nodes == []
    x = {"x": np.array([[0.5, -0.25, 0.0, 1.0]])}
    np.testing.assert_array_equal(evaluate_float(out, x)["x"], x["x"])


def test_single_gemm_untouched():
    g = from_json(F.mlp_json(sizes=(4, 2)))
    assert ops(apply_rules(g)) == ["Gemm"]


def test_lstm_unsupported():
    with pytest.raises(UnsupportedOperatorError) as ei:
        validate(from_json(F.lstm_json()))
    assert "lstm0" in str(ei.value)
    with pytest.raises(UnsupportedOperatorError):
        apply_rules(from_json(F.lstm_json()))


def test_apply_rules_idempotent():
    for g in (F.gelu_fixture(), F.mlp_fixture(), F.cnn_fixture(), from_json(F.conv_reshape_transpose_json())):
        once = apply_rules(g)
        twice = apply_rules(once)
        assert once.to_json() == twice.to_json()


def test_reshape_trans_fused():
    g = from_json(F.conv_reshape_transpose_json())
    out = apply_rules(g, rules_named(["ReshapeTrans"]))
    assert ops(out) == ["Conv", "ReshapeTrans"]
    rng = np.random.default_rng(1)
    x = F.random_inputs(g, rng)
    np.testing.assert_allclose(evaluate_float(g, x)["y"], evaluate_float(out, x)["y"])


def test_custom_cnn_rule_and_layout_cleanup():
    g = F.cnn_fixture()
    out = rule_custom_cnn(g)
    kinds = ops(out)
    assert kinds.count("CustomConv") == 2
    # the adapter pair between the two convolutions cancels
    assert kinds.count("Transpose") <= 2
    rng = np.random.default_rng(2)
    for _ in range(3):
        x = F.random_inputs(g, rng)
        np.testing.assert_array_equal(evaluate_float(g, x)["y"], evaluate_float(out, x)["y"])
        a, b = evaluate_quantized(g, x, 6)["y"], evaluate_quantized(out, x, 6)["y"]
        assert np.array_equal(a[0], b[0])


def test_concat_conv_merges_siblings():
    rng = np.random.default_rng(3)
    w1, w2 = rng.uniform(-1, 1, (2, 1, 3, 3)), rng.uniform(-1, 1, (3, 1, 3, 3))
    j = {"nodes": [F.node("Conv", "c1", ["x", "w1"], ["a"]), F.node("Conv", "c2", ["x", "w2"], ["b"]),
                   F.node("Concat", "cat", ["a", "b"], ["y"], axis=1)],
         "initializers": {"w1": F.tensor(w1), "w2": F.tensor(w2)},
         "graph_inputs": [F.gin("x", [1, 1, 5, 5])], "graph_outputs": ["y"]}
    g = from_json(j)
    out = apply_rules(g, rules_named(["ConcatConv"]))
    assert ops(out) == ["Conv"]
    x = F.random_inputs(g, rng)
    np.testing.assert_allclose(evaluate_float(g, x)["y"], evaluate_float(out, x)["y"], atol=1e-6)


def test_default_rules_preserve_mlp_and_cnn():
    rng = np.random.default_rng(4)
    for g in (F.mlp_fixture(), F.cnn_fixture()):
        out = apply_rules(g)
        for _ in range(3):
            x = F.random_inputs(g, rng)
            np.testing.assert_allclose(evaluate_float(g, x)["y"], evaluate_float(out, x)["y"], atol=1e-9)


def test_stub_rules_never_fire():
    stubs = rules_named(["MultiHeadMatMul", "RoPE", "MultiHeadConv"])
    g = F.mlp_fixture()
    assert apply_rules(g, stubs).to_json() == apply_rules(g, []).to_json()
    assert {r.name for r in DEFAULT_RULES} >= {"GeLU", "ReshapeTrans", "ConcatConv", "CustomCNN"}


def test_unknown_rule_name():
    with pytest.raises(RewriteError):
        rules_named(["NoSuchRule"])


def test_toposort_and_cycles():
    j = {"nodes": [F.node("Relu", "b", ["a"], ["y"]), F.node("Relu", "a", ["x"], ["a"])], "initializers": {},
         "graph_inputs": [F.gin("x", [1, 2])], "graph_outputs": ["y"]}
    assert [n.name for n in toposort(from_json(j))] == ["a", "b"]
    j["nodes"][1]["inputs"] = ["y"]
    with pytest.raises(FormatError):
        toposort(from_json(j))


def test_undefined_edge():
    j = {"nodes": [F.node("Relu", "r", ["nope"], ["y"])], "initializers": {},
         "graph_inputs": [F.gin("x", [1, 2])], "graph_outputs": ["y"]}
    with pytest.raises(FormatError):
        toposort(from_json(j))


def test_model_file_roundtrip(tmp_path):
    g = F.cnn_fixture()
    p = tmp_path / "m.json"
    save_model(g, p)
    back = load_model(p)
    assert back.to_json() == g.to_json()


def test_bad_model_file(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(FormatError):
        load_model(p)


# fixed point --------------------------------------------------------------------

def test_round_half_away():
    assert [round_half_away(v) for v in (0.5, 1.5, -0.5, -1.5, 2.4)] == [1, 2, -1, -2, 2]


def test_quantize_roundtrip_grid():
    x = np.array([0.25, -1.0, 0.015625])
    np.testing.assert_array_equal(dequantize(quantize(x, 6), 6), x)


def test_rescale_int_rounds_to_nearest():
    assert rescale_int(96, 6) == 2  # 1.5 rounds away from zero
    assert rescale_int(-96, 6) == -2
    assert rescale_int(95, 6) == 1
