"""Model graph IR, rewrite rules and reference evaluators."""

from .graph import GraphInput, Initializer, ModelGraph, Node, from_json, infer_shapes, load_model, save_model, toposort
from .reference import dequantized_outputs, evaluate_float, evaluate_quantized, quantize_inputs
from .rules import DEFAULT_RULES, RewriteReport, RewriteRule, apply_rules, rule_custom_cnn, rules_named

__all__ = [
    "DEFAULT_RULES", "GraphInput", "Initializer", "ModelGraph", "Node", "RewriteReport", "RewriteRule",
    "apply_rules", "dequantized_outputs", "evaluate_float", "evaluate_quantized", "from_json", "infer_shapes",
    "load_model", "quantize_inputs", "rule_custom_cnn", "rules_named", "save_model", "toposort",
]
