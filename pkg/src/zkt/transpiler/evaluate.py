"""Glue between real-valued model inputs and DAG edge rows."""

from __future__ import annotations

from typing import Mapping

import numpy as np

from ..compiler.quant import as_int_array, quantize
from ..errors import ShapeError
from .dag import BlockDag, evaluate_dag, rows_to_tensor, tensor_to_rows


def input_rows(dag: BlockDag, inputs: Mapping[str, np.ndarray], quantized: bool = False) -> dict[int, list[list[int]]]:
    """Quantize real inputs at each input edge's scale and split them into padded rows."""
    out = {}
    for name, eid in dag.inputs.items():
        if name not in inputs:
            raise ShapeError(f"missing model input {name!r}")
        e = dag.edges[eid]
        raw = np.asarray(inputs[name])
        if raw.size != e.rows * e.L:
            raise ShapeError(f"input {name}: expected {e.shape}, got {raw.shape}")
        if quantized or e.scale == 0:
            q = as_int_array(np.asarray(raw).astype(np.int64) if raw.dtype != object else raw)
        else:
            q = quantize(raw, e.scale)
        out[eid] = tensor_to_rows(q, e.shape)
    return out


def dag_outputs(dag: BlockDag, vals: Mapping[int, list[list[int]]]) -> dict[str, tuple[np.ndarray, int]]:
    res = {}
    for name, eid in dag.outputs.items():
        e = dag.edges[eid]
        res[name] = (rows_to_tensor(vals[eid], e.shape), e.scale)
    return res


def run_dag(dag: BlockDag, inputs: Mapping[str, np.ndarray], check_bounds: bool = True
            ) -> dict[str, tuple[np.ndarray, int]]:
    """Quantized model outputs computed through the DAG node semantics."""
    return dag_outputs(dag, evaluate_dag(dag, input_rows(dag, inputs), check_bounds))


