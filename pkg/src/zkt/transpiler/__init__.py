"""BlockDag construction: lowering, table planning and integer evaluation."""

from .dag import BlockDag, DagNode, Edge, evaluate_dag, rows_to_tensor, safe_bits, tensor_to_rows
from .evaluate import dag_outputs, input_rows, run_dag
from .lower import Lowerer, lower, lower_and, lower_argmax, lower_custom_conv, lower_nonlinearity
from .tables import LookupTablePlan, TableSpec

__all__ = [
    "BlockDag", "DagNode", "Edge", "LookupTablePlan", "Lowerer", "TableSpec", "dag_outputs", "evaluate_dag",
    "input_rows", "run_dag", "lower", "lower_and", "lower_argmax", "lower_custom_conv", "lower_nonlinearity",
    "rows_to_tensor", "safe_bits", "tensor_to_rows",
]
