"""Exception hierarchy shared by every layer of the toolchain."""

from __future__ import annotations


class ZktError(Exception):
    """Base class for all toolchain errors."""


class ConfigurationError(ZktError):
    pass


class ShapeError(ZktError):
    pass


class WitnessInvalidError(ZktError):
    """The prover's witness does not satisfy the relation being proven."""


class DegreeError(ZktError):
    pass


class FormatError(ZktError):
    """Malformed proof, bundle, or file (distinct from a verification reject)."""


class FoldError(ZktError):
    pass


class UnsupportedFoldError(FoldError):
    pass


class ArgumentError(ZktError):
    pass


class UnsupportedOperatorError(ZktError):
    def __init__(self, op: str, node: str | None = None, nodes: list[str] | None = None):
        self.op = op
        self.node = node
        self.nodes = list(nodes) if nodes else ([f"{node} ({op})"] if node else [op])
        where = f" (node {node!r})" if node else ""
        extra = f"; offending nodes: {', '.join(self.nodes)}" if nodes and len(self.nodes) > 1 else ""
        super().__init__(f"unsupported operator {op!r}{where}{extra}")


class GraphError(ZktError):
    """Structural problems in a model graph: cycles, dangling edges, bad shapes."""


class RewriteError(ZktError):
    pass


class RangePlanError(ZktError):
    pass


class QuantizationOverflowError(ZktError):
    def __init__(self, edge: str, detail: str = ""):
        self.edge = edge
        super().__init__(f"quantization overflow on edge {edge!r}" + (f": {detail}" if detail else ""))


class MismatchError(ZktError):
    """A proof bundle does not belong to the given model or SRS."""
