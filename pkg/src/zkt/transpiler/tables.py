"""Lookup table plan: named, lazily built CQ/CQ2 tables."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..algebra.field import next_pow2
from ..blocks.lookup import LookupTable
from ..compiler.quant import apply_table
from ..errors import FormatError, RangePlanError

NONLINEAR_FNS = ("relu", "tanh", "sigmoid", "exp", "gelu", "subgraph")
DEFAULT_MAX_TABLE_BITS = 18


@dataclass
class TableSpec:
    name: str
    fn: Optional[dict]       # None for a plain range set (CQ)
    lo: int
    size: int
    scale_in: int
    scale_out: int
    _built: Optional[LookupTable] = field(default=None, repr=False, compare=False)
    _map: Optional[dict] = field(default=None, repr=False, compare=False)

    @property
    def hi(self) -> int:
        return self.lo + self.size

    @property
    def is_map(self) -> bool:
        return self.fn is not None

    def key(self) -> str:
        return json.dumps([self.fn, self.lo, self.size], sort_keys=True)

    def outputs(self) -> list[int]:
        xs = np.array(list(range(self.lo, self.hi)), dtype=object)
        return [int(v) for v in apply_table(self.fn, xs)]

    def table_map(self) -> dict[int, int]:
        if self._map is None:
            xs = range(self.lo, self.hi)
            self._map = dict(zip(xs, self.outputs())) if self.is_map else {x: x for x in xs}
        return self._map

    def build(self) -> LookupTable:
        if self._built is None:
            xs = list(range(self.lo, self.hi))
            outs = None
            if self.is_map:
                m = self.table_map()
                outs = [m[x] for x in xs]
            self._built = LookupTable.from_signed(xs, outs, self.name)
        return self._built

    def digest(self) -> str:
        return self.build().digest().hex()

    def out_bounds(self) -> tuple[int, int]:
        if not self.is_map:
            return self.lo, self.hi - 1
        vals = self.table_map().values()
        return min(vals), max(vals)

    def to_json(self) -> dict:
        return {"fn": self.fn, "lo": self.lo, "size": self.size, "scale_in": self.scale_in,
                "scale_out": self.scale_out}


def window(lo: int, hi: int, max_bits: int, what: str) -> tuple[int, int]:
    """Smallest power-of-two window [lo, lo + 2^k) containing [lo, hi]; returns (start, size)."""
    size = next_pow2(max(hi - lo + 1, 1))
    if size.bit_length() - 1 > max_bits:
        raise RangePlanError(f"{what}: values in [{lo}, {hi}] need a table of {size} entries "
                             f"(cap 2^{max_bits})")
    return lo, size


def unsigned_domain(hi: int, max_bits: int, what: str) -> tuple[int, int]:
    """Smallest [0, 2^k) containing [0, hi]."""
    size = next_pow2(max(hi + 1, 1))
    if size.bit_length() - 1 > max_bits:
        raise RangePlanError(f"{what}: range [0, {hi}] needs more than 2^{max_bits} entries")
    return 0, size


@dataclass
class LookupTablePlan:
    tables: dict[str, TableSpec] = field(default_factory=dict)
    max_table_bits: int = DEFAULT_MAX_TABLE_BITS

    def get(self, name: str) -> TableSpec:
        try:
            return self.tables[name]
        except KeyError:
            raise FormatError(f"table {name!r} is not in the plan") from None

    def _add(self, base: str, fn: Optional[dict], lo: int, size: int, s_in: int, s_out: int) -> TableSpec:
        probe = TableSpec("", fn, lo, size, s_in, s_out)
        for t in self.tables.values():
            if t.key() == probe.key():
                return t
        name = base
        i = 1
        while name in self.tables:
            name = f"{base}_{i}"
            i += 1
        probe.name = name
        self.tables[name] = probe
        return probe

    def nonlinearity(self, fn: dict, s: int, lo: int, hi: int, what: str) -> TableSpec:
        """Standard domain [-2^(2s), 2^(2s)): every input at scale s with |x| < 2^s."""
        start, size = -(1 << (2 * s)), 1 << (2 * s + 1)
        if lo < start or hi >= start + size:
            raise RangePlanError(f"{what}: input range [{lo}, {hi}] exceeds the {fn['fn']} table "
                                 f"[{start}, {start + size})")
        return self._add(fn["fn"] if fn["fn"] != "subgraph" else "gelu_fused", fn, start, size, s, s)

    def rescale(self, shift: int, relu: bool, lo: int, hi: int, s_in: int, what: str) -> TableSpec:
        start, size = window(lo, hi, self.max_table_bits, what)
        fn = {"fn": "rescale", "shift": shift, "relu": bool(relu)}
        return self._add(f"rescale{shift}{'_relu' if relu else ''}", fn, start, size, s_in, s_in - shift)

    def mapping(self, fn: dict, lo: int, hi: int, s_in: int, s_out: int, what: str) -> TableSpec:
        start, size = window(lo, hi, self.max_table_bits, what)
        return self._add(fn["fn"], fn, start, size, s_in, s_out)

    def range_set(self, hi: int, what: str) -> TableSpec:
        start, size = unsigned_domain(hi, self.max_table_bits, what)
        return self._add(f"range{size}", None, start, size, 0, 0)

    def to_json(self, with_digests: bool = False) -> dict:
        out = {"max_table_bits": self.max_table_bits,
               "tables": {k: t.to_json() for k, t in sorted(self.tables.items())}}
        if with_digests:
            for k, t in out["tables"].items():
                t["digest"] = self.tables[k].digest()
        return out

    @classmethod
    def from_json(cls, d: dict) -> "LookupTablePlan":
        plan = cls(max_table_bits=int(d.get("max_table_bits", DEFAULT_MAX_TABLE_BITS)))
        for k, t in d.get("tables", {}).items():
            size = int(t["size"])
            if size & (size - 1):
                raise FormatError(f"table {k}: size {size} is not a power of two")
            plan.tables[k] = TableSpec(k, t["fn"], int(t["lo"]), size, int(t["scale_in"]), int(t["scale_out"]))
        return plan

    def digest(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()
