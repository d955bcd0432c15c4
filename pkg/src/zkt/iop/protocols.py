"""BooleanCheck, OneToOne, Ordered, MaxProof and CopyConstraint on top of the IOP.

Each protocol returns a BlockProof of its (non-foldable) kind. ``g1`` holds
the row commitments the proof talks about, and ``payload`` maps component
names to IOP proofs or nested block proofs. The verifier rebuilds every
circuit from the static parameters alone.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from ..algebra.curve import G1
from ..algebra.field import MODULUS as P
from ..algebra.field import batch_inv, decode_signed
from ..algebra.poly import domain_new
from ..blocks.base import BlockKind, BlockProof, checks_enabled, make_static, static_get, verify_block
from ..blocks.common import Row, commit_values
from ..blocks.lookup import LookupTable, preprocess_table, prove_cq, public_cq_static
from ..errors import ArgumentError, FormatError, ShapeError, WitnessInvalidError
from ..pcs.kzg import Srs
from .core import Constraint, IopCircuit, IopProof, Witness, iop_prove, iop_verify

LABEL_BASE = 5  # column k gets labels 5^k * omega^j: distinct cosets of H


@dataclass
class Verdict:
    ok: bool
    component: str = ""

    def __bool__(self) -> bool:
        return self.ok


def _active(n: int, n_log: int) -> tuple[int, ...]:
    return tuple(1 if j < n_log else 0 for j in range(n))


def _unit(n: int, i: int) -> tuple[int, ...]:
    return tuple(1 if j == i else 0 for j in range(n))


def _wrap(kind: BlockKind, static, g1: Sequence[G1], payload: dict) -> BlockProof:
    return BlockProof(kind, static, (), tuple(g1), (), (), payload)


def _check_iop(name: str, c: IopCircuit, srs: Srs, links: Mapping[str, G1], proof) -> Verdict:
    if not isinstance(proof, IopProof):
        raise FormatError(f"component {name} is not an IOP proof")
    v = iop_verify(c, srs, links, proof)
    return Verdict(True) if v.ok else Verdict(False, f"{name}:{v.stage}")


# BooleanCheck ---------------------------------------------------------------

def boolean_circuit(n: int, n_log: int) -> IopCircuit:
    if n_log >= n:
        k = Constraint("boolean", lambda e: e.w("f") * (1 - e.w("f")), 2)
        return IopCircuit("BooleanCheck", n, (Witness("f", 0, n),), (k,), {}, (), (n, n_log))
    k = Constraint("boolean", lambda e: e.p("q") * e.w("f") * (1 - e.w("f")), 3)
    return IopCircuit("BooleanCheck", n, (Witness("f", 0, n),), (k,), {"q": _active(n, n_log)}, (), (n, n_log))


def boolean_check(srs: Srs, f: Row, n_log: Optional[int] = None, seed: bytes = b"") -> BlockProof:
    n = f.n
    n_log = n if n_log is None else n_log
    c = boolean_circuit(n, n_log)
    proof = iop_prove(c, srs, {"f": f.values}, {"f": f.com}, seed, check=checks_enabled())
    return _wrap(BlockKind.BooleanCheck, make_static(n=n, n_log=n_log), (f.com,), {"iop": proof})


def _verify_boolean(p: BlockProof, srs: Srs) -> Verdict:
    n, n_log = static_get(p.static, "n"), static_get(p.static, "n_log")
    (f,) = _coms(p, 1)
    return _check_iop("iop", boolean_circuit(n, n_log), srs, {"f": f}, _part(p, "iop"))


# OneToOne (multiset equality of the active slots) ------------------------------

def one_to_one_circuit(n: int, n_log: int) -> IopCircuit:
    q = _active(n, n_log)

    def step(e):
        a = e.p("q")
        num = a * (e.w("f") + e.c("chi")) + 1 - a
        den = a * (e.w("g") + e.c("chi")) + 1 - a
        return e.s("z") * den - e.w("z") * num

    ks = (Constraint("one", lambda e: e.p("L0") * (e.w("z") - 1), 2), Constraint("product", step, 3))
    ws = (Witness("f", 0, n), Witness("g", 0, n), Witness("z", 1))
    return IopCircuit("OneToOne", n, ws, ks, {"q": q, "L0": _unit(n, 0)}, (("chi",),), (n, n_log))


def _grand_product(nums: Sequence[int], dens: Sequence[int]) -> list[int]:
    z = [1]
    inv_d = batch_inv([d % P for d in dens])
    for a, b in zip(nums[:-1], inv_d[:-1]):
        z.append(z[-1] * a % P * b % P)
    return z


def one_to_one(srs: Srs, f: Row, g: Row, n_log: Optional[int] = None, seed: bytes = b"") -> BlockProof:
    n = f.n
    if g.n != n:
        raise ShapeError("OneToOne: rows must share a domain")
    n_log = n if n_log is None else n_log
    if checks_enabled() and sorted(f.values[:n_log]) != sorted(g.values[:n_log]):
        raise WitnessInvalidError("OneToOne: active entries are not a rearrangement")
    c = one_to_one_circuit(n, n_log)
    q = c.public["q"]

    def later(r, ch):
        chi = ch["chi"]
        nums = [(a * (x + chi) + 1 - a) % P for a, x in zip(q, f.values)]
        dens = [(a * (y + chi) + 1 - a) % P for a, y in zip(q, g.values)]
        return {"z": _grand_product(nums, dens)}

    proof = iop_prove(c, srs, {"f": f.values, "g": g.values}, {"f": f.com, "g": g.com}, seed, later,
                      check=checks_enabled())
    return _wrap(BlockKind.OneToOne, make_static(n=n, n_log=n_log), (f.com, g.com), {"iop": proof})


def _verify_one_to_one(p: BlockProof, srs: Srs) -> Verdict:
    n, n_log = static_get(p.static, "n"), static_get(p.static, "n_log")
    f, g = _coms(p, 2)
    return _check_iop("iop", one_to_one_circuit(n, n_log), srs, {"f": f, "g": g}, _part(p, "iop"))


# Ordered ------------------------------------------------------------------------

def _sub_circuit(n: int, n_log: int) -> IopCircuit:
    # d(x) = g(omega x) - g(x) on the first n_log - 1 slots
    sel = tuple(1 if j < n_log - 1 else 0 for j in range(n))
    k = Constraint("sub", lambda e: e.p("q") * (e.w("d") + e.w("g") - e.s("g")), 2)
    return IopCircuit("SubCheck", n, (Witness("g", 0, n), Witness("d", 0, n)), (k,), {"q": sel}, (), (n, n_log))


def range_table(direction: str, bits: int) -> LookupTable:
    if direction == "descending":
        return LookupTable.range(-(2 ** bits - 1), 1)
    if direction == "ascending":
        return LookupTable.range(0, 2 ** bits)
    raise ArgumentError(f"unknown direction {direction!r}")


def ordered_check(srs: Srs, f: Row, g: Row, direction: str = "descending", n_log: Optional[int] = None,
                  bits: int = 8, seed: bytes = b"") -> BlockProof:
    """Prove g's active slots are f's active slots sorted in the given direction."""
    n = f.n
    n_log = n if n_log is None else n_log
    table = range_table(direction, bits)
    preprocess_table(srs, table)
    gv = [decode_signed(v) for v in g.values]
    d = [(gv[j + 1] - gv[j]) % P if j < n_log - 1 else 0 for j in range(n)]
    d_row = commit_values(srs, d)
    perm = one_to_one(srs, f, g, n_log, seed + b"/perm")
    sub = iop_prove(_sub_circuit(n, n_log), srs, {"g": g.values, "d": d}, {"g": g.com, "d": d_row.com},
                    seed + b"/sub", check=checks_enabled())
    rng = prove_cq(srs, d_row, table)
    static = make_static(n=n, n_log=n_log, bits=bits, direction=direction)
    return _wrap(BlockKind.Ordered, static, (f.com, g.com, d_row.com), {"perm": perm, "sub": sub, "range": rng})


def _verify_ordered(p: BlockProof, srs: Srs) -> Verdict:
    n, n_log = static_get(p.static, "n"), static_get(p.static, "n_log")
    bits, direction = static_get(p.static, "bits"), static_get(p.static, "direction")
    f, g, d = _coms(p, 3)
    perm = _part(p, "perm")
    if not isinstance(perm, BlockProof) or perm.kind is not BlockKind.OneToOne:
        raise FormatError("Ordered: perm component is not a OneToOne proof")
    if perm.static != make_static(n=n, n_log=n_log) or perm.g1 != (f, g) or not _verify_one_to_one(perm, srs):
        return Verdict(False, "one-to-one")
    v = _check_iop("sub", _sub_circuit(n, n_log), srs, {"g": g, "d": d}, _part(p, "sub"))
    if not v:
        return v
    if not _range_ok(_part(p, "range"), d, n, range_table(direction, bits), srs):
        return Verdict(False, "range")
    return Verdict(True)


def _range_ok(rng, d: G1, n: int, table: LookupTable, srs: Srs) -> bool:
    if not isinstance(rng, BlockProof) or rng.kind is not BlockKind.CQ:
        raise FormatError("range component is not a CQ proof")
    if rng.static != public_cq_static(srs, table, n, False) or rng.slot("f") != d:
        return False
    return verify_block(rng, srs)


# MaxProof ---------------------------------------------------------------------

def _select_circuit(n: int, m: int) -> IopCircuit:
    ks = (
        Constraint("sub", lambda e: e.w("d") - e.w("s") + e.w("g"), 1),
        Constraint("ith-is-zero", lambda e: e.p("L0") * e.w("d"), 2),
    )
    ws = (Witness("s", 0, n), Witness("g", 0, m), Witness("d", 0))
    return IopCircuit("MaxSelect", n, ws, ks, {"L0": _unit(n, 0)}, (), (n, m))


def max_proof(srs: Srs, f: Row, g: Row, n_log: Optional[int] = None, bits: int = 8,
              seed: bytes = b"", sorted_row: Optional[Row] = None) -> BlockProof:
    """Prove g(omega^0) is the largest active entry of f."""
    n, m = f.n, g.n
    if n % m:
        raise ShapeError("MaxProof: output domain must divide the input domain")
    n_log = n if n_log is None else n_log
    vals = [decode_signed(v) for v in f.values[:n_log]]
    if checks_enabled() and decode_signed(g.values[0]) != max(vals):
        raise WitnessInvalidError("MaxProof: claimed value is not the maximum")
    if sorted_row is None:
        srt = sorted(vals, reverse=True) + [0] * (n - n_log)
        sorted_row = commit_values(srs, [v % P for v in srt])
    ordered = ordered_check(srs, f, sorted_row, "descending", n_log, bits, seed + b"/ordered")
    gi = [0] * n
    gi[0] = g.values[0]
    d = [(a - b) % P for a, b in zip(sorted_row.values, gi)]
    select = iop_prove(_select_circuit(n, m), srs, {"s": sorted_row.values, "g": g.values, "d": d},
                       {"s": sorted_row.com, "g": g.com}, seed + b"/select", check=checks_enabled())
    static = make_static(n=n, m=m, n_log=n_log, bits=bits)
    return _wrap(BlockKind.MaxProof, static, (f.com, g.com, sorted_row.com), {"ordered": ordered, "select": select})


def _verify_max(p: BlockProof, srs: Srs) -> Verdict:
    n, m = static_get(p.static, "n"), static_get(p.static, "m")
    n_log, bits = static_get(p.static, "n_log"), static_get(p.static, "bits")
    f, g, s = _coms(p, 3)
    ordered = _part(p, "ordered")
    if not isinstance(ordered, BlockProof) or ordered.kind is not BlockKind.Ordered:
        raise FormatError("MaxProof: ordered component has the wrong kind")
    want = make_static(n=n, n_log=n_log, bits=bits, direction="descending")
    if ordered.static != want or ordered.g1[:2] != (f, s):
        return Verdict(False, "ordered")
    v = _verify_ordered(ordered, srs)
    if not v:
        return Verdict(False, f"ordered/{v.component}")
    return _check_iop("select", _select_circuit(n, m), srs, {"s": s, "g": g}, _part(p, "select"))


# CopyConstraint -----------------------------------------------------------------

@dataclass(frozen=True)
class PermutationMap:
    """sigma: output slot -> input slot, a pad, or None (unconstrained).

    Slots are flat logical indices: input slot (row i, col j) is i*m + j and
    output slot (row i, col j) is i*n + j. Entries of ``sigma`` are either an
    int input slot, the tuple ("pad", value), or None.
    """

    p1: int
    m: int
    p2: int
    n: int
    sigma: tuple

    @classmethod
    def build(cls, p1: int, m: int, p2: int, n: int, sigma: Sequence) -> "PermutationMap":
        if len(sigma) != p2 * n:
            raise ShapeError(f"sigma has {len(sigma)} entries, expected {p2 * n}")
        out = []
        for s in sigma:
            if s is None or isinstance(s, int):
                if isinstance(s, int) and not 0 <= s < p1 * m:
                    raise ArgumentError(f"sigma entry {s} is not an input slot")
                out.append(s)
            else:
                tag, val = s
                if tag != "pad":
                    raise ArgumentError(f"bad sigma entry {s!r}")
                out.append(("pad", val % P))
        return cls(p1, m, p2, n, tuple(out))

    @property
    def N(self) -> int:
        return max(self.m, self.n)

    def pad_values(self) -> list[int]:
        seen: list[int] = []
        for s in self.sigma:
            if isinstance(s, tuple) and s[1] not in seen:
                seen.append(s[1])
        return seen

    def apply(self, inputs: Sequence[Sequence[int]]) -> list[list[Optional[int]]]:
        flat = [v for row in inputs for v in row[: self.m]]
        rows = []
        for i in range(self.p2):
            row = []
            for j in range(self.n):
                s = self.sigma[i * self.n + j]
                row.append(None if s is None else (s[1] if isinstance(s, tuple) else flat[s]))
            rows.append(row)
        return rows


def _positions(pm: PermutationMap):
    """Domain position (column, index on H_N) of every input and output slot."""
    N = pm.N
    ki, ko = N // pm.m, N // pm.n
    inp = [(i // pm.m, (i % pm.m) * ki) for i in range(pm.p1 * pm.m)]
    out = [(pm.p1 + i // pm.n, (i % pm.n) * ko) for i in range(pm.p2 * pm.n)]
    return inp, out


def copy_layout(pm: PermutationMap):
    """sigma label columns and the pad anchors (value, column, index)."""
    N = pm.N
    K = pm.p1 + pm.p2
    omega = domain_new(N).elements
    shifts = [pow(LABEL_BASE, k, P) for k in range(K)]
    ident = [[shifts[k] * omega[j] % P for j in range(N)] for k in range(K)]
    inp, out = _positions(pm)
    parts: dict = {}
    for s_idx, pos in enumerate(inp):
        parts.setdefault(("in", s_idx), []).append(pos)
    for o_idx, s in enumerate(pm.sigma):
        if s is None:
            continue
        key = ("pad", s[1]) if isinstance(s, tuple) else ("in", s)
        parts.setdefault(key, []).append(out[o_idx])
    sig = [row[:] for row in ident]
    anchors = []
    for key, cyc in parts.items():
        for a, b in zip(cyc, cyc[1:] + cyc[:1]):
            sig[a[0]][a[1]] = ident[b[0]][b[1]]
        if key[0] == "pad":
            anchors.append((key[1], cyc[0][0], cyc[0][1]))
    anchors.sort(key=lambda t: (t[1], t[2]))
    return shifts, [tuple(r) for r in sig], anchors


def copy_circuit(pm: PermutationMap) -> IopCircuit:
    N = pm.N
    K = pm.p1 + pm.p2
    shifts, sig, anchors = copy_layout(pm)
    ws = [Witness(f"w{k}", 0, pm.m if k < pm.p1 else pm.n) for k in range(K)]
    ws += [Witness("z", 1)] + [Witness(f"P{k}", 1) for k in range(1, K)]
    public = {f"S{k}": sig[k] for k in range(K)}
    public["L0"] = _unit(N, 0)
    ks = [Constraint("one", lambda e: e.p("L0") * (e.w("z") - 1), 2)]

    def link(k):
        cur = "z" if k == 0 else f"P{k}"
        sk = shifts[k]

        def fn(e):
            w = e.w(f"w{k}")
            num = w + e.c("beta") * sk * e.x + e.c("gamma")
            den = w + e.c("beta") * e.p(f"S{k}") + e.c("gamma")
            nxt = e.s("z") if k == K - 1 else e.w(f"P{k + 1}")
            return nxt * den - e.w(cur) * num

        return Constraint(f"permutation{k}", fn, 2)

    ks += [link(k) for k in range(K)]
    for i, (val, col, idx) in enumerate(anchors):
        public[f"T{i}"] = _unit(N, idx)
        ks.append(Constraint(f"pad{i}", lambda e, i=i, col=col, val=val: e.p(f"T{i}") * (e.w(f"w{col}") - val), 2))
    params = (pm.p1, pm.m, pm.p2, pm.n, pm.sigma)
    return IopCircuit("CopyConstraint", N, tuple(ws), tuple(ks), public, (("beta", "gamma"),), params)


def copy_constraint(srs: Srs, inputs: Sequence[Row], outputs: Sequence[Row], pm: PermutationMap,
                    seed: bytes = b"") -> BlockProof:
    if len(inputs) != pm.p1 or len(outputs) != pm.p2:
        raise ShapeError("CopyConstraint: row counts do not match the map")
    if any(r.n != pm.m for r in inputs) or any(r.n != pm.n for r in outputs):
        raise ShapeError("CopyConstraint: row lengths do not match the map")
    if checks_enabled():
        want = pm.apply([r.values for r in inputs])
        for i, (row, w) in enumerate(zip(outputs, want)):
            for j, v in enumerate(w):
                if v is not None and row.values[j] != v:
                    raise WitnessInvalidError(f"CopyConstraint: output[{i}][{j}] does not match its source")
    c = copy_circuit(pm)
    N, K = pm.N, pm.p1 + pm.p2
    rows = list(inputs) + list(outputs)
    vals = {f"w{k}": r.values for k, r in enumerate(rows)}
    links = {f"w{k}": r.com for k, r in enumerate(rows)}
    shifts, sig, _ = copy_layout(pm)
    omega = domain_new(N).elements

    def later(r, ch):
        beta, gamma = ch["beta"], ch["gamma"]
        cols = []
        for k, row in enumerate(rows):
            step = N // row.n
            col = [0] * N
            for j, v in enumerate(row.values):
                col[j * step] = v
            cols.append(col)
        nums = [[(cols[k][j] + beta * shifts[k] * omega[j] + gamma) % P for j in range(N)] for k in range(K)]
        dens = [[(cols[k][j] + beta * sig[k][j] + gamma) % P for j in range(N)] for k in range(K)]
        inv_d = [batch_inv(d) for d in dens]
        ratio = [[nums[k][j] * inv_d[k][j] % P for j in range(N)] for k in range(K)]
        z = [1] * N
        for j in range(N - 1):
            acc = z[j]
            for k in range(K):
                acc = acc * ratio[k][j] % P
            z[j + 1] = acc
        out = {"z": z}
        part = z[:]
        for k in range(1, K):
            part = [part[j] * ratio[k - 1][j] % P for j in range(N)]
            out[f"P{k}"] = part
        return out

    proof = iop_prove(c, srs, vals, links, seed, later, check=checks_enabled())
    static = make_static(p1=pm.p1, m=pm.m, p2=pm.p2, n=pm.n, sigma=_sigma_encode(pm.sigma))
    return _wrap(BlockKind.CopyConstraint, static, [r.com for r in rows], {"iop": proof})


def _sigma_encode(sigma: tuple) -> tuple:
    # transcript/serialization-friendly: -1 = free, input slot as is, pads as ("pad", v)
    return tuple(-1 if s is None else s for s in sigma)


def _sigma_decode(sigma: tuple) -> tuple:
    return tuple(None if (isinstance(s, int) and s < 0) else (tuple(s) if isinstance(s, (tuple, list)) else s)
                 for s in sigma)


def permutation_map_of(static) -> PermutationMap:
    return PermutationMap.build(static_get(static, "p1"), static_get(static, "m"), static_get(static, "p2"),
                                static_get(static, "n"), _sigma_decode(static_get(static, "sigma")))


def _verify_copy(p: BlockProof, srs: Srs) -> Verdict:
    try:
        pm = permutation_map_of(p.static)
    except (TypeError, ValueError, ArgumentError, ShapeError) as exc:
        raise FormatError(f"bad CopyConstraint parameters: {exc}") from None
    coms = _coms(p, pm.p1 + pm.p2)
    links = {f"w{k}": c for k, c in enumerate(coms)}
    return _check_iop("iop", copy_circuit(pm), srs, links, _part(p, "iop"))


# shared --------------------------------------------------------------------------

def _coms(p: BlockProof, k: int) -> tuple:
    if len(p.g1) != k or not all(isinstance(c, G1) for c in p.g1):
        raise FormatError(f"{p.kind.value} proof must carry {k} G1 commitments")
    return p.g1


def _part(p: BlockProof, name: str):
    if not isinstance(p.payload, dict) or name not in p.payload:
        raise FormatError(f"{p.kind.value} proof is missing component {name}")
    return p.payload[name]


VERIFIERS = {
    BlockKind.BooleanCheck: _verify_boolean,
    BlockKind.OneToOne: _verify_one_to_one,
    BlockKind.Ordered: _verify_ordered,
    BlockKind.MaxProof: _verify_max,
    BlockKind.CopyConstraint: _verify_copy,
}
